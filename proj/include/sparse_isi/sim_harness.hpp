#pragma once

#include "sparse_isi/analysis.hpp"
#include "sparse_isi/channel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sparse_isi {

enum class EqualizerKind { Va, Pva, Bcjr, Ddfse };

std::string_view to_string(EqualizerKind kind);
EqualizerKind equalizer_kind_from(std::string_view name);

struct PrefilterSpec {
    std::size_t length = 0;
    std::optional<std::size_t> delay;
    bool operator==(const PrefilterSpec&) const = default;
};

struct EqualizerSpec {
    EqualizerKind kind = EqualizerKind::Va;
    std::size_t trellis_memory = 0;  // K, DDFSE only
    std::optional<PrefilterSpec> prefilter;
    bool operator==(const EqualizerSpec&) const = default;
};

struct StoppingRule {
    std::uint64_t min_errors = 200;
    std::uint64_t max_bits = 20'000'000;
    /// Permits min_errors below 100.
    bool allow_few_errors = false;
    bool operator==(const StoppingRule&) const = default;
};

using ChannelSpec = std::variant<SparseCir, PowerProfile>;

struct ExperimentConfig {
    std::string name = "experiment";
    std::string note;
    ChannelSpec channel;
    /// Rescale a static CIR to unit energy before simulation.
    bool normalize_channel = true;
    std::size_t alphabet_size = 2;
    EqualizerSpec equalizer;
    std::vector<double> ebn0_db;
    StoppingRule stop;
    std::size_t block_length = 512;
    std::uint64_t seed = 1;

    /// Throws std::invalid_argument describing the first violated rule.
    void validate() const;
    bool operator==(const ExperimentConfig&) const = default;
};

struct BerRecord {
    double ebn0_db = 0.0;
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
    double ber = 0.0;
    double standard_error = 0.0;
    double seconds = 0.0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

struct RunOptions {
    std::size_t threads = 1;
};

/// Monte-Carlo BER sweep. Block b at grid point i is simulated from
/// derive_seed({seed, i, b}); blocks are consumed in index order, so the
/// totals do not depend on the thread count.
std::vector<BerRecord> run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Horizontal distance (dB) between the simulated curve and the reference at
/// `target_ber`, positive when the simulation is worse.
double gap_at_ber(std::span<const BerRecord> records, const MfbCurve& reference, double target_ber);
double gap_at_ber(const MfbCurve& curve, const MfbCurve& reference, double target_ber);

MfbCurve to_curve(std::span<const BerRecord> records);

/// FNV-1a over the canonical JSON form with the seed removed.
std::uint64_t config_hash(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws std::invalid_argument for unknown names.
ExperimentConfig preset(std::string_view name);
/// One-line description of a preset for --help output.
std::string preset_summary(std::string_view name);

}  // namespace sparse_isi
