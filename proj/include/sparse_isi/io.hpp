#pragma once

#include "sparse_isi/analysis.hpp"
#include "sparse_isi/channel.hpp"
#include "sparse_isi/prefilter.hpp"
#include "sparse_isi/sim_harness.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace sparse_isi {

using Json = nlohmann::json;

/// Malformed or inconsistent input document.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Json complex_to_json(Complex c);
Complex complex_from_json(const Json& j);
Json complex_array_to_json(std::span<const Complex> v);
std::vector<Complex> complex_array_from_json(const Json& j);

/// {"coeffs": [[re, im], ...], "gaps": [...]}
Json to_json(const SparseCir& cir);
SparseCir cir_from_json(const Json& j);

/// {"profile": [{"delay": d, "variance": v}, ...]}; optional "total".
Json to_json(const PowerProfile& profile);
PowerProfile profile_from_json(const Json& j);

/// Either form, keyed on the presence of "profile".
ChannelSpec channel_from_json(const Json& j);
Json to_json(const ChannelSpec& channel);

/// {"samples": [[re, im], ...], "noise_variance": s, "data_length": N}
Json to_json(const ReceivedSignal& y);
ReceivedSignal signal_from_json(const Json& j);

/// Plain array of [re, im] pairs; the decision delay is not part of the
/// document and defaults to default_wmf_delay(L_F) on reading.
Json to_json(const PrefilterFir& fir);
PrefilterFir fir_from_json(const Json& j, std::optional<std::size_t> delay = std::nullopt);

Json to_json(const ExperimentConfig& config);
/// Missing fields take ExperimentConfig defaults; validates the result.
ExperimentConfig config_from_json(const Json& j);

Json to_json(const ComplexityReport& report);

/// Header `ebn0_db,bits,errors,ber,stderr,seconds`.
void write_records_csv(std::ostream& os, std::span<const BerRecord> records);
std::vector<BerRecord> read_records_csv(std::istream& is);

Json run_manifest(const ExperimentConfig& config, const RunOptions& options, std::span<const BerRecord> records);

Json read_json_file(const std::filesystem::path& path);

std::string hex64(std::uint64_t v);

}  // namespace sparse_isi
