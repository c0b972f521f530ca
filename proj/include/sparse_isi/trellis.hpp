#pragma once

#include "sparse_isi/channel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sparse_isi {

/// Shift-register trellis: a state packs the last `memory` symbol indices
/// in radix M, most recent symbol in the least significant digit.
struct TrellisSpec {
    std::size_t memory = 0;
    std::size_t alphabet_size = 2;

    std::uint64_t state_count() const;
};

/// Upper bound on states/extended states handled by the full-complexity
/// equalizers.
inline constexpr std::uint64_t kMaxTrellisSize = std::uint64_t{1} << 24;

struct SequenceEstimate {
    SymbolSequence symbols;
    /// Sum over observed samples of |y[k] - (h * x_hat)[k]|^2 along the
    /// winning survivor.
    double metric = 0.0;
    /// Add-compare operations performed (one per trellis branch visited).
    std::uint64_t branch_evaluations = 0;
};

/// Brute-force MLSE over all M^N sequences; ties go to the lexicographically
/// smallest index sequence. Throws std::length_error when M^N > 2^24.
SequenceEstimate exhaustive_mlse(const ReceivedSignal& y, const SparseCir& cir, const Alphabet& alphabet);

/// Conventional Viterbi MLSE with M^L states and full-block traceback.
/// The start state is known (x[k] = 0 for k < 0); symbols past
/// y.data_length are known zeros, so observing L tail samples terminates
/// the trellis exactly.
SequenceEstimate viterbi_mlse(const ReceivedSignal& y, const SparseCir& cir, const Alphabet& alphabet);

/// Row-major N x M table of per-symbol probabilities.
class PosteriorSequence {
public:
    PosteriorSequence(std::size_t length, std::size_t alphabet_size, std::vector<double> probs);
    static PosteriorSequence uniform(std::size_t length, std::size_t alphabet_size);

    std::size_t length() const noexcept { return length_; }
    std::size_t alphabet_size() const noexcept { return m_; }
    double operator()(std::size_t k, std::size_t s) const { return probs_[k * m_ + s]; }
    std::span<const double> row(std::size_t k) const { return {probs_.data() + k * m_, m_}; }

    /// Argmax per index, lowest symbol index on ties.
    SymbolSequence hard_decisions(const Alphabet& alphabet) const;

private:
    std::size_t length_;
    std::size_t m_;
    std::vector<double> probs_;
};

/// Symbol-by-symbol MAP via log-domain forward/backward recursion with the
/// exact max* operator. Requires noise_variance > 0.
PosteriorSequence bcjr_map(const ReceivedSignal& y, const SparseCir& cir, double noise_variance,
                           const Alphabet& alphabet, const std::optional<PosteriorSequence>& priors = std::nullopt);

/// Branch-metric evaluations per decision of the conventional VA: M^(L+1).
std::uint64_t branch_metric_count(std::size_t memory, std::uint64_t alphabet_size);

/// Recomputes sum_k |y[k] - (h * x)[k]|^2 over the steps a trellis equalizer
/// observes (min(y.size, N + L)).
double sequence_metric(const ReceivedSignal& y, const SparseCir& cir, const SymbolSequence& x);

}  // namespace sparse_isi
