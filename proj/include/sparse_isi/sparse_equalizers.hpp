#pragma once

#include "sparse_isi/channel.hpp"
#include "sparse_isi/trellis.hpp"

#include <cstdint>
#include <vector>

namespace sparse_isi {

/// Decisions reachable from the hypothesis at k0 through shared received
/// samples, restricted to the window [k0, k0 + D*L].
struct InfluenceSet {
    std::int64_t origin = 0;
    std::size_t horizon = 0;
    std::vector<std::int64_t> members;  // sorted

    bool contains(std::int64_t k) const;
};

inline constexpr std::size_t kDefaultHorizon = 2;

InfluenceSet influence_set(const SparseCir& cir, std::int64_t k0, std::size_t horizon = kDefaultHorizon);

struct Decomposition {
    std::size_t subtrellis_count = 1;   // m
    std::size_t subtrellis_memory = 0;  // L / m

    bool decomposable() const noexcept { return subtrellis_count >= 2; }
    std::uint64_t subtrellis_states(std::uint64_t alphabet_size) const;
    /// Time indices 0 .. length-1 grouped by residue mod m.
    std::vector<std::vector<std::size_t>> residue_classes(std::size_t length) const;
};

/// m = gcd of the nonzero tap delays (1 for memoryless channels).
Decomposition decompose(const SparseCir& cir);

/// Parallel-trellis VA: m independent Viterbi equalizers over the
/// subsampled streams y[j], y[j+m], ... with the compressed CIR (delays
/// divided by m), decisions interleaved. Throws std::invalid_argument when
/// the channel is not decomposable.
SequenceEstimate pva_mlse(const ReceivedSignal& y, const SparseCir& cir, const Alphabet& alphabet);

struct DdfseConfig {
    std::size_t trellis_memory = 0;  // K

    std::size_t feedback_depth(std::size_t channel_memory) const { return channel_memory - trellis_memory; }
    std::uint64_t state_count(std::uint64_t alphabet_size) const;
};

/// Delayed decision-feedback sequence estimation: a VA over M^K states
/// covering the taps at delays 0..K, with the taps beyond K cancelled per
/// state from that state's survivor. K = L is the full VA; K = 0 is a
/// symbol-by-symbol decision-feedback equalizer.
SequenceEstimate ddfse(const ReceivedSignal& z, const SparseCir& h_cascade, std::size_t trellis_memory,
                       const Alphabet& alphabet);

/// Largest K with M^K comparable to the parallel-trellis equalizer on an
/// underlying zero-pad grid: floor(log_M(f+1)) + G.
std::size_t choose_k(std::size_t f, std::size_t base_length, std::size_t alphabet_size);

/// Branch-metric count per decision of the multi-trellis VA on the
/// reference CIR with delays {0, 7, 8}:
/// 3M^9 + 2M^8 + 2M^7 + 2M^6 + 2M^5 + 2M^4 + 2M^3 + M^2.
std::uint64_t mva_reference_count(std::uint64_t alphabet_size);

}  // namespace sparse_isi
