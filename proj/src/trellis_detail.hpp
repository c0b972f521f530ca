#pragma once

#include "sparse_isi/channel.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace sparse_isi::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// base^exp, throwing std::length_error when the result exceeds `limit`.
inline std::uint64_t checked_pow(std::uint64_t base, std::size_t exp, std::uint64_t limit) {
    std::uint64_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (r > limit / base) throw std::length_error("trellis too large");
        r *= base;
    }
    return r;
}

/// Expected noiseless outputs of a shift-register trellis, cached per
/// distinct pattern of the symbols sitting under the nonzero taps.
///
/// An extended state e = sum_d digit_d M^d (d = 0 .. memory) holds the
/// symbol hypotheses x[k - d]. Only the digits under a tap matter, so the
/// branch output is looked up through pattern_of()[e].
class BranchTable {
public:
    BranchTable(std::span<const Tap> taps, std::size_t memory, const Alphabet& alphabet, std::uint64_t limit)
        : alphabet_(alphabet) {
        for (const auto& t : taps)
            if (t.delay <= memory) taps_.push_back(t);
        const std::uint64_t m = alphabet.size();
        const std::uint64_t ext = checked_pow(m, memory + 1, limit);
        pattern_count_ = static_cast<std::size_t>(checked_pow(m, taps_.size(), limit));
        std::vector<std::uint64_t> weight(memory + 1);
        std::uint64_t w = 1;
        for (auto& x : weight) {
            x = w;
            w *= m;
        }
        pattern_.resize(static_cast<std::size_t>(ext));
        for (std::uint64_t e = 0; e < ext; ++e) {
            std::uint64_t p = 0, pw = 1;
            for (const auto& t : taps_) {
                p += ((e / weight[t.delay]) % m) * pw;
                pw *= m;
            }
            pattern_[static_cast<std::size_t>(e)] = static_cast<std::uint32_t>(p);
        }
        full_ = compute(0, 1, std::numeric_limits<std::size_t>::max() / 2);
    }

    std::span<const std::uint32_t> pattern_of() const noexcept { return pattern_; }
    std::size_t pattern_count() const noexcept { return pattern_count_; }

    /// Outputs at time k; taps reaching positions outside [0, data_length)
    /// contribute nothing.
    const std::vector<Complex>& outputs(std::size_t k, std::size_t data_length) {
        bool boundary = false;
        for (const auto& t : taps_) {
            if (t.delay > k || k - t.delay >= data_length) {
                boundary = true;
                break;
            }
        }
        if (!boundary) return full_;
        scratch_ = compute(k, 0, data_length);
        return scratch_;
    }

private:
    std::vector<Complex> compute(std::size_t k, int unmasked, std::size_t data_length) const {
        const std::size_t m = alphabet_.size();
        std::vector<Complex> out(pattern_count_);
        for (std::size_t p = 0; p < pattern_count_; ++p) {
            std::size_t rest = p;
            Complex acc{};
            for (const auto& t : taps_) {
                const std::size_t digit = rest % m;
                rest /= m;
                const bool active = unmasked != 0 || (t.delay <= k && k - t.delay < data_length);
                if (active) acc += t.coeff * alphabet_[digit];
            }
            out[p] = acc;
        }
        return out;
    }

    Alphabet alphabet_;
    std::vector<Tap> taps_;
    std::vector<std::uint32_t> pattern_;
    std::size_t pattern_count_ = 0;
    std::vector<Complex> full_;
    std::vector<Complex> scratch_;
};

inline std::size_t observation_steps(const ReceivedSignal& y, std::size_t memory) {
    if (y.data_length == 0) throw std::invalid_argument("empty data block");
    if (y.samples.size() < y.data_length)
        throw std::invalid_argument("received block shorter than its data length");
    return std::min(y.samples.size(), y.data_length + memory);
}

}  // namespace sparse_isi::detail
