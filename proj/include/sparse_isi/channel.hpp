#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sparse_isi {

using Complex = std::complex<double>;
using SymbolIndex = std::uint32_t;

/// Ordered M-ary constellation. Index order doubles as the bit labelling:
/// index i carries the log2(M) bits of i, most significant bit first.
class Alphabet {
public:
    explicit Alphabet(std::vector<Complex> points);

    /// {+1, -1}: bit 0 -> +1.
    static Alphabet bpsk();
    /// Unit-energy QPSK, Gray labelled per quadrature component.
    static Alphabet qpsk();

    std::size_t size() const noexcept { return points_.size(); }
    const Complex& operator[](std::size_t i) const { return points_[i]; }
    std::span<const Complex> points() const noexcept { return points_; }

    /// log2(M); only defined for power-of-two alphabets.
    std::size_t bits_per_symbol() const;

    /// Nearest point; ties go to the lowest index.
    SymbolIndex nearest(Complex v) const noexcept;
    std::optional<SymbolIndex> index_of(Complex v, double tol = 1e-12) const noexcept;

    bool operator==(const Alphabet&) const = default;

private:
    std::vector<Complex> points_;
};

class SymbolSequence {
public:
    SymbolSequence(Alphabet alphabet, std::vector<SymbolIndex> indices);

    /// Throws std::invalid_argument if a value is not an alphabet member.
    static SymbolSequence from_values(const Alphabet& alphabet, std::span<const Complex> values);

    const Alphabet& alphabet() const noexcept { return alphabet_; }
    std::span<const SymbolIndex> indices() const noexcept { return indices_; }
    std::size_t size() const noexcept { return indices_.size(); }
    Complex value(std::size_t k) const { return alphabet_[indices_[k]]; }
    std::vector<Complex> values() const;

    bool operator==(const SymbolSequence&) const = default;

private:
    Alphabet alphabet_;
    std::vector<SymbolIndex> indices_;
};

struct Tap {
    std::size_t delay;
    Complex coeff;
    bool operator==(const Tap&) const = default;
};

/// Sparse channel impulse response in canonical form: delays strictly
/// increasing from 0, first and last coefficients nonzero.
class SparseCir {
public:
    /// Identity channel h = [1].
    SparseCir() : taps_{{0, Complex{1.0, 0.0}}} {}

    static SparseCir from_taps(std::vector<Tap> taps);
    /// Drops exactly-zero entries. Leading or trailing zeros are rejected.
    static SparseCir from_dense(std::span<const Complex> coeffs);

    std::span<const Tap> taps() const noexcept { return taps_; }
    /// Channel memory L (delay of the last tap).
    std::size_t memory() const noexcept { return taps_.back().delay; }
    /// G + 1.
    std::size_t nonzero_count() const noexcept { return taps_.size(); }
    /// f_0 ... f_{G-1}.
    std::vector<std::size_t> gaps() const;
    std::vector<std::size_t> delays() const;
    std::vector<Complex> coeffs() const;
    std::vector<Complex> dense() const;
    double energy() const noexcept;

    SparseCir scaled(Complex factor) const;
    /// Rescaled to unit energy.
    SparseCir normalized() const;

    bool operator==(const SparseCir&) const = default;

private:
    explicit SparseCir(std::vector<Tap> taps) : taps_(std::move(taps)) {}
    std::vector<Tap> taps_;
};

/// Builds the canonical CIR from G+1 coefficients and G gap sizes.
SparseCir make_sparse_cir(std::span<const Complex> coeffs, std::span<const std::int64_t> gaps);

struct ZeroPadStructure {
    std::size_t spacing;      // f
    std::size_t base_length;  // G of the underlying zero-pad grid, L / (f + 1)
    bool operator==(const ZeroPadStructure&) const = default;
};

/// Maximal zero-pad grid containing every tap; none when the delay gcd is 1
/// or the channel is memoryless.
std::optional<ZeroPadStructure> detect_zero_pad(const SparseCir& cir);

std::size_t delay_gcd(const SparseCir& cir);

struct ProfileEntry {
    std::size_t delay;
    double variance;
    bool operator==(const ProfileEntry&) const = default;
};

/// Per-tap variances of a block-fading sparse channel.
class PowerProfile {
public:
    /// Checks that variances sum to `declared_total` within 1e-12.
    static PowerProfile from_entries(std::vector<ProfileEntry> entries, double declared_total = 1.0);

    std::span<const ProfileEntry> entries() const noexcept { return entries_; }
    double total_variance() const noexcept { return total_; }
    std::size_t memory() const;
    PowerProfile scaled(double factor) const;

    bool operator==(const PowerProfile&) const = default;

private:
    PowerProfile(std::vector<ProfileEntry> e, double total) : entries_(std::move(e)), total_(total) {}
    std::vector<ProfileEntry> entries_;
    double total_ = 1.0;
};

/// Received block. `samples` holds y[0] ... y[N + tail - 1] where the
/// first `data_length` = N samples are aligned with the data symbols and
/// the remaining ones observe the channel tail after the block (x[k] = 0
/// for k >= N). x[k] = 0 for k < 0 as well.
struct ReceivedSignal {
    std::vector<Complex> samples;
    double noise_variance = 0.0;
    std::size_t data_length = 0;
};

/// Noiseless channel output y[k] = sum_g h_g x[k - d_g] for k < length,
/// with x zero outside [0, x.size()).
std::vector<Complex> convolve(std::span<const Complex> x, const SparseCir& cir, std::size_t length);

/// Transmits one block. `tail` extra samples observe the decay of the
/// channel after the last data symbol; tail = L gives exact termination.
ReceivedSignal simulate_channel(const SymbolSequence& x, const SparseCir& cir, double noise_variance,
                                std::uint64_t seed, std::size_t tail = 0);

/// Independent circularly-symmetric complex Gaussian taps, one draw per block.
SparseCir draw_fading_cir(const PowerProfile& profile, std::uint64_t seed);

SymbolSequence map_bits(std::span<const std::uint8_t> bits, const Alphabet& alphabet = Alphabet::bpsk());
std::vector<std::uint8_t> unmap_symbols(const SymbolSequence& decisions);
/// Nearest-symbol decision followed by bit unmapping.
std::vector<std::uint8_t> unmap_symbols(std::span<const Complex> values, const Alphabet& alphabet = Alphabet::bpsk());

}  // namespace sparse_isi
