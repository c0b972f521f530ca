#include "sparse_isi/channel.hpp"

#include "sparse_isi/seeding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace sparse_isi {

Alphabet::Alphabet(std::vector<Complex> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw std::invalid_argument("alphabet needs at least two symbols");
}

Alphabet Alphabet::bpsk() { return Alphabet({{1.0, 0.0}, {-1.0, 0.0}}); }

Alphabet Alphabet::qpsk() {
    const double a = 1.0 / std::sqrt(2.0);
    return Alphabet({{a, a}, {a, -a}, {-a, a}, {-a, -a}});
}

std::size_t Alphabet::bits_per_symbol() const {
    if (!std::has_single_bit(points_.size()))
        throw std::logic_error("bit labelling requires a power-of-two alphabet");
    return static_cast<std::size_t>(std::countr_zero(points_.size()));
}

SymbolIndex Alphabet::nearest(Complex v) const noexcept {
    SymbolIndex best = 0;
    double best_d = std::norm(v - points_[0]);
    for (std::size_t i = 1; i < points_.size(); ++i) {
        const double d = std::norm(v - points_[i]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<SymbolIndex>(i);
        }
    }
    return best;
}

std::optional<SymbolIndex> Alphabet::index_of(Complex v, double tol) const noexcept {
    for (std::size_t i = 0; i < points_.size(); ++i)
        if (std::abs(v - points_[i]) <= tol) return static_cast<SymbolIndex>(i);
    return std::nullopt;
}

SymbolSequence::SymbolSequence(Alphabet alphabet, std::vector<SymbolIndex> indices)
    : alphabet_(std::move(alphabet)), indices_(std::move(indices)) {
    for (auto i : indices_)
        if (i >= alphabet_.size()) throw std::invalid_argument("symbol index outside alphabet");
}

SymbolSequence SymbolSequence::from_values(const Alphabet& alphabet, std::span<const Complex> values) {
    std::vector<SymbolIndex> idx;
    idx.reserve(values.size());
    for (const auto& v : values) {
        auto i = alphabet.index_of(v);
        if (!i) throw std::invalid_argument("value is not a member of the alphabet");
        idx.push_back(*i);
    }
    return SymbolSequence(alphabet, std::move(idx));
}

std::vector<Complex> SymbolSequence::values() const {
    std::vector<Complex> v;
    v.reserve(indices_.size());
    for (auto i : indices_) v.push_back(alphabet_[i]);
    return v;
}

// --- SparseCir -------------------------------------------------------------

SparseCir SparseCir::from_taps(std::vector<Tap> taps) {
    if (taps.empty()) throw std::invalid_argument("CIR needs at least one tap");
    if (taps.front().delay != 0) throw std::invalid_argument("first tap delay must be 0");
    for (std::size_t i = 1; i < taps.size(); ++i)
        if (taps[i].delay <= taps[i - 1].delay)
            throw std::invalid_argument("tap delays must be strictly increasing");
    if (taps.front().coeff == Complex{} || taps.back().coeff == Complex{})
        throw std::invalid_argument("leading and trailing coefficients must be nonzero");
    for (const auto& t : taps)
        if (!std::isfinite(t.coeff.real()) || !std::isfinite(t.coeff.imag()))
            throw std::invalid_argument("non-finite channel coefficient");
    return SparseCir(std::move(taps));
}

SparseCir SparseCir::from_dense(std::span<const Complex> coeffs) {
    std::vector<Tap> taps;
    for (std::size_t d = 0; d < coeffs.size(); ++d)
        if (coeffs[d] != Complex{}) taps.push_back({d, coeffs[d]});
    if (coeffs.empty() || coeffs.front() == Complex{} || coeffs.back() == Complex{})
        throw std::invalid_argument("dense CIR has a zero leading or trailing coefficient");
    return from_taps(std::move(taps));
}

std::vector<std::size_t> SparseCir::gaps() const {
    std::vector<std::size_t> g;
    for (std::size_t i = 1; i < taps_.size(); ++i) g.push_back(taps_[i].delay - taps_[i - 1].delay - 1);
    return g;
}

std::vector<std::size_t> SparseCir::delays() const {
    std::vector<std::size_t> d;
    for (const auto& t : taps_) d.push_back(t.delay);
    return d;
}

std::vector<Complex> SparseCir::coeffs() const {
    std::vector<Complex> c;
    for (const auto& t : taps_) c.push_back(t.coeff);
    return c;
}

std::vector<Complex> SparseCir::dense() const {
    std::vector<Complex> h(memory() + 1);
    for (const auto& t : taps_) h[t.delay] = t.coeff;
    return h;
}

double SparseCir::energy() const noexcept {
    double e = 0.0;
    for (const auto& t : taps_) e += std::norm(t.coeff);
    return e;
}

SparseCir SparseCir::scaled(Complex factor) const {
    if (factor == Complex{}) throw std::invalid_argument("cannot scale a CIR by zero");
    auto taps = taps_;
    for (auto& t : taps) t.coeff *= factor;
    return SparseCir(std::move(taps));
}

SparseCir SparseCir::normalized() const { return scaled(1.0 / std::sqrt(energy())); }

SparseCir make_sparse_cir(std::span<const Complex> coeffs, std::span<const std::int64_t> gaps) {
    if (coeffs.empty() || gaps.size() + 1 != coeffs.size())
        throw std::invalid_argument("need G+1 coefficients and G gaps, got " + std::to_string(coeffs.size()) +
                                    " and " + std::to_string(gaps.size()));
    std::vector<Tap> taps;
    taps.reserve(coeffs.size());
    std::size_t delay = 0;
    taps.push_back({0, coeffs[0]});
    for (std::size_t i = 0; i < gaps.size(); ++i) {
        if (gaps[i] < 0) throw std::invalid_argument("negative gap");
        delay += static_cast<std::size_t>(gaps[i]) + 1;
        taps.push_back({delay, coeffs[i + 1]});
    }
    // Interior zero coefficients are legal in the input but are not stored.
    std::vector<Tap> kept;
    for (std::size_t i = 0; i < taps.size(); ++i)
        if (i == 0 || i + 1 == taps.size() || taps[i].coeff != Complex{}) kept.push_back(taps[i]);
    return SparseCir::from_taps(std::move(kept));
}

std::size_t delay_gcd(const SparseCir& cir) {
    std::size_t g = 0;
    for (const auto& t : cir.taps()) g = std::gcd(g, t.delay);
    return g;
}

std::optional<ZeroPadStructure> detect_zero_pad(const SparseCir& cir) {
    const std::size_t g = delay_gcd(cir);
    if (g < 2) return std::nullopt;
    return ZeroPadStructure{g - 1, cir.memory() / g};
}

// --- PowerProfile ------------------------------------------------------------

PowerProfile PowerProfile::from_entries(std::vector<ProfileEntry> entries, double declared_total) {
    if (entries.empty()) throw std::invalid_argument("empty power profile");
    if (entries.front().delay != 0) throw std::invalid_argument("profile must start at delay 0");
    double sum = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i > 0 && entries[i].delay <= entries[i - 1].delay)
            throw std::invalid_argument("profile delays must be strictly increasing");
        if (!(entries[i].variance >= 0.0) || !std::isfinite(entries[i].variance))
            throw std::invalid_argument("profile variances must be finite and nonnegative");
        sum += entries[i].variance;
    }
    if (sum <= 0.0) throw std::invalid_argument("all profile variances are zero");
    if (std::abs(sum - declared_total) > 1e-12 * std::max(1.0, declared_total))
        throw std::invalid_argument("profile variances sum to " + std::to_string(sum) + ", declared " +
                                    std::to_string(declared_total));
    return PowerProfile(std::move(entries), declared_total);
}

std::size_t PowerProfile::memory() const {
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
        if (it->variance > 0.0) return it->delay;
    return 0;
}

PowerProfile PowerProfile::scaled(double factor) const {
    if (!(factor > 0.0)) throw std::invalid_argument("profile scale must be positive");
    auto e = entries_;
    double sum = 0.0;
    for (auto& x : e) sum += (x.variance *= factor);
    return PowerProfile(std::move(e), sum);
}

// --- Channel simulation -----------------------------------------------------

std::vector<Complex> convolve(std::span<const Complex> x, const SparseCir& cir, std::size_t length) {
    std::vector<Complex> y(length);
    for (std::size_t k = 0; k < length; ++k) {
        Complex acc{};
        for (const auto& t : cir.taps()) {
            if (t.delay > k) break;
            const std::size_t pos = k - t.delay;
            if (pos < x.size()) acc += t.coeff * x[pos];
        }
        y[k] = acc;
    }
    return y;
}

ReceivedSignal simulate_channel(const SymbolSequence& x, const SparseCir& cir, double noise_variance,
                                std::uint64_t seed, std::size_t tail) {
    if (!(noise_variance >= 0.0)) throw std::invalid_argument("noise variance must be nonnegative");
    if (x.size() <= cir.memory()) throw std::invalid_argument("block length must exceed channel memory");
    const auto xv = x.values();
    ReceivedSignal out;
    out.samples = convolve(xv, cir, x.size() + tail);
    out.noise_variance = noise_variance;
    out.data_length = x.size();
    if (noise_variance > 0.0) {
        Rng rng(seed);
        std::normal_distribution<double> gauss(0.0, std::sqrt(noise_variance / 2.0));
        for (auto& s : out.samples) {
            const double re = gauss(rng);
            const double im = gauss(rng);
            s += Complex{re, im};
        }
    }
    return out;
}

SparseCir draw_fading_cir(const PowerProfile& profile, std::uint64_t seed) {
    const auto entries = profile.entries();
    if (entries.front().variance <= 0.0)
        throw std::invalid_argument("leading profile tap must have positive variance");
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Tap> taps;
    for (const auto& e : entries) {
        if (e.variance <= 0.0) continue;
        const double s = std::sqrt(e.variance / 2.0);
        const double re = gauss(rng);
        const double im = gauss(rng);
        taps.push_back({e.delay, Complex{s * re, s * im}});
    }
    return SparseCir::from_taps(std::move(taps));
}

// --- Bit mapping -------------------------------------------------------------

SymbolSequence map_bits(std::span<const std::uint8_t> bits, const Alphabet& alphabet) {
    const std::size_t m = alphabet.bits_per_symbol();
    if (bits.size() % m != 0) throw std::invalid_argument("bit count is not a multiple of bits per symbol");
    std::vector<SymbolIndex> idx(bits.size() / m);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        SymbolIndex s = 0;
        for (std::size_t b = 0; b < m; ++b) {
            const auto bit = bits[k * m + b];
            if (bit > 1) throw std::invalid_argument("bits must be 0 or 1");
            s = (s << 1) | bit;
        }
        idx[k] = s;
    }
    return SymbolSequence(alphabet, std::move(idx));
}

std::vector<std::uint8_t> unmap_symbols(const SymbolSequence& decisions) {
    const std::size_t m = decisions.alphabet().bits_per_symbol();
    std::vector<std::uint8_t> bits;
    bits.reserve(decisions.size() * m);
    for (auto s : decisions.indices())
        for (std::size_t b = m; b-- > 0;) bits.push_back(static_cast<std::uint8_t>((s >> b) & 1U));
    return bits;
}

std::vector<std::uint8_t> unmap_symbols(std::span<const Complex> values, const Alphabet& alphabet) {
    std::vector<SymbolIndex> idx;
    idx.reserve(values.size());
    for (const auto& v : values) idx.push_back(alphabet.nearest(v));
    return unmap_symbols(SymbolSequence(alphabet, std::move(idx)));
}

}  // namespace sparse_isi
