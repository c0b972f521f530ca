#include "sparse_isi/analysis.hpp"

#include "sparse_isi/sparse_equalizers.hpp"
#include "sparse_isi/seeding.hpp"
#include "sparse_isi/trellis.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace sparse_isi {

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double linear_to_db(double x) { return 10.0 * std::log10(x); }

double noise_variance_for(double ebn0_db) { return 1.0 / db_to_linear(ebn0_db); }

double mfb_static(double ebn0_db, double energy) {
    if (!(energy > 0.0)) throw std::invalid_argument("channel energy must be positive");
    return q_function(std::sqrt(2.0 * energy * db_to_linear(ebn0_db)));
}

double mfb_static_ebn0_for(double ber, double energy) {
    if (!(ber > 0.0 && ber < 0.5)) throw std::invalid_argument("target BER must lie in (0, 0.5)");
    double lo = -60.0, hi = 60.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mfb_static(mid, energy) > ber ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double flat_rayleigh_ber(double ebn0_db) {
    const double g = db_to_linear(ebn0_db);
    return 0.5 * (1.0 - std::sqrt(g / (1.0 + g)));
}

namespace {

std::vector<double> draw_energies(const PowerProfile& profile, std::size_t draws, std::uint64_t seed) {
    if (draws < 10'000) throw std::invalid_argument("fading MFB needs at least 10^4 draws");
    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> energy(draws);
    for (auto& e : energy) {
        double acc = 0.0;
        for (const auto& p : profile.entries()) {
            if (p.variance <= 0.0) continue;
            const double re = gauss(rng);
            const double im = gauss(rng);
            acc += 0.5 * p.variance * (re * re + im * im);
        }
        e = acc;
    }
    return energy;
}

McEstimate average_mfb(std::span<const double> energies, double ebn0_db) {
    const double g = db_to_linear(ebn0_db);
    double sum = 0.0, sum2 = 0.0;
    for (auto e : energies) {
        const double p = q_function(std::sqrt(2.0 * e * g));
        sum += p;
        sum2 += p * p;
    }
    const auto n = static_cast<double>(energies.size());
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    return {mean, std::sqrt(var / (n - 1.0))};
}

}  // namespace

McEstimate mfb_fading(const PowerProfile& profile, double ebn0_db, std::size_t draws, std::uint64_t seed) {
    return average_mfb(draw_energies(profile, draws, seed), ebn0_db);
}

MfbCurve mfb_static_curve(std::span<const double> grid, double energy) {
    MfbCurve c;
    for (auto x : grid) c.points.push_back({x, mfb_static(x, energy), 0.0});
    return c;
}

MfbCurve mfb_fading_curve(const PowerProfile& profile, std::span<const double> grid, std::size_t draws,
                          std::uint64_t seed) {
    const auto energies = draw_energies(profile, draws, seed);
    MfbCurve c;
    for (auto x : grid) {
        const auto est = average_mfb(energies, x);
        c.points.push_back({x, est.mean, est.standard_error});
    }
    return c;
}

MfbCurve flat_rayleigh_curve(std::span<const double> grid) {
    MfbCurve c;
    for (auto x : grid) c.points.push_back({x, flat_rayleigh_ber(x), 0.0});
    return c;
}

double ebn0_at_ber(const MfbCurve& curve, double target) {
    if (!(target > 0.0)) throw std::invalid_argument("target BER must be positive");
    const auto& p = curve.points;
    for (std::size_t i = 0; i + 1 < p.size(); ++i) {
        const double a = p[i].ber, b = p[i + 1].ber;
        if (a >= target && b <= target && a > 0.0 && b > 0.0) {
            if (a == b) return p[i].ebn0_db;
            const double t = (std::log10(a) - std::log10(target)) / (std::log10(a) - std::log10(b));
            return p[i].ebn0_db + t * (p[i + 1].ebn0_db - p[i].ebn0_db);
        }
    }
    throw std::domain_error("BER curve does not bracket the target");
}

ComplexityReport complexity_report(const SparseCir& cir, std::uint64_t alphabet_size) {
    ComplexityReport r;
    r.memory = cir.memory();
    r.alphabet_size = alphabet_size;
    r.conventional = branch_metric_count(cir.memory(), alphabet_size);
    const auto dec = decompose(cir);
    r.subtrellis_count = dec.subtrellis_count;
    if (dec.decomposable()) r.parallel = dec.subtrellis_count * branch_metric_count(dec.subtrellis_memory, alphabet_size);
    if (cir.delays() == std::vector<std::size_t>{0, 7, 8}) {
        r.multi_trellis = mva_reference_count(alphabet_size);
        r.multi_trellis_not_better = *r.multi_trellis >= r.conventional;
    }
    return r;
}

}  // namespace sparse_isi
