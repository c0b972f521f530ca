#pragma once

#include "sparse_isi/channel.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace sparse_isi {

/// Gaussian tail probability, Q(x) = erfc(x / sqrt 2) / 2.
double q_function(double x);

double db_to_linear(double db);
double linear_to_db(double x);

/// Bit-energy-to-noise ratio convention: Eb/N0 = 1 / sigma_n^2 for unit
/// channel energy and unit-energy symbols.
double noise_variance_for(double ebn0_db);

/// BPSK matched-filter bound Q(sqrt(2 ||h||^2 Eb/N0)).
double mfb_static(double ebn0_db, double energy = 1.0);

/// Eb/N0 in dB at which mfb_static reaches `ber` (bisection).
double mfb_static_ebn0_for(double ber, double energy = 1.0);

/// BPSK BER over flat Rayleigh fading with unit mean energy:
/// (1 - sqrt(g / (1 + g))) / 2.
double flat_rayleigh_ber(double ebn0_db);

struct McEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// E_h{ Q(sqrt(2 ||h||^2 Eb/N0)) } over `draws` >= 10^4 fading realizations.
McEstimate mfb_fading(const PowerProfile& profile, double ebn0_db, std::size_t draws, std::uint64_t seed);

struct CurvePoint {
    double ebn0_db;
    double ber;
    double standard_error = 0.0;
};

struct MfbCurve {
    std::vector<CurvePoint> points;
};

MfbCurve mfb_static_curve(std::span<const double> ebn0_db, double energy = 1.0);
/// Uses the same channel draws at every grid point, so the curve is
/// exactly monotone.
MfbCurve mfb_fading_curve(const PowerProfile& profile, std::span<const double> ebn0_db, std::size_t draws,
                          std::uint64_t seed);
MfbCurve flat_rayleigh_curve(std::span<const double> ebn0_db);

/// Log-linear interpolation of a BER curve: Eb/N0 (dB) where it crosses
/// `target`. Throws std::domain_error when no adjacent pair brackets it.
double ebn0_at_ber(const MfbCurve& curve, double target);

struct ComplexityReport {
    std::size_t memory = 0;
    std::uint64_t alphabet_size = 2;
    std::uint64_t conventional = 0;          // M^(L+1)
    std::optional<std::uint64_t> parallel;   // m M^(L/m + 1) for zero-pad channels
    std::size_t subtrellis_count = 1;
    std::optional<std::uint64_t> multi_trellis;  // reference value for delays {0, 7, 8}
    /// Multi-trellis count does not undercut the conventional VA.
    std::optional<bool> multi_trellis_not_better;
};

ComplexityReport complexity_report(const SparseCir& cir, std::uint64_t alphabet_size);

}  // namespace sparse_isi
