#pragma once

#include "sparse_isi/channel.hpp"

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace sparse_isi {

class RootFindingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Factored transfer polynomial H(D) = leading * prod_i (1 - zeros[i] * D),
/// D the unit delay. zeros[i] are the zeros of H(z) in the z-plane.
struct PolynomialZeros {
    std::vector<Complex> zeros;
    Complex leading;

    std::vector<Complex> expand() const;
};

/// All L zeros of a dense CIR, each polished to a relative residual below
/// 1e-8. Throws RootFindingError otherwise.
PolynomialZeros find_zeros(std::span<const Complex> dense_cir);
PolynomialZeros find_zeros(const SparseCir& cir);

/// Zeros within this distance of the unit circle count as on-circle and are
/// never reflected.
inline constexpr double kUnitCircleTolerance = 1e-6;

struct MinPhaseResult {
    std::vector<Complex> coeffs;          // h_min, dense, leading coefficient real positive
    std::vector<Complex> original_zeros;  // zeros of H(z)
    std::vector<Complex> zeros;           // zeros of H_min(z)
    std::size_t reflected_count = 0;
    /// whiteness_metric of the least-squares WMF of length 4(L+1).
    double whiteness = 0.0;
};

MinPhaseResult minimum_phase(std::span<const Complex> dense_cir);
MinPhaseResult minimum_phase(const SparseCir& cir);

/// Inserts f zeros between consecutive coefficients: H(z) -> H(z^(f+1)).
SparseCir zero_pad_expand(const SparseCir& cir, std::size_t f);
std::vector<Complex> zero_pad_expand(std::span<const Complex> dense_cir, std::size_t f);

/// FIR approximation of the whitened matched filter. The cascade with the
/// channel approximates h_min delayed by `delay` samples.
struct PrefilterFir {
    std::vector<Complex> coeffs;
    std::size_t delay = 0;
    /// ||f * h - delayed h_min|| / ||h_min|| of the design.
    double fit_error = 0.0;

    static PrefilterFir identity() { return {{Complex{1.0, 0.0}}, 0, 0.0}; }
};

/// Decision delay used when none is requested: ceil(L_F / 2).
inline constexpr std::size_t default_wmf_delay(std::size_t length) { return (length + 1) / 2; }

/// Least-squares WMF design of length L_F >= 2(L+1), default decision delay
/// default_wmf_delay(L_F). Cost is
/// O(L^3) for the factorization plus O(L_F L^2) for the banded solve.
PrefilterFir design_wmf(const SparseCir& cir, std::size_t length, std::optional<std::size_t> delay = std::nullopt);

/// z = y * f, advanced by the decision delay so that z[k] lines up with
/// symbol k of the cascade CIR. Output noise variance is scaled by ||f||^2.
ReceivedSignal apply_filter(const ReceivedSignal& y, const PrefilterFir& fir);

/// Full cascade f * h (length L_F + L).
std::vector<Complex> cascade(const PrefilterFir& fir, const SparseCir& cir);

/// Cascade taps [delay, delay + memory] as the channel model seen after
/// filtering. Entries below 1e-12 of the cascade norm are dropped.
SparseCir cascade_cir(const PrefilterFir& fir, const SparseCir& cir);

/// Largest normalized autocorrelation magnitude of the filter over lags
/// 1 .. L_F-1. White-noise input gives a white output iff this is 0.
double whiteness_metric(std::span<const Complex> fir);
inline double whiteness_metric(const PrefilterFir& fir) { return whiteness_metric(fir.coeffs); }

}  // namespace sparse_isi
