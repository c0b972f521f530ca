#include "sparse_isi/prefilter.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sparse_isi {

namespace {

// p(z) = sum_k h[k] z^(L-k), Horner.
Complex eval_poly(std::span<const Complex> h, Complex z) {
    Complex acc{};
    for (const auto& c : h) acc = acc * z + c;
    return acc;
}

Complex eval_poly_derivative(std::span<const Complex> h, Complex z) {
    const std::size_t n = h.size() - 1;
    Complex acc{};
    for (std::size_t k = 0; k < n; ++k) acc = acc * z + h[k] * static_cast<double>(n - k);
    return acc;
}

double poly_scale(std::span<const Complex> h, double r) {
    double acc = 0.0;
    for (const auto& c : h) acc = acc * r + std::abs(c);
    return acc;
}

std::vector<Complex> expand_roots(std::span<const Complex> roots) {
    std::vector<Complex> p{Complex{1.0, 0.0}};
    for (const auto& r : roots) {
        p.push_back(Complex{});
        for (std::size_t k = p.size() - 1; k > 0; --k) p[k] -= r * p[k - 1];
    }
    return p;
}

double l2(std::span<const Complex> v) {
    double e = 0.0;
    for (const auto& x : v) e += std::norm(x);
    return std::sqrt(e);
}

std::vector<Complex> convolve_dense(std::span<const Complex> a, std::span<const Complex> b) {
    std::vector<Complex> c(a.size() + b.size() - 1);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) c[i + j] += a[i] * b[j];
    return c;
}

// Solves the Hermitian positive definite banded system A x = b where
// A(i, j) = band[i - j] for 0 <= i - j <= w and A(j, i) = conj(A(i, j)).
std::vector<Complex> solve_banded_hpd(std::span<const Complex> band, std::size_t n, std::vector<Complex> b) {
    const std::size_t w = band.size() - 1;
    // Lower Cholesky factor, row i stores columns i-w .. i at offsets 0 .. w.
    std::vector<Complex> lo(n * (w + 1));
    auto at = [&](std::size_t i, std::size_t j) -> Complex& { return lo[i * (w + 1) + (j + w - i)]; };
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j0 = i >= w ? i - w : 0;
        for (std::size_t j = j0; j <= i; ++j) {
            Complex s = band[i - j];
            const std::size_t k0 = std::max(j0, j >= w ? j - w : 0);
            for (std::size_t k = k0; k < j; ++k) s -= at(i, k) * std::conj(at(j, k));
            if (i == j) {
                if (!(s.real() > 0.0)) throw std::runtime_error("WMF normal equations not positive definite");
                at(i, i) = std::sqrt(s.real());
            } else {
                at(i, j) = s / at(j, j);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j0 = i >= w ? i - w : 0;
        for (std::size_t j = j0; j < i; ++j) b[i] -= at(i, j) * b[j];
        b[i] /= at(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t j1 = std::min(n - 1, i + w);
        for (std::size_t j = i + 1; j <= j1; ++j) b[i] -= std::conj(at(j, i)) * b[j];
        b[i] /= at(i, i);
    }
    return b;
}

struct WmfDesign {
    std::vector<Complex> coeffs;
    double fit_error;
};

WmfDesign design_against(std::span<const Complex> h, std::span<const Complex> h_min, std::size_t length,
                         std::size_t delay) {
    const std::size_t mem = h.size() - 1;
    // rho(l) = sum_m conj(h[m]) h[m + l]
    std::vector<Complex> band(std::min(mem, length - 1) + 1);
    for (std::size_t l = 0; l < band.size(); ++l)
        for (std::size_t m = 0; m + l <= mem; ++m) band[l] += std::conj(h[m]) * h[m + l];

    std::vector<Complex> target(length + mem);
    for (std::size_t i = 0; i < h_min.size() && delay + i < target.size(); ++i) target[delay + i] = h_min[i];

    std::vector<Complex> rhs(length);
    for (std::size_t i = 0; i < length; ++i)
        for (std::size_t m = 0; m <= mem; ++m) rhs[i] += std::conj(h[m]) * target[m + i];

    WmfDesign out;
    out.coeffs = solve_banded_hpd(band, length, std::move(rhs));
    auto c = convolve_dense(out.coeffs, h);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= target[i];
    out.fit_error = l2(c) / l2(h_min);
    return out;
}

}  // namespace

std::vector<Complex> PolynomialZeros::expand() const {
    auto p = expand_roots(zeros);
    for (auto& c : p) c *= leading;
    return p;
}

PolynomialZeros find_zeros(std::span<const Complex> h) {
    if (h.size() < 2) throw std::invalid_argument("find_zeros needs channel memory >= 1");
    if (h.front() == Complex{} || h.back() == Complex{})
        throw std::invalid_argument("find_zeros needs nonzero first and last coefficients");
    const auto n = static_cast<Eigen::Index>(h.size() - 1);

    // Companion matrix of the monic polynomial z^n + a_1 z^(n-1) + ... + a_n.
    Eigen::MatrixXcd companion = Eigen::MatrixXcd::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) companion(0, k) = -h[static_cast<std::size_t>(k) + 1] / h[0];
    for (Eigen::Index k = 1; k < n; ++k) companion(k, k - 1) = 1.0;

    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(companion, false);
    if (solver.info() != Eigen::Success) throw RootFindingError("companion eigenvalue iteration did not converge");

    PolynomialZeros out;
    out.leading = h[0];
    out.zeros.resize(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        Complex z = solver.eigenvalues()[k];
        // Newton polish on the original coefficients; keep only improvements.
        double res = std::abs(eval_poly(h, z));
        for (int it = 0; it < 4 && res > 0.0; ++it) {
            const Complex d = eval_poly_derivative(h, z);
            if (d == Complex{}) break;
            const Complex cand = z - eval_poly(h, z) / d;
            const double cand_res = std::abs(eval_poly(h, cand));
            if (!(cand_res < res)) break;
            z = cand;
            res = cand_res;
        }
        if (!(res <= 1e-8 * poly_scale(h, std::abs(z))))
            throw RootFindingError("root residual " + std::to_string(res) + " exceeds tolerance");
        out.zeros[static_cast<std::size_t>(k)] = z;
    }
    return out;
}

PolynomialZeros find_zeros(const SparseCir& cir) { return find_zeros(cir.dense()); }

MinPhaseResult minimum_phase(std::span<const Complex> h) {
    if (h.empty() || h.front() == Complex{}) throw std::invalid_argument("minimum_phase needs h_0 != 0");
    MinPhaseResult out;
    if (h.size() == 1) {
        out.coeffs = {Complex{std::abs(h[0]), 0.0}};
        return out;
    }
    const auto pz = find_zeros(h);
    out.original_zeros = pz.zeros;
    out.zeros = pz.zeros;
    for (auto& z : out.zeros) {
        if (std::abs(z) > 1.0 + kUnitCircleTolerance) {
            z = 1.0 / std::conj(z);
            ++out.reflected_count;
        }
    }
    out.coeffs = expand_roots(out.zeros);
    const double scale = l2(h) / l2(out.coeffs);
    for (auto& c : out.coeffs) c *= scale;

    const std::size_t wmf_len = 4 * h.size();
    out.whiteness = whiteness_metric(design_against(h, out.coeffs, wmf_len, default_wmf_delay(wmf_len)).coeffs);
    return out;
}

MinPhaseResult minimum_phase(const SparseCir& cir) { return minimum_phase(cir.dense()); }

SparseCir zero_pad_expand(const SparseCir& cir, std::size_t f) {
    std::vector<Tap> taps(cir.taps().begin(), cir.taps().end());
    for (auto& t : taps) t.delay *= (f + 1);
    return SparseCir::from_taps(std::move(taps));
}

std::vector<Complex> zero_pad_expand(std::span<const Complex> h, std::size_t f) {
    if (h.empty()) return {};
    std::vector<Complex> out((h.size() - 1) * (f + 1) + 1);
    for (std::size_t i = 0; i < h.size(); ++i) out[i * (f + 1)] = h[i];
    return out;
}

PrefilterFir design_wmf(const SparseCir& cir, std::size_t length, std::optional<std::size_t> delay) {
    const std::size_t mem = cir.memory();
    if (length < 2 * (mem + 1))
        throw std::invalid_argument("WMF length " + std::to_string(length) + " below 2(L+1) = " +
                                    std::to_string(2 * (mem + 1)));
    const std::size_t q = delay.value_or(default_wmf_delay(length));
    if (q >= length) throw std::invalid_argument("WMF decision delay must be below the filter length");
    const auto h = cir.dense();
    const auto mp = mem == 0 ? std::vector<Complex>{Complex{std::abs(h[0]), 0.0}} : minimum_phase(h).coeffs;
    auto d = design_against(h, mp, length, q);
    return PrefilterFir{std::move(d.coeffs), q, d.fit_error};
}

ReceivedSignal apply_filter(const ReceivedSignal& y, const PrefilterFir& fir) {
    ReceivedSignal z;
    z.data_length = y.data_length;
    double gain = 0.0;
    for (const auto& c : fir.coeffs) gain += std::norm(c);
    z.noise_variance = y.noise_variance * gain;
    const auto n = y.samples.size();
    z.samples.assign(n, Complex{});
    const auto taps = fir.coeffs.size();
    for (std::size_t k = 0; k < n; ++k) {
        // z[k] = sum_j f[j] y[k + q - j], y zero outside [0, n)
        const std::size_t top = k + fir.delay;
        const std::size_t j_lo = top >= n ? top - n + 1 : 0;
        const std::size_t j_hi = std::min(taps - 1, top);
        Complex acc{};
        for (std::size_t j = j_lo; j <= j_hi; ++j) acc += fir.coeffs[j] * y.samples[top - j];
        z.samples[k] = acc;
    }
    return z;
}

std::vector<Complex> cascade(const PrefilterFir& fir, const SparseCir& cir) {
    const auto h = cir.dense();
    return convolve_dense(fir.coeffs, h);
}

SparseCir cascade_cir(const PrefilterFir& fir, const SparseCir& cir) {
    const auto c = cascade(fir, cir);
    const double floor = 1e-12 * l2(c);
    std::vector<Complex> trimmed(cir.memory() + 1);
    for (std::size_t i = 0; i < trimmed.size() && fir.delay + i < c.size(); ++i) {
        const Complex v = c[fir.delay + i];
        trimmed[i] = std::abs(v) > floor ? v : Complex{};
    }
    while (trimmed.size() > 1 && trimmed.back() == Complex{}) trimmed.pop_back();
    return SparseCir::from_dense(trimmed);
}

double whiteness_metric(std::span<const Complex> f) {
    if (f.empty()) return 0.0;
    double r0 = 0.0;
    for (const auto& c : f) r0 += std::norm(c);
    if (r0 == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t lag = 1; lag < f.size(); ++lag) {
        Complex r{};
        for (std::size_t n = 0; n + lag < f.size(); ++n) r += f[n + lag] * std::conj(f[n]);
        worst = std::max(worst, std::abs(r) / r0);
    }
    return worst;
}

}  // namespace sparse_isi
