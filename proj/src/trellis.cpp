#include "sparse_isi/trellis.hpp"

#include "trellis_detail.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sparse_isi {

using detail::kInf;

namespace {

double max_star(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == -kInf) return a;
    return a + std::log1p(std::exp(b - a));
}

void check_alphabet(const Alphabet& alphabet) {
    if (alphabet.size() > 256) throw std::invalid_argument("alphabets above 256 symbols are not supported");
}

}  // namespace

std::uint64_t TrellisSpec::state_count() const {
    return detail::checked_pow(alphabet_size, memory, std::numeric_limits<std::uint64_t>::max());
}

std::uint64_t branch_metric_count(std::size_t memory, std::uint64_t alphabet_size) {
    return detail::checked_pow(alphabet_size, memory + 1, std::numeric_limits<std::uint64_t>::max());
}

double sequence_metric(const ReceivedSignal& y, const SparseCir& cir, const SymbolSequence& x) {
    const std::size_t steps = detail::observation_steps(y, cir.memory());
    if (x.size() != y.data_length) throw std::invalid_argument("sequence length differs from data length");
    const auto xv = x.values();
    const auto ref = convolve(xv, cir, steps);
    double m = 0.0;
    for (std::size_t k = 0; k < steps; ++k) m += std::norm(y.samples[k] - ref[k]);
    return m;
}

SequenceEstimate exhaustive_mlse(const ReceivedSignal& y, const SparseCir& cir, const Alphabet& alphabet) {
    check_alphabet(alphabet);
    const std::size_t n = y.data_length;
    const std::size_t steps = detail::observation_steps(y, cir.memory());
    const std::uint64_t total = detail::checked_pow(alphabet.size(), n, kMaxTrellisSize);
    const std::size_t m = alphabet.size();

    std::vector<SymbolIndex> cur(n, 0), best(n, 0);
    std::vector<Complex> xv(n);
    double best_metric = kInf;
    for (std::uint64_t count = 0; count < total; ++count) {
        for (std::size_t k = 0; k < n; ++k) xv[k] = alphabet[cur[k]];
        double metric = 0.0;
        for (std::size_t k = 0; k < steps && metric < best_metric; ++k) {
            Complex ref{};
            for (const auto& t : cir.taps()) {
                if (t.delay > k) break;
                const std::size_t pos = k - t.delay;
                if (pos < n) ref += t.coeff * xv[pos];
            }
            metric += std::norm(y.samples[k] - ref);
        }
        if (metric < best_metric) {
            best_metric = metric;
            best = cur;
        }
        // Odometer in lexicographic order, position 0 most significant.
        for (std::size_t k = n; k-- > 0;) {
            if (++cur[k] < m) break;
            cur[k] = 0;
        }
    }
    return {SymbolSequence(alphabet, std::move(best)), best_metric, total * steps};
}

SequenceEstimate viterbi_mlse(const ReceivedSignal& y, const SparseCir& cir, const Alphabet& alphabet) {
    check_alphabet(alphabet);
    const std::size_t mem = cir.memory();
    const std::size_t n = y.data_length;
    const std::size_t steps = detail::observation_steps(y, mem);
    const std::size_t m = alphabet.size();
    const auto states = static_cast<std::size_t>(detail::checked_pow(m, mem, kMaxTrellisSize));
    const std::size_t oldest_weight = mem == 0 ? 0 : states / m;

    detail::BranchTable table(cir.taps(), mem, alphabet, kMaxTrellisSize);
    const auto pattern = table.pattern_of();

    std::vector<double> prev(states, kInf), next(states, kInf), bm(table.pattern_count());
    prev[0] = 0.0;
    std::vector<std::uint8_t> back(steps * states);
    std::uint64_t evaluations = 0;

    // Exact metric ties are broken towards the lexicographically smaller
    // survivor (earliest differing symbol decides), as in exhaustive_mlse.
    auto path_less = [&](std::size_t k, std::size_t a, std::size_t b) {
        bool less = false;
        for (std::size_t t = k + 1; t-- > 0 && a != b;) {
            const std::size_t xa = a % m, xb = b % m;
            if (xa != xb) less = xa < xb;
            a = a / m + back[t * states + a] * oldest_weight;
            b = b / m + back[t * states + b] * oldest_weight;
        }
        return less;
    };

    for (std::size_t k = 0; k < steps; ++k) {
        const auto& expected = table.outputs(k, n);
        for (std::size_t p = 0; p < bm.size(); ++p) bm[p] = std::norm(y.samples[k] - expected[p]);
        const bool forced = k >= n;
        std::uint8_t* bk = back.data() + k * states;

        if (mem == 0) {
            double best = kInf;
            std::uint8_t arg = 0;
            const std::size_t inputs = forced ? 1 : m;
            for (std::size_t u = 0; u < inputs; ++u) {
                const double v = prev[0] + bm[pattern[u]];
                if (v < best) {
                    best = v;
                    arg = static_cast<std::uint8_t>(u);
                }
            }
            evaluations += inputs;
            next[0] = best;
            bk[0] = arg;
        } else {
            for (std::size_t s_new = 0; s_new < states; ++s_new) {
                if (forced && s_new % m != 0) {
                    next[s_new] = kInf;
                    bk[s_new] = 0;
                    continue;
                }
                const std::size_t base = s_new / m;
                double best = kInf;
                std::uint8_t arg = 0;
                for (std::size_t v = 0; v < m; ++v) {
                    const double cand = prev[base + v * oldest_weight] + bm[pattern[s_new + v * states]];
                    if (cand < best ||
                        (cand == best && cand < kInf && k > 0 &&
                         path_less(k - 1, base + v * oldest_weight, base + arg * oldest_weight))) {
                        best = cand;
                        arg = static_cast<std::uint8_t>(v);
                    }
                }
                evaluations += m;
                next[s_new] = best;
                bk[s_new] = arg;
            }
        }
        std::swap(prev, next);
    }

    std::size_t s = static_cast<std::size_t>(std::min_element(prev.begin(), prev.end()) - prev.begin());
    if (mem > 0)
        for (std::size_t c = s + 1; c < states; ++c)
            if (prev[c] == prev[s] && path_less(steps - 1, c, s)) s = c;
    const double metric = prev[s];
    std::vector<SymbolIndex> decided(n, 0);
    for (std::size_t k = steps; k-- > 0;) {
        const std::uint8_t b = back[k * states + s];
        if (mem == 0) {
            if (k < n) decided[k] = b;
        } else {
            if (k < n) decided[k] = static_cast<SymbolIndex>(s % m);
            s = s / m + b * oldest_weight;
        }
    }
    return {SymbolSequence(alphabet, std::move(decided)), metric, evaluations};
}

// --- MAP -----------------------------------------------------------------------

PosteriorSequence::PosteriorSequence(std::size_t length, std::size_t alphabet_size, std::vector<double> probs)
    : length_(length), m_(alphabet_size), probs_(std::move(probs)) {
    if (probs_.size() != length_ * m_) throw std::invalid_argument("posterior table has the wrong size");
}

PosteriorSequence PosteriorSequence::uniform(std::size_t length, std::size_t alphabet_size) {
    return PosteriorSequence(length, alphabet_size,
                             std::vector<double>(length * alphabet_size, 1.0 / static_cast<double>(alphabet_size)));
}

SymbolSequence PosteriorSequence::hard_decisions(const Alphabet& alphabet) const {
    if (alphabet.size() != m_) throw std::invalid_argument("alphabet size mismatch");
    std::vector<SymbolIndex> idx(length_);
    for (std::size_t k = 0; k < length_; ++k) {
        const auto r = row(k);
        idx[k] = static_cast<SymbolIndex>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return SymbolSequence(alphabet, std::move(idx));
}

PosteriorSequence bcjr_map(const ReceivedSignal& y, const SparseCir& cir, double noise_variance,
                           const Alphabet& alphabet, const std::optional<PosteriorSequence>& priors) {
    check_alphabet(alphabet);
    if (!(noise_variance > 0.0)) throw std::invalid_argument("MAP detection needs a positive noise variance");
    const std::size_t mem = cir.memory();
    const std::size_t n = y.data_length;
    const std::size_t steps = detail::observation_steps(y, mem);
    const std::size_t m = alphabet.size();
    if (priors && (priors->length() != n || priors->alphabet_size() != m))
        throw std::invalid_argument("prior table does not match the block");
    const auto states = static_cast<std::size_t>(detail::checked_pow(m, mem, kMaxTrellisSize));
    const std::size_t oldest_weight = mem == 0 ? 1 : states / m;

    detail::BranchTable table(cir.taps(), mem, alphabet, kMaxTrellisSize);
    const auto pattern = table.pattern_of();
    const double inv_var = 1.0 / noise_variance;

    std::vector<double> log_prior(n * m, -std::log(static_cast<double>(m)));
    if (priors)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t u = 0; u < m; ++u) log_prior[k * m + u] = std::log((*priors)(k, u));

    // gamma over extended states (new state + oldest digit * states)
    const std::size_t ext = states * m;
    std::vector<double> gamma(steps * ext);
    for (std::size_t k = 0; k < steps; ++k) {
        const auto& expected = table.outputs(k, n);
        double* g = gamma.data() + k * ext;
        for (std::size_t e = 0; e < ext; ++e) {
            const std::size_t u = e % m;
            if (k >= n) {
                g[e] = u == 0 ? -std::norm(y.samples[k] - expected[pattern[e]]) * inv_var : -kInf;
            } else {
                g[e] = -std::norm(y.samples[k] - expected[pattern[e]]) * inv_var + log_prior[k * m + u];
            }
        }
    }

    // With memory 0 the single state is its own predecessor for every input.
    auto prev_state = [&](std::size_t e) {
        if (mem == 0) return std::size_t{0};
        const std::size_t s_new = e % states;
        const std::size_t v = e / states;
        return s_new / m + v * oldest_weight;
    };
    auto next_state = [&](std::size_t e) { return mem == 0 ? std::size_t{0} : e % states; };

    std::vector<double> alpha((steps + 1) * states, -kInf);
    alpha[0] = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double* a = alpha.data() + k * states;
        double* an = alpha.data() + (k + 1) * states;
        const double* g = gamma.data() + k * ext;
        for (std::size_t e = 0; e < ext; ++e) {
            const std::size_t sn = next_state(e);
            an[sn] = max_star(an[sn], a[prev_state(e)] + g[e]);
        }
    }
    std::vector<double> beta((steps + 1) * states, -kInf);
    std::fill(beta.begin() + static_cast<std::ptrdiff_t>(steps * states), beta.end(), 0.0);
    for (std::size_t k = steps; k-- > 0;) {
        double* b = beta.data() + k * states;
        const double* bn = beta.data() + (k + 1) * states;
        const double* g = gamma.data() + k * ext;
        for (std::size_t e = 0; e < ext; ++e) {
            const std::size_t sp = prev_state(e);
            b[sp] = max_star(b[sp], g[e] + bn[next_state(e)]);
        }
    }

    std::vector<double> probs(n * m);
    std::vector<double> lp(m);
    for (std::size_t k = 0; k < n; ++k) {
        std::fill(lp.begin(), lp.end(), -kInf);
        const double* a = alpha.data() + k * states;
        const double* bn = beta.data() + (k + 1) * states;
        const double* g = gamma.data() + k * ext;
        for (std::size_t e = 0; e < ext; ++e) {
            const std::size_t u = e % m;
            lp[u] = max_star(lp[u], a[prev_state(e)] + g[e] + bn[next_state(e)]);
        }
        double norm = -kInf;
        for (auto v : lp) norm = max_star(norm, v);
        for (std::size_t u = 0; u < m; ++u) probs[k * m + u] = std::exp(lp[u] - norm);
    }
    return PosteriorSequence(n, m, std::move(probs));
}

}  // namespace sparse_isi
