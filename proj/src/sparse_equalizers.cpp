#include "sparse_isi/sparse_equalizers.hpp"

#include "trellis_detail.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace sparse_isi {

using detail::kInf;

bool InfluenceSet::contains(std::int64_t k) const { return std::binary_search(members.begin(), members.end(), k); }

InfluenceSet influence_set(const SparseCir& cir, std::int64_t k0, std::size_t horizon) {
    if (horizon == 0) throw std::invalid_argument("influence horizon must be positive");
    const auto delays = cir.delays();
    // Two symbols share a received sample iff their index difference equals
    // d_i - d_j for some pair of taps.
    std::set<std::int64_t> steps;
    for (auto a : delays)
        for (auto b : delays)
            if (a != b) steps.insert(static_cast<std::int64_t>(a) - static_cast<std::int64_t>(b));

    const std::int64_t hi = k0 + static_cast<std::int64_t>(horizon * cir.memory());
    std::vector<char> seen(static_cast<std::size_t>(hi - k0 + 1), 0);
    std::vector<std::int64_t> frontier{k0};
    seen[0] = 1;
    while (!frontier.empty()) {
        const auto k = frontier.back();
        frontier.pop_back();
        for (auto s : steps) {
            const auto j = k + s;
            if (j < k0 || j > hi || seen[static_cast<std::size_t>(j - k0)]) continue;
            seen[static_cast<std::size_t>(j - k0)] = 1;
            frontier.push_back(j);
        }
    }
    InfluenceSet out{k0, horizon, {}};
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (seen[i]) out.members.push_back(k0 + static_cast<std::int64_t>(i));
    return out;
}

std::uint64_t Decomposition::subtrellis_states(std::uint64_t alphabet_size) const {
    return detail::checked_pow(alphabet_size, subtrellis_memory, std::numeric_limits<std::uint64_t>::max());
}

std::vector<std::vector<std::size_t>> Decomposition::residue_classes(std::size_t length) const {
    std::vector<std::vector<std::size_t>> classes(subtrellis_count);
    for (std::size_t k = 0; k < length; ++k) classes[k % subtrellis_count].push_back(k);
    return classes;
}

Decomposition decompose(const SparseCir& cir) {
    const std::size_t g = delay_gcd(cir);
    if (g == 0) return {1, 0};
    return {g, cir.memory() / g};
}

SequenceEstimate pva_mlse(const ReceivedSignal& y, const SparseCir& cir, const Alphabet& alphabet) {
    const auto dec = decompose(cir);
    if (!dec.decomposable())
        throw std::invalid_argument("P-VA needs a zero-pad channel (tap delay gcd >= 2)");
    const std::size_t m = dec.subtrellis_count;
    const std::size_t n = y.data_length;
    const std::size_t steps = detail::observation_steps(y, cir.memory());

    std::vector<Tap> compressed(cir.taps().begin(), cir.taps().end());
    for (auto& t : compressed) t.delay /= m;
    const auto sub_cir = SparseCir::from_taps(std::move(compressed));

    std::vector<SymbolIndex> decided(n, 0);
    SequenceEstimate out{SymbolSequence(alphabet, {}), 0.0, 0};
    for (std::size_t j = 0; j < m && j < n; ++j) {
        ReceivedSignal sub;
        sub.noise_variance = y.noise_variance;
        for (std::size_t k = j; k < steps; k += m) sub.samples.push_back(y.samples[k]);
        sub.data_length = (n - j + m - 1) / m;
        auto est = viterbi_mlse(sub, sub_cir, alphabet);
        const auto idx = est.symbols.indices();
        for (std::size_t i = 0; i < idx.size(); ++i) decided[j + i * m] = idx[i];
        out.metric += est.metric;
        out.branch_evaluations += est.branch_evaluations;
    }
    out.symbols = SymbolSequence(alphabet, std::move(decided));
    return out;
}

std::uint64_t DdfseConfig::state_count(std::uint64_t alphabet_size) const {
    return detail::checked_pow(alphabet_size, trellis_memory, std::numeric_limits<std::uint64_t>::max());
}

SequenceEstimate ddfse(const ReceivedSignal& z, const SparseCir& h, std::size_t kmem, const Alphabet& alphabet) {
    const std::size_t mem = h.memory();
    if (kmem > mem)
        throw std::invalid_argument("DDFSE trellis memory K=" + std::to_string(kmem) + " exceeds channel memory " +
                                    std::to_string(mem));
    if (alphabet.size() > 256) throw std::invalid_argument("alphabets above 256 symbols are not supported");
    const std::size_t n = z.data_length;
    const std::size_t steps = detail::observation_steps(z, mem);
    const std::size_t m = alphabet.size();
    const auto states = static_cast<std::size_t>(detail::checked_pow(m, kmem, kMaxTrellisSize));
    const std::size_t oldest_weight = kmem == 0 ? 0 : states / m;
    const std::size_t depth = mem - kmem;

    detail::BranchTable table(h.taps(), kmem, alphabet, kMaxTrellisSize);
    const auto pattern = table.pattern_of();
    struct FeedbackTap {
        std::size_t slot;
        Complex coeff;
    };
    std::vector<FeedbackTap> feedback;
    for (const auto& t : h.taps())
        if (t.delay > kmem) feedback.push_back({t.delay - kmem - 1, t.coeff});

    // Per-state register of x[k-K-1], ..., x[k-L] along the survivor.
    std::vector<Complex> reg(states * depth), reg_next(states * depth);
    std::vector<double> prev(states, kInf), next(states, kInf), bm(table.pattern_count());
    std::vector<Complex> fb(states);
    prev[0] = 0.0;
    std::vector<std::uint8_t> back(steps * states);
    std::uint64_t evaluations = 0;

    for (std::size_t k = 0; k < steps; ++k) {
        const auto& expected = table.outputs(k, n);
        const bool forced = k >= n;
        for (std::size_t s = 0; s < states; ++s) {
            Complex acc{};
            if (prev[s] < kInf) {
                const Complex* r = reg.data() + s * depth;
                for (const auto& f : feedback) acc += f.coeff * r[f.slot];
            }
            fb[s] = acc;
        }
        std::uint8_t* bk = back.data() + k * states;
        // Symbol leaving the trellis window into the register sits at k - K.
        const bool leaving_valid = k >= kmem && k - kmem < n;

        for (std::size_t s_new = 0; s_new < states; ++s_new) {
            if (kmem > 0 && forced && s_new % m != 0) {
                next[s_new] = kInf;
                bk[s_new] = 0;
                continue;
            }
            const std::size_t base = kmem == 0 ? 0 : s_new / m;
            const std::size_t branches = kmem == 0 ? (forced ? 1 : m) : m;
            double best = kInf;
            std::uint8_t arg = 0;
            std::size_t best_prev = 0;
            for (std::size_t b = 0; b < branches; ++b) {
                const std::size_t s_prev = base + b * oldest_weight;
                if (prev[s_prev] == kInf) continue;
                const std::size_t e = kmem == 0 ? b : s_new + b * states;
                const double cand = prev[s_prev] + std::norm(z.samples[k] - expected[pattern[e]] - fb[s_prev]);
                if (cand < best) {
                    best = cand;
                    arg = static_cast<std::uint8_t>(b);
                    best_prev = s_prev;
                }
            }
            evaluations += branches;
            next[s_new] = best;
            bk[s_new] = arg;
            if (depth > 0) {
                Complex* dst = reg_next.data() + s_new * depth;
                const Complex* src = reg.data() + best_prev * depth;
                std::copy(src, src + depth - 1, dst + 1);
                dst[0] = leaving_valid ? alphabet[arg] : Complex{};
            }
        }
        std::swap(prev, next);
        std::swap(reg, reg_next);
    }

    std::size_t s = static_cast<std::size_t>(std::min_element(prev.begin(), prev.end()) - prev.begin());
    const double metric = prev[s];
    std::vector<SymbolIndex> decided(n, 0);
    for (std::size_t k = steps; k-- > 0;) {
        const std::uint8_t b = back[k * states + s];
        if (kmem == 0) {
            if (k < n) decided[k] = b;
        } else {
            if (k < n) decided[k] = static_cast<SymbolIndex>(s % m);
            s = s / m + b * oldest_weight;
        }
    }
    return {SymbolSequence(alphabet, std::move(decided)), metric, evaluations};
}

std::size_t choose_k(std::size_t f, std::size_t base_length, std::size_t alphabet_size) {
    if (alphabet_size < 2) throw std::invalid_argument("alphabet size must be at least 2");
    if (base_length < 1) throw std::invalid_argument("G must be at least 1");
    // floor(log_M(f+1)) computed exactly in integers
    std::size_t t = 0;
    for (std::size_t p = 1; p <= (f + 1) / alphabet_size; p *= alphabet_size) ++t;
    return base_length + t;
}

std::uint64_t mva_reference_count(std::uint64_t alphabet_size) {
    const std::uint64_t lim = std::numeric_limits<std::uint64_t>::max() / 4;
    auto pw = [&](std::size_t e) { return detail::checked_pow(alphabet_size, e, lim); };
    return 3 * pw(9) + 2 * (pw(8) + pw(7) + pw(6) + pw(5) + pw(4) + pw(3)) + pw(2);
}

}  // namespace sparse_isi
