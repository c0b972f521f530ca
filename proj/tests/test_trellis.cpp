#include "oracles.hpp"
#include "sparse_isi/seeding.hpp"
#include "sparse_isi/trellis.hpp"

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

using namespace sparse_isi;

namespace {

struct Instance {
    SymbolSequence x;
    SparseCir cir;
    ReceivedSignal y;
};

SparseCir random_cir(Rng& rng, std::size_t mem) {
    std::normal_distribution<double> g;
    std::vector<Complex> h(mem + 1);
    for (auto& v : h) v = {g(rng), g(rng)};
    // random sparsity in the interior
    for (std::size_t i = 1; i < mem; ++i)
        if (rng() % 3 == 0) h[i] = 0.0;
    return SparseCir::from_dense(h);
}

Instance random_instance(Rng& rng, const Alphabet& a, std::size_t n, std::size_t mem, double sigma2,
                         std::size_t tail) {
    auto cir = random_cir(rng, mem);
    std::vector<SymbolIndex> idx(n);
    for (auto& i : idx) i = static_cast<SymbolIndex>(rng() % a.size());
    SymbolSequence x(a, idx);
    auto y = simulate_channel(x, cir, sigma2, rng(), tail);
    return {std::move(x), std::move(cir), std::move(y)};
}

std::vector<std::uint32_t> indices(const SymbolSequence& s) { return {s.indices().begin(), s.indices().end()}; }

}  // namespace

TEST_CASE("Viterbi equals brute-force minimum-distance search") {
    Rng rng(derive_seed({41}));
    const auto a = Alphabet::bpsk();
    for (int t = 0; t < 1000; ++t) {
        const std::size_t mem = t % 4;
        const std::size_t n = 10;
        const std::size_t tail = t % 2 == 0 ? mem : 0;
        auto inst = random_instance(rng, a, n, mem, 0.5 + 0.5 * (t % 3), tail);
        const auto steps = std::min(inst.y.samples.size(), n + mem);
        const auto ref = oracle::brute_mlse(inst.y.samples, steps, inst.cir.dense(), {a.points().begin(), a.points().end()}, n);
        const auto va = viterbi_mlse(inst.y, inst.cir, a);
        const auto ex = exhaustive_mlse(inst.y, inst.cir, a);
        CHECK(indices(va.symbols) == ref.indices);
        CHECK(indices(ex.symbols) == ref.indices);
        CHECK(va.metric == doctest::Approx(ref.metric).epsilon(1e-12));
    }
}

TEST_CASE("Viterbi on a QPSK alphabet equals brute force") {
    Rng rng(derive_seed({42}));
    const auto a = Alphabet::qpsk();
    for (int t = 0; t < 100; ++t) {
        auto inst = random_instance(rng, a, 6, 1 + t % 2, 0.4, t % 2);
        const auto steps = std::min(inst.y.samples.size(), std::size_t{6} + inst.cir.memory());
        const auto ref = oracle::brute_mlse(inst.y.samples, steps, inst.cir.dense(), {a.points().begin(), a.points().end()}, 6);
        CHECK(indices(viterbi_mlse(inst.y, inst.cir, a).symbols) == ref.indices);
    }
}

TEST_CASE("exact ties resolve like the exhaustive search") {
    const auto a = Alphabet::bpsk();
    SUBCASE("all-zero observation") {
        for (std::size_t mem = 0; mem <= 3; ++mem) {
            std::vector<Tap> taps{{0, 1.0}};
            if (mem > 0) taps.push_back({mem, 1.0});
            const auto cir = SparseCir::from_taps(taps);
            ReceivedSignal y{std::vector<Complex>(10 + mem), 1.0, 10};
            CHECK(viterbi_mlse(y, cir, a).symbols == exhaustive_mlse(y, cir, a).symbols);
            y.samples.resize(10);
            CHECK(viterbi_mlse(y, cir, a).symbols == exhaustive_mlse(y, cir, a).symbols);
        }
    }
    SUBCASE("quantized observations") {
        Rng rng(derive_seed({43}));
        for (int t = 0; t < 300; ++t) {
            const std::size_t mem = 1 + t % 3;
            std::vector<Complex> h(mem + 1, 0.0);
            h.front() = 1.0;
            h.back() = (t % 2) ? 1.0 : -1.0;
            const auto cir = SparseCir::from_dense(h);
            ReceivedSignal y;
            y.data_length = 9;
            for (std::size_t k = 0; k < 9 + mem; ++k) y.samples.push_back(static_cast<double>(static_cast<int>(rng() % 5) - 2));
            CHECK(viterbi_mlse(y, cir, a).symbols == exhaustive_mlse(y, cir, a).symbols);
        }
    }
}

TEST_CASE("Viterbi recovers noiseless blocks") {
    Rng rng(derive_seed({44}));
    for (int t = 0; t < 50; ++t) {
        const auto& a = t % 2 ? Alphabet::qpsk() : Alphabet::bpsk();
        auto inst = random_instance(rng, t % 2 ? Alphabet::qpsk() : Alphabet::bpsk(), 64, 1 + t % 6, 0.0, t % 3 ? 1 + t % 6 : 0);
        CHECK(viterbi_mlse(inst.y, inst.cir, a).symbols == inst.x);
    }
}

TEST_CASE("path metric is additive") {
    Rng rng(derive_seed({45}));
    for (int t = 0; t < 100; ++t) {
        auto inst = random_instance(rng, Alphabet::bpsk(), 200, 1 + t % 6, 1.0, t % 2 ? 1 + t % 6 : 0);
        const auto va = viterbi_mlse(inst.y, inst.cir, Alphabet::bpsk());
        const auto again = sequence_metric(inst.y, inst.cir, va.symbols);
        CHECK(std::abs(va.metric - again) <= 1e-9 * std::max(1.0, again));
        CHECK(va.metric <= sequence_metric(inst.y, inst.cir, inst.x) + 1e-9);
    }
}

TEST_CASE("memoryless channel decides symbol by symbol") {
    Rng rng(derive_seed({46}));
    std::normal_distribution<double> g;
    const auto a = Alphabet::qpsk();
    ReceivedSignal y;
    y.data_length = 100;
    for (int i = 0; i < 100; ++i) y.samples.push_back({g(rng), g(rng)});
    const auto cir = SparseCir::from_taps({{0, 1.0}});
    const auto va = viterbi_mlse(y, cir, a);
    for (std::size_t k = 0; k < 100; ++k) CHECK(va.symbols.indices()[k] == a.nearest(y.samples[k]));
}

TEST_CASE("trellis size and branch count for the decomposable example") {
    CHECK(TrellisSpec{8, 2}.state_count() == 256);
    CHECK(branch_metric_count(8, 2) == 512);
    CHECK(branch_metric_count(0, 2) == 2);
    const auto cir = SparseCir::from_taps({{0, 0.6}, {6, 0.6}, {8, 0.5}});
    Rng rng(derive_seed({47}));
    std::vector<SymbolIndex> idx(100);
    for (auto& i : idx) i = static_cast<SymbolIndex>(rng() & 1U);
    const auto y = simulate_channel(SymbolSequence(Alphabet::bpsk(), idx), cir, 0.1, 3, 8);
    const auto va = viterbi_mlse(y, cir, Alphabet::bpsk());
    // M^9 per data decision; the known-zero tail only extends M^8 branches.
    CHECK(va.branch_evaluations == 100 * 512 + 8 * 256);
}

TEST_CASE("oversized trellises are refused") {
    const auto cir = SparseCir::from_taps({{0, 1.0}, {30, 1.0}});
    ReceivedSignal y{std::vector<Complex>(40), 1.0, 40};
    CHECK_THROWS_AS(viterbi_mlse(y, cir, Alphabet::bpsk()), std::length_error);
    ReceivedSignal big{std::vector<Complex>(30), 1.0, 30};
    CHECK_THROWS_AS(exhaustive_mlse(big, SparseCir{}, Alphabet::bpsk()), std::length_error);
}

TEST_CASE("BCJR equals brute-force marginalization") {
    Rng rng(derive_seed({48}));
    const auto a = Alphabet::bpsk();
    const std::vector<Complex> pts{a.points().begin(), a.points().end()};
    for (int t = 0; t < 100; ++t) {
        const std::size_t mem = 1 + t % 3;
        const double s2 = 0.3 + 0.4 * (t % 4);
        auto inst = random_instance(rng, a, 8, mem, s2, t % 2 ? mem : 0);
        const auto steps = std::min(inst.y.samples.size(), std::size_t{8} + mem);
        const auto ref = oracle::brute_posteriors(inst.y.samples, steps, inst.cir.dense(), pts, 8, s2);
        const auto post = bcjr_map(inst.y, inst.cir, s2, a);
        for (std::size_t k = 0; k < 8; ++k)
            for (std::size_t u = 0; u < 2; ++u) {
                const double r = ref[k][u];
                CHECK(std::abs(post(k, u) - r) <= 1e-9 * std::max(r, 1e-300) + 1e-300);
            }
    }
}

TEST_CASE("BCJR with priors equals weighted brute force") {
    Rng rng(derive_seed({49}));
    const auto a = Alphabet::bpsk();
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int t = 0; t < 20; ++t) {
        auto inst = random_instance(rng, a, 7, 2, 0.8, 2);
        std::vector<double> pr(14);
        for (std::size_t k = 0; k < 7; ++k) {
            pr[2 * k] = u(rng);
            pr[2 * k + 1] = 1 - pr[2 * k];
        }
        const PosteriorSequence priors(7, 2, pr);
        const auto post = bcjr_map(inst.y, inst.cir, 0.8, a, priors);
        // brute force with prior weights
        std::vector<std::vector<double>> p(7, std::vector<double>(2, 0.0));
        double total = 0;
        oracle::for_each_sequence(7, 2, [&](const std::vector<std::uint32_t>& idx) {
            std::vector<Complex> x(7);
            double w = 1;
            for (std::size_t i = 0; i < 7; ++i) {
                x[i] = a[idx[i]];
                w *= pr[2 * i + idx[i]];
            }
            w *= std::exp(-oracle::metric(inst.y.samples, 9, inst.cir.dense(), x) / 0.8);
            total += w;
            for (std::size_t i = 0; i < 7; ++i) p[i][idx[i]] += w;
        });
        for (std::size_t k = 0; k < 7; ++k) CHECK(post(k, 0) == doctest::Approx(p[k][0] / total).epsilon(1e-9));
    }
}

TEST_CASE("BCJR posteriors are normalized") {
    Rng rng(derive_seed({50}));
    for (int t = 0; t < 30; ++t) {
        const auto& a = t % 2 ? Alphabet::qpsk() : Alphabet::bpsk();
        auto inst = random_instance(rng, t % 2 ? Alphabet::qpsk() : Alphabet::bpsk(), 300, 1 + t % 5, 0.5, 1 + t % 5);
        const auto post = bcjr_map(inst.y, inst.cir, 0.5, a);
        for (std::size_t k = 0; k < post.length(); ++k) {
            double s = 0;
            for (auto v : post.row(k)) s += v;
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("BCJR on a memoryless channel") {
    const auto a = Alphabet::bpsk();
    ReceivedSignal y{{0.3, -1.2, {0.1, 0.5}}, 0.7, 3};
    const auto post = bcjr_map(y, SparseCir{}, 0.7, a);
    for (std::size_t k = 0; k < 3; ++k) {
        const double w0 = std::exp(-std::norm(y.samples[k] - a[0]) / 0.7);
        const double w1 = std::exp(-std::norm(y.samples[k] - a[1]) / 0.7);
        CHECK(post(k, 0) == doctest::Approx(w0 / (w0 + w1)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(bcjr_map(y, SparseCir{}, 0.0, a), std::invalid_argument);
}

TEST_CASE("BCJR agrees with Viterbi at high SNR") {
    Rng rng(derive_seed({51}));
    int disagree = 0;
    for (int t = 0; t < 100; ++t) {
        auto inst = random_instance(rng, Alphabet::bpsk(), 50, 1 + t % 4, 1e-4, 1 + t % 4);
        const auto map = bcjr_map(inst.y, inst.cir, 1e-4, Alphabet::bpsk()).hard_decisions(Alphabet::bpsk());
        disagree += map == viterbi_mlse(inst.y, inst.cir, Alphabet::bpsk()).symbols ? 0 : 1;
    }
    if (disagree > 0) MESSAGE(disagree << " of 100 high-SNR blocks differ between MAP and MLSE");
    CHECK(disagree <= 2);
}

TEST_CASE("posterior of the true symbol grows as the noise shrinks") {
    Rng rng(derive_seed({52}));
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    const std::vector<double> sigmas{1.5, 1.0, 0.7, 0.5, 0.3, 0.2, 0.1};
    std::vector<double> mean(sigmas.size(), 0.0);
    const int blocks = 200;
    for (int t = 0; t < blocks; ++t) {
        auto inst = random_instance(rng, Alphabet::bpsk(), 40, 1 + t % 4, 0.0, 1 + t % 4);
        std::vector<Complex> w(inst.y.samples.size());
        for (auto& v : w) v = {g(rng), g(rng)};
        for (std::size_t i = 0; i < sigmas.size(); ++i) {
            ReceivedSignal y = inst.y;
            for (std::size_t k = 0; k < w.size(); ++k) y.samples[k] += sigmas[i] * w[k];
            const auto post = bcjr_map(y, inst.cir, sigmas[i] * sigmas[i], Alphabet::bpsk());
            double s = 0;
            for (std::size_t k = 0; k < 40; ++k) s += post(k, inst.x.indices()[k]);
            mean[i] += s / 40 / blocks;
        }
    }
    for (std::size_t i = 1; i < sigmas.size(); ++i) CHECK(mean[i] >= mean[i - 1]);
}

TEST_CASE("Viterbi runtime follows M^(L+1) N") {
    Rng rng(derive_seed({53}));
    std::vector<double> secs;
    for (std::size_t mem : {2, 4, 6, 8}) {
        auto inst = random_instance(rng, Alphabet::bpsk(), 20000, mem, 0.5, mem);
        std::vector<SymbolIndex> idx(20000);
        double best = INFINITY;
        for (int rep = 0; rep < 3; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            auto va = viterbi_mlse(inst.y, inst.cir, Alphabet::bpsk());
            const auto t1 = std::chrono::steady_clock::now();
            CHECK(va.branch_evaluations == 20000 * branch_metric_count(mem, 2) + mem * (std::uint64_t{1} << mem));
            best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
        }
        secs.push_back(best);
    }
    MESSAGE("seconds for L=2,4,6,8: " << secs[0] << " " << secs[1] << " " << secs[2] << " " << secs[3]);
    // 4x more branches per step of 2; allow for fixed overhead at small L.
    CHECK(secs[3] / secs[2] > 2.0);
    CHECK(secs[3] / secs[2] < 8.0);
    CHECK(secs[3] / secs[1] > 6.0);
}
