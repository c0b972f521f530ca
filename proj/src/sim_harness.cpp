#include "sparse_isi/sim_harness.hpp"

#include "sparse_isi/io.hpp"
#include "sparse_isi/prefilter.hpp"
#include "sparse_isi/seeding.hpp"
#include "sparse_isi/sparse_equalizers.hpp"
#include "sparse_isi/trellis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace sparse_isi {

std::string_view to_string(EqualizerKind kind) {
    switch (kind) {
    case EqualizerKind::Va: return "va";
    case EqualizerKind::Pva: return "pva";
    case EqualizerKind::Bcjr: return "bcjr";
    case EqualizerKind::Ddfse: return "ddfse";
    }
    return "?";
}

EqualizerKind equalizer_kind_from(std::string_view name) {
    if (name == "va") return EqualizerKind::Va;
    if (name == "pva") return EqualizerKind::Pva;
    if (name == "bcjr") return EqualizerKind::Bcjr;
    if (name == "ddfse") return EqualizerKind::Ddfse;
    throw std::invalid_argument("unknown equalizer '" + std::string(name) + "' (expected va, pva, bcjr or ddfse)");
}

namespace {

// Tap delays with nonzero power, as seen by the equalizer before filtering.
std::vector<std::size_t> support(const ChannelSpec& ch) {
    if (const auto* cir = std::get_if<SparseCir>(&ch)) return cir->delays();
    std::vector<std::size_t> d;
    for (const auto& e : std::get<PowerProfile>(ch).entries())
        if (e.variance > 0.0) d.push_back(e.delay);
    return d;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (ebn0_db.empty()) throw std::invalid_argument("Eb/N0 grid is empty");
    for (std::size_t i = 1; i < ebn0_db.size(); ++i)
        if (!(ebn0_db[i] > ebn0_db[i - 1])) throw std::invalid_argument("Eb/N0 grid must be strictly increasing");
    if (stop.min_errors < 100 && !stop.allow_few_errors)
        throw std::invalid_argument("stopping rule needs at least 100 errors (set allow_few_errors to override)");
    if (stop.max_bits == 0) throw std::invalid_argument("max_bits must be positive");
    if (alphabet_size != 2 && alphabet_size != 4) throw std::invalid_argument("alphabet size must be 2 or 4");

    const auto delays = support(channel);
    const std::size_t mem = delays.back();
    if (block_length <= mem) throw std::invalid_argument("block length must exceed the channel memory");
    if (const auto* p = std::get_if<PowerProfile>(&channel); p && p->entries().front().variance <= 0.0)
        throw std::invalid_argument("leading profile tap must have positive variance");

    if (equalizer.prefilter && equalizer.prefilter->length < 2 * (mem + 1))
        throw std::invalid_argument("prefilter length below 2(L+1)");
    switch (equalizer.kind) {
    case EqualizerKind::Va:
    case EqualizerKind::Bcjr:
        if (std::pow(static_cast<double>(alphabet_size), static_cast<double>(mem)) > static_cast<double>(kMaxTrellisSize))
            throw std::invalid_argument("full-state trellis too large for this channel memory");
        break;
    case EqualizerKind::Pva: {
        if (equalizer.prefilter) throw std::invalid_argument("P-VA cannot follow a prefilter (it destroys the zero-pad grid)");
        std::size_t g = 0;
        for (auto d : delays) g = std::gcd(g, d);
        if (g < 2) throw std::invalid_argument("P-VA needs a zero-pad channel (tap delay gcd >= 2)");
        break;
    }
    case EqualizerKind::Ddfse:
        if (equalizer.trellis_memory > mem) throw std::invalid_argument("DDFSE K exceeds the channel memory");
        break;
    }
}

namespace {

struct BlockResult {
    std::uint64_t bits = 0;
    std::uint64_t errors = 0;
};

class BlockSimulator {
public:
    explicit BlockSimulator(const ExperimentConfig& cfg)
        : cfg_(cfg), alphabet_(cfg.alphabet_size == 4 ? Alphabet::qpsk() : Alphabet::bpsk()) {
        if (const auto* cir = std::get_if<SparseCir>(&cfg.channel)) {
            static_cir_ = cfg.normalize_channel ? cir->normalized() : *cir;
            // Static channel: the filter is designed once.
            if (cfg.equalizer.prefilter) {
                static_fir_ = design_wmf(*static_cir_, cfg.equalizer.prefilter->length, cfg.equalizer.prefilter->delay);
                static_model_ = cascade_cir(*static_fir_, *static_cir_);
            } else {
                static_model_ = static_cir_;
            }
        }
    }

    const Alphabet& alphabet() const { return alphabet_; }

    BlockResult run(std::size_t grid_index, std::uint64_t block_index, double noise_variance) const {
        const std::uint64_t seed = derive_seed({cfg_.seed, grid_index, block_index});
        const std::size_t bps = alphabet_.bits_per_symbol();
        const std::size_t n = cfg_.block_length;

        Rng rng(derive_seed({seed, 0}));
        std::vector<std::uint8_t> bits(n * bps);
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
        const auto x = map_bits(bits, alphabet_);

        SparseCir cir = static_cir_ ? *static_cir_
                                    : draw_fading_cir(std::get<PowerProfile>(cfg_.channel), derive_seed({seed, 1}));
        auto y = simulate_channel(x, cir, noise_variance, derive_seed({seed, 2}), cir.memory());

        SparseCir model = cir;
        if (cfg_.equalizer.prefilter) {
            if (static_fir_) {
                y = apply_filter(y, *static_fir_);
                model = *static_model_;
            } else {
                // Fading: the filter follows the current channel draw.
                const auto fir = design_wmf(cir, cfg_.equalizer.prefilter->length, cfg_.equalizer.prefilter->delay);
                y = apply_filter(y, fir);
                model = cascade_cir(fir, cir);
            }
        }

        SymbolSequence decided(alphabet_, {});
        switch (cfg_.equalizer.kind) {
        case EqualizerKind::Va: decided = viterbi_mlse(y, model, alphabet_).symbols; break;
        case EqualizerKind::Pva: decided = pva_mlse(y, model, alphabet_).symbols; break;
        case EqualizerKind::Bcjr:
            decided = bcjr_map(y, model, y.noise_variance, alphabet_).hard_decisions(alphabet_);
            break;
        case EqualizerKind::Ddfse:
            decided = ddfse(y, model, std::min(cfg_.equalizer.trellis_memory, model.memory()), alphabet_).symbols;
            break;
        }
        const auto out = unmap_symbols(decided);
        BlockResult r;
        r.bits = bits.size();
        for (std::size_t i = 0; i < bits.size(); ++i) r.errors += bits[i] != out[i];
        return r;
    }

private:
    const ExperimentConfig& cfg_;
    Alphabet alphabet_;
    std::optional<SparseCir> static_cir_;
    std::optional<PrefilterFir> static_fir_;
    std::optional<SparseCir> static_model_;
};

std::vector<BlockResult> run_batch(const BlockSimulator& sim, std::size_t grid_index, std::uint64_t first,
                                   std::size_t count, double noise_variance, std::size_t threads) {
    std::vector<BlockResult> out(count);
    if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = sim.run(grid_index, first + i, noise_variance);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < std::min(threads, count); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    out[i] = sim.run(grid_index, first + i, noise_variance);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

}  // namespace

std::vector<BerRecord> run_experiment(const ExperimentConfig& config, const RunOptions& options) {
    config.validate();
    const BlockSimulator sim(config);
    const std::uint64_t hash = config_hash(config);
    const std::size_t threads = std::max<std::size_t>(1, options.threads);
    const std::size_t batch = threads == 1 ? 1 : 4 * threads;
    const double bps = static_cast<double>(sim.alphabet().bits_per_symbol());

    std::vector<BerRecord> records;
    for (std::size_t gi = 0; gi < config.ebn0_db.size(); ++gi) {
        const auto t0 = std::chrono::steady_clock::now();
        // Unit-energy symbols: Es/N0 = log2(M) Eb/N0.
        const double noise_variance = noise_variance_for(config.ebn0_db[gi]) / bps;
        BerRecord rec;
        rec.ebn0_db = config.ebn0_db[gi];
        rec.config_hash = hash;
        rec.seed = config.seed;
        std::uint64_t block = 0;
        bool done = false;
        while (!done) {
            const auto results = run_batch(sim, gi, block, batch, noise_variance, threads);
            for (const auto& r : results) {
                rec.bits += r.bits;
                rec.errors += r.errors;
                ++block;
                if (rec.errors >= config.stop.min_errors || rec.bits >= config.stop.max_bits) {
                    done = true;
                    break;
                }
            }
        }
        rec.ber = static_cast<double>(rec.errors) / static_cast<double>(rec.bits);
        rec.standard_error = std::sqrt(rec.ber * (1.0 - rec.ber) / static_cast<double>(rec.bits));
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        records.push_back(rec);
    }
    return records;
}

MfbCurve to_curve(std::span<const BerRecord> records) {
    MfbCurve c;
    for (const auto& r : records) c.points.push_back({r.ebn0_db, r.ber, r.standard_error});
    return c;
}

double gap_at_ber(const MfbCurve& curve, const MfbCurve& reference, double target_ber) {
    return ebn0_at_ber(curve, target_ber) - ebn0_at_ber(reference, target_ber);
}

double gap_at_ber(std::span<const BerRecord> records, const MfbCurve& reference, double target_ber) {
    return gap_at_ber(to_curve(records), reference, target_ber);
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    auto j = to_json(config);
    j.erase("seed");
    const auto text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// --- Presets -------------------------------------------------------------------

namespace {

std::vector<double> grid(double lo, double hi, double step) {
    std::vector<double> g;
    for (int i = 0;; ++i) {
        const double x = lo + step * i;
        if (x > hi + 1e-9) break;
        g.push_back(x);
    }
    return g;
}

PowerProfile fading_profile(std::size_t memory) {
    // sigma_0^2, f zeros, sigma_1^2, 0 0 0, sigma_2^2, sigma_3^2 with L = f + 6
    const std::size_t f = memory - 6;
    return PowerProfile::from_entries({{0, 0.25}, {f + 1, 0.25}, {f + 5, 0.25}, {f + 6, 0.25}});
}

SparseCir static_sparse_channel() {
    const std::vector<Complex> c{0.87, 0.29, 0.29, 0.29};
    const std::vector<std::int64_t> gaps{3, 2, 7};
    return make_sparse_cir(c, gaps);
}

ExperimentConfig fading_preset(std::string name, std::size_t memory, EqualizerSpec eq, std::string note) {
    ExperimentConfig c;
    c.name = std::move(name);
    c.note = std::move(note);
    c.channel = fading_profile(memory);
    c.equalizer = eq;
    c.ebn0_db = grid(0.0, 20.0, 2.0);
    return c;
}

const std::map<std::string, ExperimentConfig, std::less<>>& presets() {
    static const auto table = [] {
        std::map<std::string, ExperimentConfig, std::less<>> t;
        ExperimentConfig fig3;
        fig3.name = "fig3";
        fig3.note =
            "Static sparse channel, delays 0,4,7,15, coeffs 0.87,0.29,0.29,0.29 (unit energy). DDFSE K=4 after a "
            "40-tap WMF; K=4 matches the state budget of the sub-parallel-trellis reference receiver.";
        fig3.channel = static_sparse_channel();
        fig3.equalizer = {EqualizerKind::Ddfse, 4, PrefilterSpec{40, std::nullopt}};
        fig3.ebn0_db = grid(0.0, 10.0, 1.0);
        t.emplace("fig3", fig3);

        auto fig3k3 = fig3;
        fig3k3.name = "fig3-K3";
        fig3k3.note = "As fig3 with the DDFSE state count reduced to 2^3.";
        fig3k3.equalizer.trellis_memory = 3;
        t.emplace("fig3-K3", fig3k3);

        const std::string rule = "K=5 at every memory length.";
        t.emplace("fig4-L6", fading_preset("fig4-L6", 6, {EqualizerKind::Ddfse, 5, PrefilterSpec{20, std::nullopt}},
                                           "Block Rayleigh fading, equal variances 0.25 at delays 0,1,5,6. DDFSE + "
                                           "20-tap WMF. " + rule));
        t.emplace("fig4-L12", fading_preset("fig4-L12", 12, {EqualizerKind::Ddfse, 5, PrefilterSpec{36, std::nullopt}},
                                            "Block Rayleigh fading, equal variances 0.25 at delays 0,7,11,12. DDFSE + "
                                            "36-tap WMF. " + rule));
        t.emplace("fig4-L20", fading_preset("fig4-L20", 20, {EqualizerKind::Ddfse, 5, PrefilterSpec{60, std::nullopt}},
                                            "Block Rayleigh fading, equal variances 0.25 at delays 0,15,19,20. DDFSE "
                                            "+ 60-tap WMF. " + rule));
        t.emplace("fig4-L6-mlse", fading_preset("fig4-L6-mlse", 6, {EqualizerKind::Va, 0, std::nullopt},
                                                "Full-state Viterbi MLSE reference for the L=6 fading channel."));
        t.emplace("fig4-L12-nowmf", fading_preset("fig4-L12-nowmf", 12, {EqualizerKind::Ddfse, 5, std::nullopt},
                                                  "DDFSE K=5 on the L=12 fading channel without prefiltering."));
        return t;
    }();
    return table;
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [k, v] : presets()) names.push_back(k);
    return names;
}

ExperimentConfig preset(std::string_view name) {
    const auto& t = presets();
    const auto it = t.find(name);
    if (it == t.end()) throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
    return it->second;
}

std::string preset_summary(std::string_view name) { return preset(name).note; }

}  // namespace sparse_isi
