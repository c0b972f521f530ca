// Command-line front end: minphase, designwmf, analyze, equalize, mfb,
// simulate and ber. Data goes to stdout (or --out), diagnostics to stderr.
// Exit status 2 means a bad invocation or input document, 1 a runtime
// failure.

#include "sparse_isi/analysis.hpp"
#include "sparse_isi/channel.hpp"
#include "sparse_isi/io.hpp"
#include "sparse_isi/prefilter.hpp"
#include "sparse_isi/seeding.hpp"
#include "sparse_isi/sim_harness.hpp"
#include "sparse_isi/sparse_equalizers.hpp"
#include "sparse_isi/trellis.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sparse_isi;

namespace {

// "a:step:b" or a comma separated list.
std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        double a = 0, step = 0, b = 0;
        char c1 = 0, c2 = 0;
        std::istringstream ss(text);
        if (!(ss >> a >> c1 >> step >> c2 >> b) || c1 != ':' || c2 != ':' || !(step > 0) || b < a)
            throw ConfigError("bad grid '" + text + "', expected start:step:stop");
        const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < n; ++i) out.push_back(a + step * static_cast<double>(i));
        return out;
    }
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("bad grid value '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty grid");
    return out;
}

SparseCir load_static(const std::string& path) {
    auto ch = channel_from_json(read_json_file(path));
    if (auto* cir = std::get_if<SparseCir>(&ch)) return *cir;
    throw ConfigError(path + ": expected a static channel (coeffs/gaps), got a power profile");
}

Alphabet alphabet_for(std::size_t m) {
    if (m == 2) return Alphabet::bpsk();
    if (m == 4) return Alphabet::qpsk();
    throw ConfigError("alphabet size must be 2 or 4");
}

void write_manifest(const std::string& path, const Json& body) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << body.dump(2) << '\n';
}

struct Common {
    std::string manifest;
};

int run_minphase(const std::string& channel_path, const Common& common) {
    const auto cir = load_static(channel_path);
    const auto r = minimum_phase(cir);
    std::printf("kind,index,re,im,magnitude\n");
    for (std::size_t i = 0; i < r.original_zeros.size(); ++i) {
        const auto z = r.original_zeros[i];
        std::printf("zero,%zu,%.10f,%.10f,%.10f\n", i, z.real(), z.imag(), std::abs(z));
    }
    for (std::size_t i = 0; i < r.zeros.size(); ++i) {
        const auto z = r.zeros[i];
        std::printf("minzero,%zu,%.10f,%.10f,%.10f\n", i, z.real(), z.imag(), std::abs(z));
    }
    for (std::size_t i = 0; i < r.coeffs.size(); ++i) {
        const auto c = r.coeffs[i];
        std::printf("hmin,%zu,%.10f,%.10f,%.10f\n", i, c.real(), c.imag(), std::abs(c));
    }
    std::fprintf(stderr, "reflected %zu of %zu zeros; WMF whiteness %.4f\n", r.reflected_count, r.zeros.size(),
                 r.whiteness);
    write_manifest(common.manifest, {{"subcommand", "minphase"},
                                     {"channel", to_json(cir)},
                                     {"hmin", complex_array_to_json(r.coeffs)},
                                     {"reflected", r.reflected_count}});
    return 0;
}

int run_designwmf(const std::string& channel_path, std::size_t length, std::optional<std::size_t> delay,
                  const Common& common) {
    const auto cir = load_static(channel_path);
    const auto fir = design_wmf(cir, length, delay);
    std::cout << to_json(fir).dump() << '\n';
    std::fprintf(stderr, "length %zu, decision delay %zu, fit error %.3e, whiteness %.4f\n", fir.coeffs.size(),
                 fir.delay, fir.fit_error, whiteness_metric(fir));
    write_manifest(common.manifest, {{"subcommand", "designwmf"},
                                     {"channel", to_json(cir)},
                                     {"length", length},
                                     {"delay", fir.delay},
                                     {"fit_error", fir.fit_error}});
    return 0;
}

int run_analyze(const std::string& channel_path, std::int64_t k0, std::size_t horizon, std::size_t m,
                const Common& common) {
    const auto cir = load_static(channel_path);
    const auto zp = detect_zero_pad(cir);
    const auto dec = decompose(cir);
    const auto inf = influence_set(cir, k0, horizon);

    Json j;
    j["channel"] = to_json(cir);
    j["memory"] = cir.memory();
    j["delays"] = cir.delays();
    j["delay_gcd"] = delay_gcd(cir);
    j["decomposable"] = dec.decomposable();
    j["subtrellis_count"] = dec.subtrellis_count;
    j["subtrellis_memory"] = dec.subtrellis_memory;
    j["subtrellis_states"] = dec.subtrellis_states(m);
    if (zp) {
        j["zero_pad"] = {{"spacing", zp->spacing}, {"base_length", zp->base_length}};
        j["ddfse_k"] = choose_k(zp->spacing, zp->base_length, m);
    } else {
        j["zero_pad"] = nullptr;
        j["ddfse_k"] = nullptr;
    }
    j["influence_set"] = {{"origin", inf.origin}, {"horizon", inf.horizon}, {"members", inf.members}};
    j["complexity"] = to_json(complexity_report(cir, m));
    std::cout << j.dump(2) << '\n';
    write_manifest(common.manifest, {{"subcommand", "analyze"}, {"report", j}});
    return 0;
}

int run_equalize(const std::string& channel_path, const std::string& signal_path, const std::string& algo,
                 std::optional<std::size_t> k, std::optional<std::size_t> prefilter, std::size_t m,
                 const Common& common) {
    const auto cir = load_static(channel_path);
    auto y = signal_from_json(read_json_file(signal_path));
    const auto alphabet = alphabet_for(m);
    const auto kind = equalizer_kind_from(algo);

    SparseCir model = cir;
    if (prefilter) {
        if (kind == EqualizerKind::Pva) throw ConfigError("pva cannot follow a prefilter");
        const auto fir = design_wmf(cir, *prefilter);
        y = apply_filter(y, fir);
        model = cascade_cir(fir, cir);
    }

    std::vector<std::uint8_t> bits;
    std::optional<double> metric;
    switch (kind) {
    case EqualizerKind::Va: {
        auto est = viterbi_mlse(y, model, alphabet);
        metric = est.metric;
        bits = unmap_symbols(est.symbols);
        break;
    }
    case EqualizerKind::Pva: {
        auto est = pva_mlse(y, model, alphabet);
        metric = est.metric;
        bits = unmap_symbols(est.symbols);
        break;
    }
    case EqualizerKind::Bcjr: {
        if (!(y.noise_variance > 0)) throw ConfigError("bcjr needs a positive noise_variance in the signal file");
        auto post = bcjr_map(y, model, y.noise_variance, alphabet);
        bits = unmap_symbols(post.hard_decisions(alphabet));
        break;
    }
    case EqualizerKind::Ddfse: {
        if (!k) throw ConfigError("ddfse needs --K");
        auto est = ddfse(y, model, *k, alphabet);
        metric = est.metric;
        bits = unmap_symbols(est.symbols);
        break;
    }
    }

    std::string line(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i) line[i] = bits[i] ? '1' : '0';
    std::cout << line << '\n';
    if (metric) std::fprintf(stderr, "%s: %zu symbols, path metric %.6g\n", algo.c_str(), y.data_length, *metric);

    Json man = {{"subcommand", "equalize"}, {"algo", algo}, {"channel", to_json(cir)}, {"symbols", y.data_length}};
    if (k) man["K"] = *k;
    if (prefilter) man["prefilter_length"] = *prefilter;
    write_manifest(common.manifest, man);
    return 0;
}

int run_simulate(const std::string& channel_path, std::size_t length, double ebn0, std::uint64_t seed,
                 std::size_t m, const std::string& bits_out, const Common& common) {
    const auto cir = load_static(channel_path);
    const auto alphabet = alphabet_for(m);
    const auto bps = alphabet.bits_per_symbol();
    Rng rng(derive_seed({seed, 0}));
    std::vector<std::uint8_t> bits(length * bps);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1U);
    const auto x = map_bits(bits, alphabet);
    const double sigma2 = noise_variance_for(ebn0) / static_cast<double>(bps);
    const auto y = simulate_channel(x, cir, sigma2, derive_seed({seed, 2}), cir.memory());
    std::cout << to_json(y).dump() << '\n';
    if (!bits_out.empty()) {
        std::ofstream out(bits_out);
        if (!out) throw std::runtime_error("cannot write " + bits_out);
        for (auto b : bits) out << (b ? '1' : '0');
        out << '\n';
    }
    write_manifest(common.manifest, {{"subcommand", "simulate"},
                                     {"channel", to_json(cir)},
                                     {"symbols", length},
                                     {"ebn0_db", ebn0},
                                     {"seed", seed}});
    return 0;
}

int run_mfb(std::optional<double> energy, const std::string& profile_path, const std::string& grid_text,
            std::size_t draws, std::uint64_t seed, const Common& common) {
    const auto grid = parse_grid(grid_text);
    MfbCurve curve;
    Json man = {{"subcommand", "mfb"}, {"ebn0_db", grid}};
    if (!profile_path.empty()) {
        const auto ch = channel_from_json(read_json_file(profile_path));
        PowerProfile profile = std::holds_alternative<PowerProfile>(ch)
                                   ? std::get<PowerProfile>(ch)
                                   : throw ConfigError(profile_path + ": expected a power profile");
        if (draws < 10'000) throw ConfigError("--draws must be at least 10000");
        curve = mfb_fading_curve(profile, grid, draws, seed);
        man["profile"] = to_json(profile);
        man["draws"] = draws;
        man["seed"] = seed;
    } else {
        const double e = energy.value_or(1.0);
        if (!(e > 0)) throw ConfigError("--energy must be positive");
        curve = mfb_static_curve(grid, e);
        man["energy"] = e;
    }
    std::printf("ebn0_db,ber,stderr\n");
    for (const auto& p : curve.points) std::printf("%.4f,%.9e,%.9e\n", p.ebn0_db, p.ber, p.standard_error);
    write_manifest(common.manifest, man);
    return 0;
}

struct BerArgs {
    std::string config_path;
    std::string preset_name;
    std::string out_dir;
    std::size_t threads = 1;
    std::optional<std::uint64_t> seed;
    std::string grid;
    std::optional<std::uint64_t> max_bits;
    std::optional<std::uint64_t> min_errors;
};

int run_ber(const BerArgs& a) {
    ExperimentConfig cfg;
    if (!a.config_path.empty() == !a.preset_name.empty()) throw ConfigError("give exactly one of --config, --preset");
    if (!a.config_path.empty()) {
        cfg = config_from_json(read_json_file(a.config_path));
    } else {
        try {
            cfg = preset(a.preset_name);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    if (a.seed) cfg.seed = *a.seed;
    if (!a.grid.empty()) cfg.ebn0_db = parse_grid(a.grid);
    if (a.max_bits) cfg.stop.max_bits = *a.max_bits;
    if (a.min_errors) cfg.stop.min_errors = *a.min_errors;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (a.threads == 0) throw ConfigError("--threads must be at least 1");

    const RunOptions opts{a.threads};
    std::fprintf(stderr, "%s: %zu grid points, seed %llu, %zu thread(s)\n", cfg.name.c_str(), cfg.ebn0_db.size(),
                 static_cast<unsigned long long>(cfg.seed), a.threads);
    const auto records = run_experiment(cfg, opts);

    fs::create_directories(a.out_dir);
    {
        std::ofstream csv(fs::path(a.out_dir) / "ber.csv");
        if (!csv) throw std::runtime_error("cannot write " + (fs::path(a.out_dir) / "ber.csv").string());
        write_records_csv(csv, records);
    }
    write_manifest((fs::path(a.out_dir) / "manifest.json").string(), run_manifest(cfg, opts, records));
    for (const auto& r : records)
        std::fprintf(stderr, "  %6.2f dB  %llu/%llu  BER %.3e  (%.1f s)\n", r.ebn0_db,
                     static_cast<unsigned long long>(r.errors), static_cast<unsigned long long>(r.bits), r.ber,
                     r.seconds);
    return 0;
}

std::string preset_help() {
    std::string s = "Presets (ber --preset NAME):\n";
    for (const auto& n : preset_names()) s += "  " + n + "  " + preset_summary(n) + "\n";
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trellis equalization of sparse ISI channels"};
    app.require_subcommand(1);
    app.footer(preset_help());

    Common common;
    auto add_manifest = [&](CLI::App* sc) {
        sc->add_option("--manifest", common.manifest, "Write a JSON manifest of the resolved invocation");
    };

    std::string channel_path, signal_path, profile_path, algo, grid = "0:1:10", bits_out;
    std::size_t length = 0, horizon = kDefaultHorizon, alphabet_size = 2, draws = 100'000;
    std::optional<std::size_t> delay, k, prefilter;
    std::optional<double> energy;
    std::int64_t k0 = 0;
    double ebn0 = 10.0;
    std::uint64_t seed = 1;

    auto* mp = app.add_subcommand("minphase", "Zeros and minimum-phase equivalent of a channel (CSV)");
    mp->add_option("--channel", channel_path, "Channel JSON")->required()->check(CLI::ExistingFile);
    add_manifest(mp);

    auto* dw = app.add_subcommand("designwmf", "Least-squares whitened matched filter taps (JSON)");
    dw->add_option("--channel", channel_path, "Channel JSON")->required()->check(CLI::ExistingFile);
    dw->add_option("--length", length, "Filter length L_F")->required();
    dw->add_option("--delay", delay, "Decision delay (default ceil(L_F / 2))");
    add_manifest(dw);

    auto* an = app.add_subcommand("analyze", "Zero-pad structure, decomposition, influence set, complexity (JSON)");
    an->add_option("--channel", channel_path, "Channel JSON")->required()->check(CLI::ExistingFile);
    an->add_option("--k0", k0, "Origin of the influence set");
    an->add_option("--horizon", horizon, "Influence window D (in multiples of L)");
    an->add_option("--alphabet", alphabet_size, "Alphabet size M")->check(CLI::IsMember({2, 4}));
    add_manifest(an);

    auto* eq = app.add_subcommand("equalize", "Equalize a received block; prints decided bits");
    eq->add_option("--channel", channel_path, "Channel JSON")->required()->check(CLI::ExistingFile);
    eq->add_option("--signal", signal_path, "Received signal JSON")->required()->check(CLI::ExistingFile);
    eq->add_option("--algo", algo, "va, pva, bcjr or ddfse")
        ->required()
        ->check(CLI::IsMember({"va", "pva", "bcjr", "ddfse"}));
    eq->add_option("--K", k, "DDFSE trellis memory");
    eq->add_option("--prefilter", prefilter, "Apply a WMF of this length first");
    eq->add_option("--alphabet", alphabet_size, "Alphabet size M")->check(CLI::IsMember({2, 4}));
    add_manifest(eq);

    auto* sim = app.add_subcommand("simulate", "Transmit random bits over a channel; prints the signal JSON");
    sim->add_option("--channel", channel_path, "Channel JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--length", length, "Number of symbols")->required();
    sim->add_option("--ebn0", ebn0, "Eb/N0 in dB");
    sim->add_option("--seed", seed, "Seed");
    sim->add_option("--alphabet", alphabet_size, "Alphabet size M")->check(CLI::IsMember({2, 4}));
    sim->add_option("--bits-out", bits_out, "Write the transmitted bits here");
    add_manifest(sim);

    auto* mf = app.add_subcommand("mfb", "Matched-filter bound curve (CSV ebn0_db,ber,stderr)");
    auto* e_opt = mf->add_option("--energy", energy, "Static channel energy ||h||^2 (default 1)");
    mf->add_option("--profile", profile_path, "Power-profile JSON for the fading bound")
        ->check(CLI::ExistingFile)
        ->excludes(e_opt);
    mf->add_option("--grid", grid, "Eb/N0 grid, start:step:stop or a,b,c");
    mf->add_option("--draws", draws, "Fading draws (>= 10000)");
    mf->add_option("--seed", seed, "Seed for the fading draws");
    add_manifest(mf);

    BerArgs ber;
    auto* br = app.add_subcommand("ber", "Monte-Carlo BER sweep; writes ber.csv and manifest.json");
    auto* cfg_opt = br->add_option("--config", ber.config_path, "Experiment JSON")->check(CLI::ExistingFile);
    br->add_option("--preset", ber.preset_name, "Built-in experiment name")->excludes(cfg_opt);
    br->add_option("--out", ber.out_dir, "Output directory")->required();
    br->add_option("--threads", ber.threads, "Worker threads");
    br->add_option("--seed", ber.seed, "Override the master seed");
    br->add_option("--grid", ber.grid, "Override the Eb/N0 grid");
    br->add_option("--max-bits", ber.max_bits, "Override the bit budget per grid point");
    br->add_option("--min-errors", ber.min_errors, "Override the error target per grid point");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*mp) return run_minphase(channel_path, common);
        if (*dw) return run_designwmf(channel_path, length, delay, common);
        if (*an) return run_analyze(channel_path, k0, horizon, alphabet_size, common);
        if (*eq) return run_equalize(channel_path, signal_path, algo, k, prefilter, alphabet_size, common);
        if (*sim) return run_simulate(channel_path, length, ebn0, seed, alphabet_size, bits_out, common);
        if (*mf) return run_mfb(energy, profile_path, grid, draws, seed, common);
        if (*br) return run_ber(ber);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
