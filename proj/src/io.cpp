#include "sparse_isi/io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace sparse_isi {

namespace {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

// Wraps parse/type errors from the JSON library into ConfigError.
template <typename F>
auto guarded(const char* what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

Json complex_to_json(Complex c) { return Json::array({c.real(), c.imag()}); }

Complex complex_from_json(const Json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw ConfigError("complex value must be a number or a [re, im] pair");
}

Json complex_array_to_json(std::span<const Complex> v) {
    Json a = Json::array();
    for (const auto& c : v) a.push_back(complex_to_json(c));
    return a;
}

std::vector<Complex> complex_array_from_json(const Json& j) {
    if (!j.is_array()) throw ConfigError("expected an array of complex values");
    std::vector<Complex> v;
    v.reserve(j.size());
    for (const auto& e : j) v.push_back(complex_from_json(e));
    return v;
}

Json to_json(const SparseCir& cir) {
    Json gaps = Json::array();
    for (auto g : cir.gaps()) gaps.push_back(g);
    return {{"coeffs", complex_array_to_json(cir.coeffs())}, {"gaps", gaps}};
}

SparseCir cir_from_json(const Json& j) {
    return guarded("channel", [&] {
        if (!j.contains("coeffs")) throw ConfigError("channel: missing 'coeffs'");
        const auto coeffs = complex_array_from_json(j.at("coeffs"));
        const auto gaps = j.contains("gaps") ? j.at("gaps").get<std::vector<std::int64_t>>() : std::vector<std::int64_t>{};
        return make_sparse_cir(coeffs, gaps);
    });
}

Json to_json(const PowerProfile& profile) {
    Json p = Json::array();
    for (const auto& e : profile.entries()) p.push_back({{"delay", e.delay}, {"variance", e.variance}});
    return {{"profile", p}, {"total", profile.total_variance()}};
}

PowerProfile profile_from_json(const Json& j) {
    return guarded("profile", [&] {
        std::vector<ProfileEntry> entries;
        for (const auto& e : j.at("profile")) {
            const auto delay = e.at("delay").get<std::int64_t>();
            if (delay < 0) throw ConfigError("profile: negative delay");
            entries.push_back({static_cast<std::size_t>(delay), e.at("variance").get<double>()});
        }
        double total = 0.0;
        for (const auto& e : entries) total += e.variance;
        return PowerProfile::from_entries(std::move(entries), get_or<double>(j, "total", total));
    });
}

ChannelSpec channel_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("channel description must be a JSON object");
    if (j.contains("profile")) return profile_from_json(j);
    return cir_from_json(j);
}

Json to_json(const ChannelSpec& channel) {
    return std::visit([](const auto& c) { return to_json(c); }, channel);
}

Json to_json(const ReceivedSignal& y) {
    return {{"samples", complex_array_to_json(y.samples)},
            {"noise_variance", y.noise_variance},
            {"data_length", y.data_length}};
}

ReceivedSignal signal_from_json(const Json& j) {
    return guarded("signal", [&] {
        ReceivedSignal y;
        y.samples = complex_array_from_json(j.at("samples"));
        y.noise_variance = get_or<double>(j, "noise_variance", 0.0);
        y.data_length = get_or<std::size_t>(j, "data_length", y.samples.size());
        if (y.data_length > y.samples.size()) throw ConfigError("signal: data_length exceeds sample count");
        if (y.noise_variance < 0.0) throw ConfigError("signal: negative noise variance");
        return y;
    });
}

Json to_json(const PrefilterFir& fir) { return complex_array_to_json(fir.coeffs); }

PrefilterFir fir_from_json(const Json& j, std::optional<std::size_t> delay) {
    PrefilterFir f;
    f.coeffs = complex_array_from_json(j);
    if (f.coeffs.empty()) throw ConfigError("filter: no coefficients");
    f.delay = delay.value_or(default_wmf_delay(f.coeffs.size()));
    if (f.delay >= f.coeffs.size()) throw ConfigError("filter: delay must be below the filter length");
    return f;
}

Json to_json(const ExperimentConfig& c) {
    Json eq = {{"algo", std::string(to_string(c.equalizer.kind))}};
    if (c.equalizer.kind == EqualizerKind::Ddfse) eq["K"] = c.equalizer.trellis_memory;
    if (c.equalizer.prefilter) {
        Json pf = {{"length", c.equalizer.prefilter->length}};
        if (c.equalizer.prefilter->delay) pf["delay"] = *c.equalizer.prefilter->delay;
        eq["prefilter"] = pf;
    }
    Json j = {{"name", c.name},
              {"channel", to_json(c.channel)},
              {"normalize_channel", c.normalize_channel},
              {"alphabet_size", c.alphabet_size},
              {"equalizer", eq},
              {"ebn0_db", c.ebn0_db},
              {"stop",
               {{"min_errors", c.stop.min_errors},
                {"max_bits", c.stop.max_bits},
                {"allow_few_errors", c.stop.allow_few_errors}}},
              {"block_length", c.block_length},
              {"seed", c.seed}};
    if (!c.note.empty()) j["note"] = c.note;
    return j;
}

ExperimentConfig config_from_json(const Json& j) {
    return guarded("experiment config", [&] {
        if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
        ExperimentConfig c;
        c.name = get_or<std::string>(j, "name", c.name);
        c.note = get_or<std::string>(j, "note", "");
        c.channel = channel_from_json(j.at("channel"));
        c.normalize_channel = get_or<bool>(j, "normalize_channel", c.normalize_channel);
        c.alphabet_size = get_or<std::size_t>(j, "alphabet_size", c.alphabet_size);
        const auto& eq = j.at("equalizer");
        c.equalizer.kind = equalizer_kind_from(eq.at("algo").get<std::string>());
        c.equalizer.trellis_memory = get_or<std::size_t>(eq, "K", 0);
        if (c.equalizer.kind == EqualizerKind::Ddfse && !eq.contains("K"))
            throw ConfigError("equalizer: ddfse needs 'K'");
        if (eq.contains("prefilter") && !eq.at("prefilter").is_null()) {
            const auto& pf = eq.at("prefilter");
            PrefilterSpec spec;
            spec.length = pf.at("length").get<std::size_t>();
            if (pf.contains("delay")) spec.delay = pf.at("delay").get<std::size_t>();
            c.equalizer.prefilter = spec;
        }
        c.ebn0_db = j.at("ebn0_db").get<std::vector<double>>();
        if (j.contains("stop")) {
            const auto& s = j.at("stop");
            c.stop.min_errors = get_or<std::uint64_t>(s, "min_errors", c.stop.min_errors);
            c.stop.max_bits = static_cast<std::uint64_t>(get_or<double>(s, "max_bits", static_cast<double>(c.stop.max_bits)));
            c.stop.allow_few_errors = get_or<bool>(s, "allow_few_errors", false);
        }
        c.block_length = get_or<std::size_t>(j, "block_length", c.block_length);
        c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
        c.validate();
        return c;
    });
}

Json to_json(const ComplexityReport& r) {
    Json j = {{"memory", r.memory},
              {"alphabet_size", r.alphabet_size},
              {"conventional_va", r.conventional},
              {"subtrellis_count", r.subtrellis_count},
              {"parallel_va", r.parallel ? Json(*r.parallel) : Json(nullptr)},
              {"multi_trellis_va", r.multi_trellis ? Json(*r.multi_trellis) : Json(nullptr)}};
    if (r.multi_trellis_not_better) j["multi_trellis_not_better"] = *r.multi_trellis_not_better;
    return j;
}

void write_records_csv(std::ostream& os, std::span<const BerRecord> records) {
    os << "ebn0_db,bits,errors,ber,stderr,seconds\n";
    char line[256];
    for (const auto& r : records) {
        std::snprintf(line, sizeof line, "%.4f,%llu,%llu,%.9e,%.9e,%.3f\n", r.ebn0_db,
                      static_cast<unsigned long long>(r.bits), static_cast<unsigned long long>(r.errors), r.ber,
                      r.standard_error, r.seconds);
        os << line;
    }
}

std::vector<BerRecord> read_records_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("ebn0_db,bits,errors,ber,stderr", 0) != 0)
        throw ConfigError("records CSV: unexpected header");
    std::vector<BerRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        BerRecord r;
        char c1, c2, c3, c4, c5;
        if (!(ss >> r.ebn0_db >> c1 >> r.bits >> c2 >> r.errors >> c3 >> r.ber >> c4 >> r.standard_error >> c5 >>
              r.seconds))
            throw ConfigError("records CSV: malformed line '" + line + "'");
        out.push_back(r);
    }
    return out;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

Json run_manifest(const ExperimentConfig& config, const RunOptions& options, std::span<const BerRecord> records) {
    Json recs = Json::array();
    for (const auto& r : records)
        recs.push_back({{"ebn0_db", r.ebn0_db}, {"bits", r.bits}, {"errors", r.errors}, {"ber", r.ber}});
    return {{"tool", "sparse_isi_cli"},
            {"version", "1.0.0"},
            {"config", to_json(config)},
            {"config_hash", hex64(config_hash(config))},
            {"seed", config.seed},
            {"threads", options.threads},
            {"records", recs}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace sparse_isi
