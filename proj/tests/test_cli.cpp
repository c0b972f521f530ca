#include "sparse_isi/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace sparse_isi;

namespace {

struct Run {
    int status;
    std::string out;
};

Run run(const std::string& args) {
    const std::string cmd = std::string(SPARSE_ISI_CLI) + " " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int st = pclose(p);
    return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string data(const std::string& name) { return std::string(SPARSE_ISI_SOURCE_DIR) + "/data/" + name; }

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("sparse_isi_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// CSV without the wall-clock column.
std::string strip_seconds(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
}

}  // namespace

TEST_CASE("minphase reproduces the worked example") {
    const auto r = run("minphase --channel " + data("example_minphase.json"));
    REQUIRE(r.status == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "kind,index,re,im,magnitude");
    std::map<std::string, std::vector<std::pair<double, double>>> rows;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string kind, idx, re, im;
        std::getline(ls, kind, ',');
        std::getline(ls, idx, ',');
        std::getline(ls, re, ',');
        std::getline(ls, im, ',');
        rows[kind].push_back({std::stod(re), std::stod(im)});
    }
    const std::vector<double> expect{0.79, 0.12, -0.02, 0.20, 0.56};
    REQUIRE(rows["hmin"].size() == expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(std::abs(rows["hmin"][i].first - expect[i]) <= 0.01);
        CHECK(std::abs(rows["hmin"][i].second) <= 0.01);
    }
    REQUIRE(rows["zero"].size() == 4);
    int outside = 0;
    for (auto [re, im] : rows["zero"]) {
        const double mag = std::hypot(re, im);
        CHECK(std::abs(std::abs(re) - 0.69) <= 0.01);
        if (re > 0) {
            CHECK(std::abs(std::abs(im) - 0.80) <= 0.01);
            CHECK(std::abs(mag - 1.06) <= 0.01);
            ++outside;
        } else {
            CHECK(std::abs(std::abs(im) - 0.56) <= 0.01);
            CHECK(std::abs(mag - 0.89) <= 0.01);
        }
    }
    CHECK(outside == 2);
    for (auto [re, im] : rows["minzero"]) CHECK(std::hypot(re, im) <= 1.0);
}

TEST_CASE("analyze reports decomposability") {
    auto r = run("analyze --channel " + data("h2.json"));
    REQUIRE(r.status == 0);
    auto j = Json::parse(r.out);
    CHECK(j.at("decomposable") == false);
    CHECK(j.at("complexity").at("multi_trellis_va") == 2548);
    CHECK(cir_from_json(j.at("channel")).delays() == std::vector<std::size_t>{0, 7, 8});

    r = run("analyze --channel " + data("h1.json"));
    REQUIRE(r.status == 0);
    j = Json::parse(r.out);
    CHECK(j.at("decomposable") == true);
    CHECK(j.at("delay_gcd") == 2);
    CHECK(j.at("complexity").at("parallel_va") == 64);
    for (const auto& k : j.at("influence_set").at("members")) CHECK(k.get<std::int64_t>() % 2 == 0);
}

TEST_CASE("designwmf output reads back as a filter") {
    const auto r = run("designwmf --channel " + data("fig3.json") + " --length 40");
    REQUIRE(r.status == 0);
    const auto f = fir_from_json(Json::parse(r.out));
    CHECK(f.coeffs.size() == 40);
    CHECK(f.delay == default_wmf_delay(40));
}

TEST_CASE("simulate and equalize round trip") {
    const auto dir = scratch("roundtrip");
    fs::create_directories(dir);
    const auto sig = dir / "signal.json";
    const auto bits = dir / "bits.txt";
    auto r = run("simulate --channel " + data("h1.json") + " --length 200 --ebn0 30 --seed 4 --bits-out " +
                 bits.string());
    REQUIRE(r.status == 0);
    {
        std::ofstream o(sig);
        o << r.out;
    }
    const auto y = signal_from_json(read_json_file(sig));
    CHECK(y.data_length == 200);
    std::string sent = slurp(bits);
    while (!sent.empty() && std::isspace(static_cast<unsigned char>(sent.back()))) sent.pop_back();
    CHECK(sent.size() == 200);
    for (const std::string algo : {"va", "pva", "bcjr", "ddfse --K 4"}) {
        CAPTURE(algo);
        r = run("equalize --channel " + data("h1.json") + " --signal " + sig.string() + " --algo " + algo);
        REQUIRE(r.status == 0);
        std::string got = r.out;
        while (!got.empty() && std::isspace(static_cast<unsigned char>(got.back()))) got.pop_back();
        CHECK(got == sent);
    }
    fs::remove_all(dir);
}

TEST_CASE("mfb output") {
    const auto r = run("mfb --grid 0:2:10");
    REQUIRE(r.status == 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    CHECK(line == "ebn0_db,ber,stderr");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 6);
    CHECK(run("mfb --profile " + data("fading_L6.json") + " --draws 100").status == 2);
}

TEST_CASE("ber runs are reproducible from the seed") {
    const auto a = scratch("ber_a"), b = scratch("ber_b");
    const std::string common = "ber --config " + std::string(SPARSE_ISI_SOURCE_DIR) +
                               "/presets/fig3.json --grid 3,5 --max-bits 200000 --seed 42 --out ";
    REQUIRE(run(common + a.string()).status == 0);
    REQUIRE(run(common + b.string()).status == 0);
    const auto ca = slurp(a / "ber.csv"), cb = slurp(b / "ber.csv");
    CHECK_FALSE(ca.empty());
    CHECK(strip_seconds(ca) == strip_seconds(cb));
    std::istringstream csv(ca);
    const auto recs = read_records_csv(csv);
    CHECK(recs.size() == 2);

    const auto m = read_json_file(a / "manifest.json");
    CHECK(m.at("seed") == 42);
    const auto cfg = config_from_json(m.at("config"));
    CHECK(cfg.seed == 42);
    CHECK(m.at("config_hash") == hex64(config_hash(cfg)));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("errors map to exit codes") {
    const auto dir = scratch("errors");
    fs::create_directories(dir);
    const auto bad = dir / "bad.json";
    {
        std::ofstream o(bad);
        o << R"({"channel": {"coeffs": [1]}, "equalizer": {"algo": "zf"}, "ebn0_db": [1]})";
    }
    CHECK(run("ber --config " + bad.string() + " --out " + (dir / "o").string()).status == 2);
    {
        std::ofstream o(bad);
        o << "{ nope";
    }
    CHECK(run("minphase --channel " + bad.string()).status == 2);
    CHECK(run("minphase --channel " + data("h1.json") + " --no-such-flag").status == 2);
    CHECK(run("").status != 0);
    CHECK(run("equalize --channel " + data("h2.json") + " --signal " + data("h2.json") + " --algo pva").status != 0);
    fs::remove_all(dir);
}

TEST_CASE("help lists every preset") {
    const auto r = run("--help");
    CHECK(r.status == 0);
    for (const auto& n : preset_names()) CHECK(r.out.find("  " + n + "  ") != std::string::npos);
}

TEST_CASE("manifest option echoes the invocation") {
    const auto dir = scratch("manifest");
    fs::create_directories(dir);
    const auto m = dir / "m.json";
    REQUIRE(run("analyze --channel " + data("h1.json") + " --manifest " + m.string()).status == 0);
    const auto j = read_json_file(m);
    CHECK(j.dump().find("analyze") != std::string::npos);
    fs::remove_all(dir);
}
