#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wqed/io.hpp"
#include "wqed/runner.hpp"

using namespace wqed;
using Catch::Approx;

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("wqed_test_" + std::to_string(std::rand()));
        fs::create_directories(path);
    }
    ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

}  // namespace

TEST_CASE("config parsing is strict") {
    SECTION("valid config") {
        std::istringstream in(
            "n_atoms = 12\n"
            "theta = 3.14159\n"
            "# comment line\n"
            "engine = qsdmf\n"
            "n_trajectories = 10\n");
        ParsedConfig pc;
        for (const auto& [k, v] : parse_key_values(in)) apply_config_entry(pc, k, v);
        REQUIRE(pc.system.n_atoms == 12);
        REQUIRE(pc.engine == Engine::Qsdmf);
    }
    SECTION("unknown keys fail fast") {
        ParsedConfig pc;
        REQUIRE_THROWS_AS(apply_config_entry(pc, "n_atmos", "12"), InvalidParameter);
    }
    SECTION("malformed values fail") {
        ParsedConfig pc;
        REQUIRE_THROWS_AS(apply_config_entry(pc, "theta", "abc"), InvalidParameter);
        std::istringstream in("n_atoms 12\n");
        REQUIRE_THROWS_AS(parse_key_values(in), InvalidParameter);
    }
    SECTION("config invariants are validated") {
        SystemConfig c;
        c.n_atoms = 0;
        REQUIRE_THROWS_AS(c.validate(), InvalidParameter);
        c.n_atoms = 4;
        c.dt = 1.0;  // exceeds t_end / n_samples
        REQUIRE_THROWS_AS(c.validate(), InvalidParameter);
        c.dt = 0.0;
        c.cavity_count = CavityCount::OneHomogeneous;
        c.theta = 1.0;
        REQUIRE_THROWS_AS(c.validate(), InvalidParameter);
    }
}

TEST_CASE("series files round-trip at full precision") {
    TempDir dir;
    std::vector<double> grid = {0.0, 0.1, 0.2};
    std::vector<double> a = {1.0 / 3.0, 2.0 / 7.0, 0.123456789012345678};
    std::vector<double> a_se = {1e-3, 2e-3, 3e-3};
    ManifestRecorder manifest;
    std::string path = (dir.path / "series.csv").string();
    write_series(path, grid, {{"r", &a, &a_se}}, manifest, false);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "t,r,r_se");
    for (int i = 0; i < 3; ++i) {
        std::string line;
        REQUIRE(std::getline(in, line));
        double t, v, se;
        REQUIRE(std::sscanf(line.c_str(), "%lf,%lf,%lf", &t, &v, &se) == 3);
        REQUIRE(t == grid[i]);
        REQUIRE(v == a[i]);
        REQUIRE(se == a_se[i]);
    }
}

TEST_CASE("output collisions require --force") {
    TempDir dir;
    std::string path = (dir.path / "out.csv").string();
    atomic_write(path, "a\n", false);
    REQUIRE_THROWS_AS(atomic_write(path, "b\n", false), InvalidParameter);
    atomic_write(path, "b\n", true);
    std::ifstream in(path);
    std::string s;
    std::getline(in, s);
    REQUIRE(s == "b");
    // no temp litter
    int files = 0;
    for (auto& e : fs::directory_iterator(dir.path)) { (void)e; ++files; }
    REQUIRE(files == 1);
}

TEST_CASE("manifest checksums change iff data changes") {
    ManifestRecorder m1, m2, m3;
    m1.add_output("x.csv", "1,2,3\n");
    m2.add_output("x.csv", "1,2,3\n");
    m3.add_output("x.csv", "1,2,4\n");
    REQUIRE(m1.outputs[0].second == m2.outputs[0].second);
    REQUIRE(m1.outputs[0].second != m3.outputs[0].second);
}

TEST_CASE("ensemble results are identical for any worker count") {
    SystemConfig cfg;
    cfg.n_atoms = 6;
    cfg.theta = kPi;
    cfg.n_trajectories = 40;
    cfg.n_samples = 25;
    cfg.master_seed = 321;

    RunOptions o1; o1.workers = 1;
    RunOptions o2; o2.workers = 2;
    RunOptions o4; o4.workers = 4;
    auto r1 = run_ensemble(cfg, Engine::DtwaEliminated, o1);
    auto r2 = run_ensemble(cfg, Engine::DtwaEliminated, o2);
    auto r4 = run_ensemble(cfg, Engine::Qsdmf, o4);
    auto r4b = run_ensemble(cfg, Engine::Qsdmf, o1);

    for (std::size_t i = 0; i < r1.stats.grid.size(); ++i) {
        REQUIRE(r1.stats.r[i] == r2.stats.r[i]);       // bitwise
        REQUIRE(r1.stats.p_e[i] == r2.stats.p_e[i]);
        REQUIRE(r4.stats.r[i] == r4b.stats.r[i]);
    }
    // and the rendered CSV bytes agree
    std::string c1 = render_series(r1.stats.grid, {{"r", &r1.stats.r, &r1.stats.r_se}});
    std::string c2 = render_series(r2.stats.grid, {{"r", &r2.stats.r, &r2.stats.r_se}});
    REQUIRE(fnv1a64(c1) == fnv1a64(c2));
}

TEST_CASE("frozen disorder shares one realization across the ensemble") {
    SystemConfig cfg;
    cfg.n_atoms = 5;
    cfg.theta = 2.0;
    cfg.n_trajectories = 8;
    cfg.n_samples = 10;
    cfg.frozen_disorder = true;
    auto res = run_ensemble(cfg, Engine::DtwaEliminated);
    REQUIRE(res.shared_realization.has_value());
    REQUIRE(res.shared_realization->n() == 5);
    // the same seed reproduces the same realization
    auto res2 = run_ensemble(cfg, Engine::DtwaEliminated);
    REQUIRE(res.shared_realization->xi == res2.shared_realization->xi);
}

TEST_CASE("excess trajectory failures abort the run") {
    // dt pathologically large so the full engine rejects every step
    SystemConfig cfg;
    cfg.n_atoms = 4;
    cfg.theta = 0.0;
    cfg.kappa = 1e6;
    cfg.n_trajectories = 10;
    cfg.n_samples = 5;
    cfg.t_end = 50.0;
    cfg.dt = 10.0;  // far beyond any stability limit
    bool threw = false;
    try {
        run_ensemble(cfg, Engine::DtwaFull);
    } catch (const NumericalFailure&) {
        threw = true;
    } catch (const InvalidParameter&) {
        threw = true;  // dt guard may fire first
    }
    REQUIRE(threw);
}
