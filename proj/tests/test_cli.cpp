#include "intmaps/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;
using intmaps::cli::run;
using intmaps::io::read_file;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("intmaps_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

int run_quiet(std::vector<std::string> args) {
    std::ostringstream out, err;
    return run(args, out, err);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

} // namespace

TEST(Io, SeventeenSignificantDigits) {
    EXPECT_EQ(intmaps::io::format_double(0.1), "0.10000000000000001");
    EXPECT_EQ(intmaps::io::format_double(0.5), "0.5");
    EXPECT_EQ(std::stod(intmaps::io::format_double(0.30901699437494745)), 0.30901699437494745);
    intmaps::io::CsvTable t({"a", "b"});
    t.add_row({std::int64_t{3}, 1.0 / 3.0});
    EXPECT_EQ(t.str(), "a,b\n3,0.33333333333333331\n");
    EXPECT_THROW(t.add_row({std::int64_t{1}}), intmaps::Error);
}

TEST(Io, AtomicWriteLeavesNoTemporaries) {
    const fs::path dir = scratch("atomic");
    intmaps::io::write_atomic(dir / "x.csv", "one\n");
    intmaps::io::write_atomic(dir / "x.csv", "two\n");
    EXPECT_EQ(read_file(dir / "x.csv"), "two\n");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
    EXPECT_EQ(files, 1u);
}

TEST(Config, ParsingAndRejection) {
    const auto kv = intmaps::cli::parse_config_text("# comment\nmap = pm:s=2\n\nkmax=500  # trailing\n");
    ASSERT_EQ(kv.size(), 2u);
    const auto cfg = intmaps::cli::resolve_config(kv);
    EXPECT_EQ(cfg.family.s, 2.0);
    EXPECT_EQ(cfg.kmax, 500);
    EXPECT_EQ(cfg.echo.at("kmax"), "500");
    EXPECT_THROW(intmaps::cli::parse_config_text("kmax 500\n"), intmaps::cli::ConfigError);
    EXPECT_THROW(intmaps::cli::resolve_config({{"colour", "red"}}), intmaps::cli::ConfigError);
    EXPECT_THROW(intmaps::cli::resolve_config({{"kmax", "12.5"}}), intmaps::cli::ConfigError);
    EXPECT_THROW(intmaps::cli::resolve_config({{"epsilon", "0.1x"}}), intmaps::cli::ConfigError);
}

TEST(Cli, ValidateExitCodes) {
    const fs::path dir = scratch("validate");
    EXPECT_EQ(run_quiet({"validate", "--map", "pm:s=1", "--out", dir.string()}), 0);
    EXPECT_TRUE(fs::exists(dir / "validation.json"));
    EXPECT_EQ(run_quiet({"validate", "--map", "pm:s=0.5", "--out", dir.string()}), 2);
    EXPECT_EQ(run_quiet({"validate", "--map", "geo:s=1,r=0.5", "--out", dir.string()}), 0);
    EXPECT_EQ(run_quiet({"validate", "--map", "pm:s=one", "--out", dir.string()}), 64);
    EXPECT_EQ(run_quiet({"validate", "--bogus", "1"}), 64);
    EXPECT_EQ(run_quiet({}), 64);

    const fs::path cfg = dir / "bad.cfg";
    intmaps::io::write_atomic(cfg, "map = pm:s=1\nwhatever = 3\n");
    EXPECT_EQ(run_quiet({"validate", "--config", cfg.string(), "--out", dir.string()}), 64);
    intmaps::io::write_atomic(cfg, "map = pm:s=1\nthis line is malformed\n");
    EXPECT_EQ(run_quiet({"validate", "--config", cfg.string(), "--out", dir.string()}), 64);
    EXPECT_EQ(run_quiet({"validate", "--config", (dir / "missing.cfg").string()}), 64);
}

TEST(Cli, ConfigFileIsOverriddenByFlags) {
    const fs::path dir = scratch("override");
    const fs::path cfg = dir / "run.cfg";
    intmaps::io::write_atomic(cfg, "map = pm:s=0.5\nout = " + (dir / "ignored").string() + "\n");
    EXPECT_EQ(run_quiet({"validate", "--config", cfg.string(), "--map", "pm:s=2", "--out", dir.string()}), 0);
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(manifest["config"]["map"], "pm:s=2");
    EXPECT_FALSE(fs::exists(dir / "ignored"));
}

TEST(Cli, ManifestContents) {
    const fs::path dir = scratch("manifest");
    ASSERT_EQ(run_quiet({"validate", "--out", dir.string(), "--seed", "9"}), 0);
    const auto m = nlohmann::json::parse(read_file(dir / "manifest.json"));
    EXPECT_EQ(m["command"], "validate");
    EXPECT_EQ(m["config"]["seed"], "9");
    EXPECT_EQ(m["versions"]["intmaps"], intmaps::cli::kVersion);
    EXPECT_TRUE(m["wall_time_seconds"].is_number());
    EXPECT_GE(m["wall_time_seconds"].get<double>(), 0.0);
    EXPECT_EQ(m["exit_code"], 0);
}

TEST(Cli, PartitionWritesBSequence) {
    const fs::path dir = scratch("partition");
    ASSERT_EQ(run_quiet({"partition", "--kmax", "10000", "--depth", "8", "--out", dir.string(), "--param",
                         "word=1,1"}),
              0);
    const auto rows = read_csv(dir / "b_sequence.csv");
    ASSERT_EQ(rows.size(), 10002u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"k", "b_k", "L_minus_k"}));
    EXPECT_NEAR(std::stod(rows[2][1]), 0.30902, 1e-5);
    EXPECT_EQ(rows[2][1], "0.30901699437494745");
    const auto j = nlohmann::json::parse(read_file(dir / "partition.json"));
    EXPECT_DOUBLE_EQ(j["cylinder"]["lo"].get<double>(), 0.75);
    EXPECT_DOUBLE_EQ(j["cylinder"]["hi"].get<double>(), 1.0);
}

TEST(Cli, ExactnessOnUnitInterval) {
    const fs::path dir = scratch("exactness");
    ASSERT_EQ(run_quiet({"exactness", "--nmax", "5", "--out", dir.string(), "--param", "set=0:1"}), 0);
    const auto rows = read_csv(dir / "profile.csv");
    ASSERT_GE(rows.size(), 2u);
    EXPECT_EQ(rows[1][0], "0");
    EXPECT_EQ(rows[1][1], "1");
    EXPECT_EQ(rows[1][4], "1");
    const auto j = nlohmann::json::parse(read_file(dir / "exactness.json"));
    EXPECT_EQ(j["n_star"], 0);
    EXPECT_EQ(run_quiet({"exactness", "--out", dir.string(), "--param", "set=0.7:0.2"}), 2);
    EXPECT_EQ(run_quiet({"exactness", "--out", dir.string(), "--param", "set=I-3"}), 0);
    EXPECT_EQ(run_quiet({"exactness", "--out", dir.string(), "--param", "set=abc"}), 64);
}

TEST(Cli, DiffusionWithZeroDisplacement) {
    const fs::path dir = scratch("diffusion");
    ASSERT_EQ(run_quiet({"diffusion", "--ensemble", "1000", "--nmax", "200", "--out", dir.string(), "--param",
                         "displacement=zero", "--param", "cap=1000"}),
              0);
    const auto rows = read_csv(dir / "msd.csv");
    ASSERT_GT(rows.size(), 2u);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][1], "0");
    EXPECT_EQ(run_quiet({"diffusion", "--ensemble", "10", "--out", dir.string()}), 2);
}

TEST(Cli, DensityAndDistortionRun) {
    const fs::path dir = scratch("density");
    ASSERT_EQ(run_quiet({"density", "--grid", "1024", "--epsilon", "0.1", "--out", dir.string()}), 0);
    EXPECT_EQ(read_csv(dir / "density.csv").size(), 1025u);
    EXPECT_EQ(run_quiet({"density", "--grid", "100", "--out", dir.string()}), 2);
    EXPECT_EQ(run_quiet({"density", "--epsilon", "0.7", "--out", dir.string()}), 2);
    const fs::path d2 = scratch("distortion");
    ASSERT_EQ(run_quiet({"distortion", "--depth", "10", "--kmax", "1000", "--out", d2.string(), "--param", "trials=200",
                         "--param", "pairs=50", "--param", "young_j=40"}),
              0);
    EXPECT_EQ(read_csv(d2 / "young.csv").size(), 41u);
    EXPECT_TRUE(fs::exists(d2 / "frames.csv"));
}

TEST(Cli, SameSeedSameBytes) {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    for (const fs::path& d : {a, b})
        ASSERT_EQ(run_quiet({"diffusion", "--map", "pm:s=1", "--ensemble", "2000", "--nmax", "500", "--seed", "77",
                             "--out", d.string(), "--param", "cap=10000", "--param", "displacement=halves"}),
                  0);
    for (const char* f : {"msd.csv", "return_tail.csv", "return_hist.csv"}) EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
}
