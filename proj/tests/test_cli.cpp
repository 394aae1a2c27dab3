#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dhc/artifacts.hpp"
#include "dhc/config.hpp"

using namespace dhc;

TEST_CASE("epsilon parsing accepts unit fractions only") {
  CHECK(parse_epsilon("1/2") == doctest::Approx(0.5));
  CHECK(parse_epsilon("1/8") == doctest::Approx(0.125));
  CHECK(parse_epsilon("0.25") == doctest::Approx(0.25));
  CHECK_THROWS_WITH_AS(parse_epsilon("0.3"), doctest::Contains("epsilon must be 1/m"),
                       UsageError);
  CHECK_THROWS_AS(parse_epsilon("2"), UsageError);
  CHECK_THROWS_AS(parse_epsilon("1/0"), UsageError);
}

TEST_CASE("config text round trip and validation") {
  const std::string text = R"(
# comment
[geometry]
ax = 0.3
ay = 0.2
[mesh]
h = 0.035
[micro]
modes = 12
lambda_max = 480
[fine]
eps = 1/2, 1/4, 1/8
h_cell = 1/16
[output]
dir = artifacts
)";
  const auto cfg = RunConfig::parse_text(text);
  CHECK(cfg.geom.ax == 0.3);
  CHECK(cfg.geom.ay == 0.2);
  CHECK(cfg.h == 0.035);
  CHECK(cfg.modes == 12);
  CHECK(cfg.eps_list.size() == 3);
  CHECK(cfg.eps_list[2] == doctest::Approx(0.125));
  CHECK(cfg.out_dir == "artifacts");

  CHECK_THROWS_WITH_AS(RunConfig::parse_text("[mesh]\nh = -1\n"), doctest::Contains("mesh.h"),
                       UsageError);
  CHECK_THROWS_WITH_AS(RunConfig::parse_text("[fine]\neps = 1/4, 1/2\n"),
                       doctest::Contains("strictly decreasing"), UsageError);
  CHECK_THROWS_WITH_AS(RunConfig::parse_text("[bogus]\nkey = 1\n"),
                       doctest::Contains("unknown config key"), UsageError);
  CHECK_THROWS_WITH_AS(RunConfig::parse_text("[geometry]\na = 0.7\n"),
                       doctest::Contains("geometry"), UsageError);
}

TEST_CASE("canonical serialization is stable and hash-ready") {
  const auto a = RunConfig::parse_text("[mesh]\nh = 0.04\n");
  const auto b = RunConfig::parse_text("[mesh]\nh=0.04\n# nothing else\n");
  CHECK(a.canonical() == b.canonical());
  const auto c = RunConfig::parse_text("[mesh]\nh = 0.05\n");
  CHECK(a.canonical() != c.canonical());
  CHECK(fnv1a(a.canonical()) == fnv1a(b.canonical()));
}

TEST_CASE("g17 round-trips doubles exactly") {
  for (double x : {M_PI, 1.0 / 3.0, 92.530975407148553, 1e-17, -7.25}) {
    CHECK(std::stod(g17(x)) == x);
  }
}

TEST_CASE("csv and manifest writers are deterministic") {
  const std::string dir = "/tmp/dhc_test_art";
  std::filesystem::create_directories(dir);
  for (int round = 0; round < 2; ++round) {
    CsvWriter csv(dir + "/t.csv", {"a", "b"});
    csv.row({g17(1.0 / 3.0), g17(M_PI)});
    csv.row({"x", "y"});
    csv.close();
    Manifest man(dir, "cafe");
    man.add("t.csv");
    man.add_check("demo", true, "ok");
    man.write("m.json");
    static std::string first_csv, first_man;
    std::stringstream s1, s2;
    s1 << std::ifstream(dir + "/t.csv").rdbuf();
    s2 << std::ifstream(dir + "/m.json").rdbuf();
    if (round == 0) {
      first_csv = s1.str();
      first_man = s2.str();
      CHECK(first_man.find("\"pass\": true") != std::string::npos);
    } else {
      CHECK(s1.str() == first_csv);
      CHECK(s2.str() == first_man);
    }
  }
}
