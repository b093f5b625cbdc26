#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gdeform/pipeline.hpp"

using namespace gdeform;
using nlohmann::json;

namespace {

fs::path tmp() {
  auto d = fs::temp_directory_path() / "gdeform_pipeline_tests";
  fs::create_directories(d);
  return d;
}

PipelineConfig parse(const std::string& text) { return parse_config(json::parse(text), tmp()); }

}  // namespace

TEST(Config, OnlyChartIsRequired) {
  auto c = parse(R"({"chart": {"catalog": "clifford_torus"}})");
  finalize_config(c);
  EXPECT_EQ(c.grid.nu, 64);
  EXPECT_EQ(c.kind, DatumKind::hyperbolic);
  EXPECT_EQ(c.support.kind, "nu_exp_lambda");
  EXPECT_EQ(c.tgrid.nt, 5);
  EXPECT_TRUE(c.echo["tolerances"]["membership"].is_null());
  EXPECT_DOUBLE_EQ(c.echo["tolerances"]["triple"].get<double>(), default_triple_tol(c.grid));
  EXPECT_THROW(parse(R"({})"), ConfigError);
  EXPECT_THROW(parse(R"({"chart": {}})"), ConfigError);
}

TEST(Config, FunctionSpecs) {
  const auto base = tmp();
  EXPECT_DOUBLE_EQ(parse_function(json(2.5), base, "x").eval(0.3, 1).real(), 2.5);
  const auto s = parse_function(json::parse(R"({"type": "sine", "a": 1, "b": 0.5, "k": 2})"), base, "x");
  EXPECT_DOUBLE_EQ(s.eval(0.25, 1).real(), 1 + 0.5 * std::sin(0.5));
  const auto l = parse_function(json::parse(R"({"type": "c_minus_exp_m2lambda", "c": 3})"), base, "x");
  EXPECT_DOUBLE_EQ(l.eval(0.0, 0.5).real(), 2.5);
  EXPECT_THROW(parse_function(json::parse(R"({"type": "sine", "a": 1})"), base, "x"), ConfigError);
  EXPECT_THROW(parse_function(json::parse(R"({"type": "spline"})"), base, "x"), ConfigError);
  EXPECT_THROW(parse_function(json("1"), base, "x"), ConfigError);
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(parse(R"({"chart": {"catalog": "helicoid"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"chart": {"catalog": "sampled", "csv": "absent.csv"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"chart": {"catalog": "clifford_torus", "grid": [64]}})"), ConfigError);
  EXPECT_THROW(parse(R"({"chart": {"catalog": "clifford_torus"}, "datum": {"kind": "parabolic"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"chart": {"catalog": "clifford_torus"}, "support": {"kind": "magic"}})"), ConfigError);
  EXPECT_THROW(parse(R"({"chart": {"catalog": "clifford_torus"}, "t_range": [0, 1]})"), ConfigError);
  for (const char* text : {R"({"chart": {"catalog": "clifford_torus", "grid": [7, 64]}})",
                           R"({"chart": {"catalog": "clifford_torus", "grid": [64, 513]}})",
                           R"({"chart": {"catalog": "clifford_torus"}, "tolerances": {"triple": -1}})",
                           R"({"chart": {"catalog": "clifford_torus", "bounds": [1, 0, 0, 1]}})"}) {
    EXPECT_THROW(
        {
          auto c = parse(text);
          finalize_config(c);
        },
        ConfigError)
        << text;
  }
}

TEST(Config, GridFlag) {
  EXPECT_EQ(parse_grid_flag("32x48"), (std::vector<int>{32, 48}));
  EXPECT_EQ(parse_grid_flag("32x48x3"), (std::vector<int>{32, 48, 3}));
  for (const char* bad : {"32", "32x", "x32", "32x-4", "axb", "1x2x3x4"}) EXPECT_THROW(parse_grid_flag(bad), ConfigError) << bad;
}

TEST(Pipeline, StagesOnSmallClifford) {
  auto c = parse(R"({"chart": {"catalog": "clifford_torus", "grid": [16, 16]},
                     "datum": {"normalization": "metric", "U": {"type": "c_minus_exp_m2lambda", "c": 3}, "V": 1}})");
  c.out = tmp() / "small";
  finalize_config(c);
  Pipeline p;
  p.cfg = c;
  EXPECT_TRUE(run_subcommand(p, "all"));
  for (const char* f : {"classify.json", "membership.json", "triple.json", "reconstruct.json", "summary.txt",
                        "triple.gdf", "f.csv", "g.csv", "f.obj", "g.obj"})
    EXPECT_TRUE(fs::exists(c.out / f)) << f;
  const auto rec = json::parse(std::ifstream(c.out / "reconstruct.json"));
  EXPECT_TRUE(rec["pass"].get<bool>());
  EXPECT_EQ(rec["info"]["isometry"]["normal_rank"].get<int>(), 2);
}

TEST(Pipeline, BuildWithoutAdmissibleDatumFails) {
  auto c = parse(R"({"chart": {"catalog": "clifford_torus", "grid": [16, 16]}, "datum": {"U": -0.2, "V": -0.2}})");
  c.out = tmp() / "bad";
  finalize_config(c);
  Pipeline p;
  p.cfg = c;
  EXPECT_FALSE(run_subcommand(p, "build"));
  const auto rep = json::parse(std::ifstream(c.out / "triple.json"));
  EXPECT_FALSE(rep["pass"].get<bool>());
  EXPECT_THROW(run_subcommand(p, "verify"), ConfigError);
}
