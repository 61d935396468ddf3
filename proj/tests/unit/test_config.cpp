#include <gtest/gtest.h>

#include <filesystem>

#include "hpcadvisor/config.hpp"
#include "hpcadvisor/errors.hpp"

using namespace hpcadvisor;

namespace {

const std::filesystem::path kData = HPCADVISOR_TEST_DATA;

const char* kMinimal = R"(
subscription: sub
skus: [hb120rs_v3]
rgprefix: rg
appsetupurl: ./app.sh
nnodes: [1]
appname: toy
region: eastus
)";

std::string with(const std::string& extra) { return std::string(kMinimal) + extra; }

std::string error_key(const std::string& text) {
  try {
    parse_sweep_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

}  // namespace

TEST(SweepConfig, OpenfoamSweepShape) {
  const auto cfg = load_sweep_config_file(kData / "openfoam_sweep.yaml");
  EXPECT_EQ(cfg.skus, (std::vector<std::string>{"Standard_HC44rs", "Standard_HB120rs_v2", "Standard_HB120rs_v3"}));
  EXPECT_EQ(cfg.nnodes, (std::vector<int>{1, 2, 3, 4, 8, 16}));
  ASSERT_EQ(cfg.appinputs.size(), 1u);
  EXPECT_EQ(cfg.appinputs[0].first, "mesh");
  EXPECT_EQ(cfg.appinputs[0].second, (std::vector<std::string>{"80 24 24", "60 16 16"}));
  EXPECT_TRUE(cfg.createjumpbox);
  EXPECT_FALSE(cfg.peervpn);
  EXPECT_EQ(cfg.ppr, 100);
  EXPECT_EQ(cfg.tags.at("version"), "v1");
  EXPECT_EQ(sweep_cardinality(cfg), 3u * 6u * 2u);
}

TEST(SweepConfig, DegenerateSweepHasOneEmptyAssignment) {
  const auto cfg = parse_sweep_config(kMinimal);
  const auto combos = appinput_combinations(cfg);
  ASSERT_EQ(combos.size(), 1u);
  EXPECT_TRUE(combos[0].empty());
  EXPECT_EQ(sweep_cardinality(cfg), 1u);
}

TEST(SweepConfig, Validation) {
  EXPECT_EQ(error_key(with("ppr: 150\n")), "ppr");
  EXPECT_EQ(error_key(with("ppr: 0\n")), "ppr");
  EXPECT_EQ(error_key(std::string(kMinimal).replace(std::string(kMinimal).find("rgprefix: rg"), 12, "")), "rgprefix");
  EXPECT_EQ(error_key(std::string(kMinimal).replace(std::string(kMinimal).find("nnodes: [1]"), 11, "nnodes: [2, 0]")),
            "nnodes[1]");
  EXPECT_EQ(error_key(std::string(kMinimal).replace(std::string(kMinimal).find("skus: [hb120rs_v3]"), 18,
                                                    "skus: [hb120rs_v3, Standard_HB120rs_v3]")),
            "skus[1]");
  EXPECT_EQ(error_key(with("appinputs:\n  mesh: []\n")), "appinputs.mesh");
  try {
    parse_sweep_config(with("ppr: 150\n"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("ppr out of range"), std::string::npos);
  }
}

TEST(SweepConfig, UnknownKeysWarn) {
  std::vector<std::string> warnings;
  parse_sweep_config(with("colour: blue\n"), &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("colour"), std::string::npos);
}

TEST(SweepConfig, SerializeRoundTrip) {
  const auto cfg = load_sweep_config_file(kData / "openfoam_sweep.yaml");
  EXPECT_EQ(parse_sweep_config(serialize_sweep_config(cfg)), cfg);
}

TEST(SweepConfig, CombinationsMatchNestedLoops) {
  const auto cfg = parse_sweep_config(with("appinputs:\n  a: [x, y]\n  b: [\"1\", \"2\", \"3\"]\n  c: z\n"));
  std::vector<AppInputs> expected;
  for (const char* a : {"x", "y"})
    for (const char* b : {"1", "2", "3"}) expected.push_back({{"a", a}, {"b", b}, {"c", "z"}});
  EXPECT_EQ(appinput_combinations(cfg), expected);
  EXPECT_EQ(sweep_cardinality(cfg), 6u);
}

TEST(SweepConfig, CanonicalSku) {
  EXPECT_EQ(canonical_sku("Standard_HB120rs_v3"), "hb120rs_v3");
  EXPECT_EQ(canonical_sku("hb120rs_v3"), "hb120rs_v3");
  EXPECT_EQ(canonical_sku("STANDARD_HC44RS"), "hc44rs");
}

TEST(Pricing, Rows) {
  const auto p = load_pricing("# catalog\nsku,cores,price\nhb120rs_v3,120,3.60\nhc44rs,44,0\n");
  EXPECT_EQ(p.size(), 2u);
  EXPECT_EQ(p.at("Standard_HB120rs_v3").cores, 120);
  EXPECT_DOUBLE_EQ(p.at("hb120rs_v3").price_per_node_hour, 3.60);
  EXPECT_DOUBLE_EQ(p.at("hc44rs").price_per_node_hour, 0.0);
  EXPECT_EQ(p.find("hb176rs_v4"), nullptr);
}

TEST(Pricing, Errors) {
  EXPECT_THROW(load_pricing("hc44rs,44,3\nhc44rs,44,3\n"), ConfigError);
  EXPECT_THROW(load_pricing("hc44rs,44,-1\n"), ConfigError);
  EXPECT_THROW(load_pricing("hc44rs,0,1\n"), ConfigError);
  EXPECT_THROW(load_pricing("hc44rs,44\n"), Error);
}

TEST(Pricing, ProcessesPerNode) {
  EXPECT_EQ(processes_per_node(120, 100), 120);
  EXPECT_EQ(processes_per_node(120, 50), 60);
  EXPECT_EQ(processes_per_node(44, 33), 14);
  EXPECT_EQ(processes_per_node(1, 50), 0);
}

TEST(Pricing, TaskCostProratesPerSecond) {
  // Hourly node price times node-hours.
  auto oracle = [](double t, int n, double p) { return t / 3600.0 * n * p; };
  EXPECT_NEAR(task_cost(34, 16, 3.60), 0.5440, 1e-12);
  EXPECT_NEAR(task_cost(59, 3, 3.60), 0.1770, 1e-12);
  EXPECT_DOUBLE_EQ(task_cost(3600, 1, 2.5), 2.5);
  EXPECT_DOUBLE_EQ(task_cost(123.4, 7, 1.7), oracle(123.4, 7, 1.7));
  EXPECT_DOUBLE_EQ(task_cost(10, 4, 0.0), 0.0);
}

TEST(Pricing, ConfigCheck) {
  const auto cfg = load_sweep_config_file(kData / "openfoam_sweep.yaml");
  EXPECT_NO_THROW(check_config_against_pricing(cfg, load_pricing_file(kData / "pricing.csv")));
  EXPECT_THROW(check_config_against_pricing(cfg, load_pricing("hc44rs,44,3\n")), ConfigError);
}

TEST(AppScript, Validation) {
  const auto ok = validate_app_script(kData / "scripts/toy.sh");
  EXPECT_TRUE(ok.has_setup);
  EXPECT_TRUE(ok.has_run);
  try {
    validate_app_script(kData / "scripts/no_run.sh");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("hpcadvisor_run not found"), std::string::npos);
  }
  EXPECT_THROW(validate_app_script(kData / "scripts/absent.sh"), NotFoundError);
}
