#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fairedge/scenario.hpp"

using namespace fairedge;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "security_levels": 1, "b_max_hz": 1e6, "p_max_w": 0.2, "seed": 3,
  "ues": [{
    "weight": 1.0, "security": 1, "feature_bits": 1e4, "deadline_s": 0.5,
    "channel": {"gain": 1e-6, "noise_psd_w_per_hz": 1e-13, "eav_gain": 1e-7, "eav_noise_psd_w_per_hz": 1e-13},
    "energy": {"joules_per_access": 1e-9, "access_counts": [10, 20]},
    "trace": {"generator": {"layer_count": 3, "critical_prior": 0.5, "critical_drift": 0.8,
                            "normal_drift": -0.8, "noise_std": 1.0, "seed": 11, "events": 30}}
  }],
  "ens": [{"bandwidth_hz": 2e6, "compute_units": 5, "security": 1}]
})";

json minimal() { return json::parse(kMinimal); }

std::string error_location(const json& doc) {
  try {
    parse_scenario(doc);
  } catch (const ParseError& e) {
    return e.location();
  }
  return "";
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fairedge_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Document, MinimalParsesAndBuilds) {
  const auto cfg = parse_scenario(std::string(kMinimal));
  ASSERT_EQ(cfg.ues.size(), 1u);
  EXPECT_EQ(cfg.ues[0].channel.eav_gain, 1e-7);
  EXPECT_EQ(cfg.ues[0].energy.access_counts, (std::vector<std::int64_t>{10, 20}));
  const auto s = build_scenario(cfg);
  EXPECT_EQ(s.ues[0].stream->size(), 30u);
  EXPECT_EQ(s.ues[0].stream->layer_count(), 3u);
}

TEST(Document, NegativeBandwidthNamesField) {
  auto doc = minimal();
  doc["ens"][0]["bandwidth_hz"] = -1.0;
  EXPECT_EQ(error_location(doc), "ens[0].bandwidth_hz");
}

TEST(Document, MissingAndUnknownFields) {
  auto doc = minimal();
  doc["ues"][0]["channel"].erase("gain");
  EXPECT_EQ(error_location(doc), "ues[0].channel.gain");
  auto extra = minimal();
  extra["ues"][0]["colour"] = "red";
  EXPECT_EQ(error_location(extra), "ues[0].colour");
}

TEST(Document, SecurityOutOfRange) {
  auto doc = minimal();
  doc["ens"][0]["security"] = 2;
  EXPECT_EQ(error_location(doc), "ens[0].security");
  auto ue = minimal();
  ue["ues"][0]["security"] = 0;
  EXPECT_EQ(error_location(ue), "ues[0].security");
}

TEST(Document, TraceNeedsExactlyOneSource) {
  auto doc = minimal();
  doc["ues"][0]["trace"]["file"] = "x.csv";
  EXPECT_FALSE(error_location(doc).empty());
  EXPECT_THROW(parse_scenario(std::string("{not json")), ParseError);
}

TEST(Document, RoundTrip) {
  const auto cfg = parse_scenario(minimal());
  EXPECT_EQ(parse_scenario(serialize_scenario(cfg)), cfg);
  auto with_pool = cfg;
  with_pool.ens[0].power_pool_w = 0.4;
  with_pool.ues[0].trace = {"traces/a.csv", std::nullopt, 0};
  EXPECT_EQ(parse_scenario(serialize_scenario(with_pool)), with_pool);
}

TEST(Document, FileTraceResolvesAgainstBase) {
  const auto dir = temp_dir("file_trace");
  fs::create_directories(dir / "traces");
  {
    std::ofstream f(dir / "traces/t.csv");
    f << "event_id,label,c_1\n1,critical,0.7\n2,normal,0.2\n";
  }
  auto cfg = parse_scenario(minimal());
  cfg.ues[0].trace = {"traces/t.csv", std::nullopt, 0};
  save_scenario_config(cfg, dir / "scenario.json");
  const auto loaded = load_scenario_config(dir / "scenario.json");
  EXPECT_EQ(loaded, cfg);
  const auto s = build_scenario(loaded, dir);
  EXPECT_EQ(s.ues[0].stream->size(), 2u);
  fs::remove_all(dir);
}

TEST(Document, BadTraceFileNamesUser) {
  auto cfg = parse_scenario(minimal());
  cfg.ues[0].trace = {"/nonexistent/trace.csv", std::nullopt, 0};
  try {
    build_scenario(cfg);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.location(), "ues[0].trace");
  }
}

TEST(Random, DeterministicAndValid) {
  RandomScenarioParams p;
  p.users = 4;
  p.nodes = 3;
  EXPECT_EQ(random_scenario(p, 17), random_scenario(p, 17));
  EXPECT_NE(random_scenario(p, 17), random_scenario(p, 18));
  EXPECT_NO_THROW(build_scenario(random_scenario(p, 17)));
  p.users = 0;
  EXPECT_THROW(random_scenario(p, 1), InvalidInputError);
}

TEST(Random, AdvantageMeansPositiveSecrecyRate) {
  RandomScenarioParams p;
  p.users = 20;
  const auto cfg = random_scenario(p, 5);
  for (const auto& ue : cfg.ues) EXPECT_GT(secrecy_rate({cfg.b_max_hz, cfg.p_max_w}, ue.channel), 0.0);
}

class BundleTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg = parse_scenario(minimal());
    const auto s = build_scenario(cfg);
    auto result = solve_alternating(s);
    bundle = {cfg, config_digest(cfg), result.plan, result.report, std::nullopt};
  }
  ScenarioConfig cfg;
  ResultBundle bundle;
};

TEST_F(BundleTest, ValidatesAndRoundTrips) {
  const auto doc = bundle_to_json(bundle);
  EXPECT_TRUE(validate_bundle_json(doc).empty());
  EXPECT_EQ(doc["schema_version"], kBundleSchemaVersion);
  EXPECT_FALSE(doc.contains("generated_at"));
  const auto dir = temp_dir("bundle");
  write_bundle(bundle, dir / "b.json");
  const auto back = read_bundle(dir / "b.json");
  EXPECT_TRUE(back.warnings.empty());
  EXPECT_EQ(bundle_to_json(back.bundle), doc);
  EXPECT_EQ(back.bundle.config, cfg);
  fs::remove_all(dir);
}

TEST_F(BundleTest, DigestIsSha256OfCanonicalConfig) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(bundle.config_digest.size(), 64u);
  auto other = cfg;
  other.seed += 1;
  EXPECT_NE(config_digest(other), bundle.config_digest);
}

TEST_F(BundleTest, TamperedDigestWarns) {
  auto doc = bundle_to_json(bundle);
  doc["config_digest"] = std::string(64, '0');
  const auto r = bundle_from_json(doc);
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST_F(BundleTest, UnknownVersionRejected) {
  auto doc = bundle_to_json(bundle);
  doc["schema_version"] = 2;
  EXPECT_THROW(bundle_from_json(doc), SchemaVersionError);
  EXPECT_FALSE(validate_bundle_json(doc).empty());
}

TEST_F(BundleTest, StructuralErrorsReported) {
  auto doc = bundle_to_json(bundle);
  doc["plan"].erase("thresholds");
  doc["report"]["objective"] = "high";
  const auto errors = validate_bundle_json(doc);
  EXPECT_EQ(errors.size(), 2u);
}
