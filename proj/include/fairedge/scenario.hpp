#pragma once

// Scenario documents (JSON), random scenario generation, and persisted
// solver results.
//
// Units are fixed: Hz, W, bits, seconds, joules. Every document key that
// carries a unit spells it as a suffix (`b_max_hz`, `deadline_s`, ...).

#include <openssl/sha.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fairedge/error.hpp"
#include "fairedge/exitpolicy.hpp"
#include "fairedge/fairopt.hpp"
#include "fairedge/link.hpp"
#include "fairedge/trace.hpp"
#include "json.hpp"

namespace fairedge {

using json = nlohmann::json;

// Exactly one of `file` or `generator` is set.
struct TraceSource {
  std::optional<std::string> file;  // relative paths resolve against the document
  std::optional<GeneratorParams> generator;
  std::size_t events = 0;  // generator only

  bool operator==(const TraceSource&) const = default;
};

struct UEConfig {
  double weight = 1.0;
  int security = 1;
  OffloadDemand demand;
  ChannelState channel;
  EnergyModel energy;
  TraceSource trace;

  bool operator==(const UEConfig&) const = default;
};

struct ENConfig {
  double bandwidth_hz = 0.0;
  std::int64_t compute_units = 0;
  int security = 1;
  std::optional<double> power_pool_w;

  bool operator==(const ENConfig&) const = default;
};

struct ScenarioConfig {
  int security_levels = 1;
  double b_max_hz = 0.0;
  double p_max_w = 0.0;
  std::uint64_t seed = 0;
  std::vector<UEConfig> ues;
  std::vector<ENConfig> ens;

  bool operator==(const ScenarioConfig&) const = default;
};

namespace detail {

// Typed, path-aware access to one JSON object. Rejects unknown keys.
class FieldReader {
 public:
  FieldReader(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) throw ParseError(where(), "expected an object");
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? std::string("$") : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return object_.contains(key); }

  const json& raw(const std::string& key) const {
    seen_.insert(key);
    if (!object_.contains(key)) throw ParseError(where(key), "missing field");
    return object_.at(key);
  }

  double number(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_number()) throw ParseError(where(key), "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError(where(key), "must be finite");
    return d;
  }

  double positive(const std::string& key) const {
    const double d = number(key);
    if (!(d > 0.0)) throw ParseError(where(key), "must be > 0");
    return d;
  }

  double nonnegative(const std::string& key) const {
    const double d = number(key);
    if (!(d >= 0.0)) throw ParseError(where(key), "must be >= 0");
    return d;
  }

  std::int64_t integer(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_number_integer()) throw ParseError(where(key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::int64_t integer_in(const std::string& key, std::int64_t lo, std::int64_t hi) const {
    const auto v = integer(key);
    if (v < lo || v > hi) {
      throw ParseError(where(key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return v;
  }

  std::uint64_t unsigned_integer(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_number_unsigned()) throw ParseError(where(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& key) const {
    const auto& v = raw(key);
    if (!v.is_string()) throw ParseError(where(key), "expected a string");
    return v.get<std::string>();
  }

  void reject_unknown() const {
    for (const auto& [key, _] : object_.items()) {
      if (!seen_.count(key)) throw ParseError(where(key), "unknown field");
    }
  }

 private:
  const json& object_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

inline GeneratorParams parse_generator(const FieldReader& r, std::size_t& events) {
  GeneratorParams g;
  g.layer_count = static_cast<std::size_t>(r.integer_in("layer_count", 1, 1'000));
  g.critical_prior = r.number("critical_prior");
  if (g.critical_prior < 0.0 || g.critical_prior > 1.0) throw ParseError(r.where("critical_prior"), "must lie in [0,1]");
  g.critical_drift = r.number("critical_drift");
  g.normal_drift = r.number("normal_drift");
  g.noise_std = r.nonnegative("noise_std");
  g.seed = r.unsigned_integer("seed");
  events = static_cast<std::size_t>(r.integer_in("events", 1, 100'000'000));
  r.reject_unknown();
  return g;
}

inline UEConfig parse_ue(const json& j, const std::string& path, int levels) {
  FieldReader r(j, path);
  UEConfig ue;
  ue.weight = r.positive("weight");
  ue.security = static_cast<int>(r.integer_in("security", 1, levels));
  ue.demand.feature_bits = r.positive("feature_bits");
  ue.demand.deadline = r.positive("deadline_s");

  FieldReader ch(r.raw("channel"), r.where("channel"));
  ue.channel.gain = ch.nonnegative("gain");
  ue.channel.noise_psd = ch.positive("noise_psd_w_per_hz");
  ue.channel.eav_gain = ch.nonnegative("eav_gain");
  ue.channel.eav_noise_psd = ch.positive("eav_noise_psd_w_per_hz");
  ch.reject_unknown();

  FieldReader en(r.raw("energy"), r.where("energy"));
  ue.energy.joules_per_access = en.nonnegative("joules_per_access");
  const auto& counts = en.raw("access_counts");
  if (!counts.is_array()) throw ParseError(en.where("access_counts"), "expected an array");
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const std::string where = en.where("access_counts") + "[" + std::to_string(k) + "]";
    if (!counts[k].is_number_integer() || counts[k].get<std::int64_t>() < 0) {
      throw ParseError(where, "expected a non-negative integer");
    }
    ue.energy.access_counts.push_back(counts[k].get<std::int64_t>());
  }
  en.reject_unknown();

  FieldReader tr(r.raw("trace"), r.where("trace"));
  const bool has_file = tr.has("file");
  const bool has_gen = tr.has("generator");
  if (has_file == has_gen) throw ParseError(tr.where(), "exactly one of 'file' or 'generator' is required");
  if (has_file) {
    ue.trace.file = tr.string("file");
  } else {
    FieldReader gen(tr.raw("generator"), tr.where("generator"));
    ue.trace.generator = parse_generator(gen, ue.trace.events);
  }
  tr.reject_unknown();
  r.reject_unknown();
  return ue;
}

inline ENConfig parse_en(const json& j, const std::string& path, int levels) {
  FieldReader r(j, path);
  ENConfig en;
  en.bandwidth_hz = r.nonnegative("bandwidth_hz");
  en.compute_units = r.integer_in("compute_units", 0, std::numeric_limits<std::int32_t>::max());
  en.security = static_cast<int>(r.integer_in("security", 1, levels));
  if (r.has("power_pool_w")) en.power_pool_w = r.nonnegative("power_pool_w");
  r.reject_unknown();
  return en;
}

}  // namespace detail

// Fully validates the document; any problem raises ParseError with the
// offending field path and nothing partial is returned.
inline ScenarioConfig parse_scenario(const json& doc) {
  detail::FieldReader r(doc, "");
  ScenarioConfig cfg;
  cfg.security_levels = static_cast<int>(r.integer_in("security_levels", 1, 1'000));
  cfg.b_max_hz = r.nonnegative("b_max_hz");
  cfg.p_max_w = r.nonnegative("p_max_w");
  cfg.seed = r.unsigned_integer("seed");

  const auto& ues = r.raw("ues");
  if (!ues.is_array() || ues.empty()) throw ParseError("ues", "expected a non-empty array");
  for (std::size_t i = 0; i < ues.size(); ++i) {
    cfg.ues.push_back(detail::parse_ue(ues[i], "ues[" + std::to_string(i) + "]", cfg.security_levels));
  }
  const auto& ens = r.raw("ens");
  if (!ens.is_array() || ens.empty()) throw ParseError("ens", "expected a non-empty array");
  for (std::size_t j = 0; j < ens.size(); ++j) {
    cfg.ens.push_back(detail::parse_en(ens[j], "ens[" + std::to_string(j) + "]", cfg.security_levels));
  }
  r.reject_unknown();
  return cfg;
}

inline ScenarioConfig parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_scenario(doc);
}

inline json serialize_scenario(const ScenarioConfig& cfg) {
  json doc;
  doc["security_levels"] = cfg.security_levels;
  doc["b_max_hz"] = cfg.b_max_hz;
  doc["p_max_w"] = cfg.p_max_w;
  doc["seed"] = cfg.seed;
  doc["ues"] = json::array();
  for (const auto& ue : cfg.ues) {
    json u;
    u["weight"] = ue.weight;
    u["security"] = ue.security;
    u["feature_bits"] = ue.demand.feature_bits;
    u["deadline_s"] = ue.demand.deadline;
    u["channel"] = {{"gain", ue.channel.gain},
                    {"noise_psd_w_per_hz", ue.channel.noise_psd},
                    {"eav_gain", ue.channel.eav_gain},
                    {"eav_noise_psd_w_per_hz", ue.channel.eav_noise_psd}};
    u["energy"] = {{"joules_per_access", ue.energy.joules_per_access},
                   {"access_counts", ue.energy.access_counts}};
    if (ue.trace.file) {
      u["trace"] = {{"file", *ue.trace.file}};
    } else {
      const auto& g = *ue.trace.generator;
      u["trace"] = {{"generator",
                     {{"layer_count", g.layer_count},
                      {"critical_prior", g.critical_prior},
                      {"critical_drift", g.critical_drift},
                      {"normal_drift", g.normal_drift},
                      {"noise_std", g.noise_std},
                      {"seed", g.seed},
                      {"events", ue.trace.events}}}};
    }
    doc["ues"].push_back(std::move(u));
  }
  doc["ens"] = json::array();
  for (const auto& en : cfg.ens) {
    json e{{"bandwidth_hz", en.bandwidth_hz}, {"compute_units", en.compute_units}, {"security", en.security}};
    if (en.power_pool_w) e["power_pool_w"] = *en.power_pool_w;
    doc["ens"].push_back(std::move(e));
  }
  return doc;
}

inline ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open scenario " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

inline void save_scenario_config(const ScenarioConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write scenario " + path.string());
  out << serialize_scenario(cfg).dump(2) << '\n';
}

// Materializes every trace source. File paths resolve against base_dir.
inline Scenario build_scenario(const ScenarioConfig& cfg, const std::filesystem::path& base_dir = {}) {
  Scenario s;
  s.security_levels = cfg.security_levels;
  s.b_max = cfg.b_max_hz;
  s.p_max = cfg.p_max_w;
  for (std::size_t i = 0; i < cfg.ues.size(); ++i) {
    const auto& u = cfg.ues[i];
    const std::string where = "ues[" + std::to_string(i) + "].trace";
    UEProfile ue;
    ue.weight = u.weight;
    ue.security = u.security;
    ue.demand = u.demand;
    ue.channel = u.channel;
    ue.energy = u.energy;
    try {
      if (u.trace.file) {
        std::filesystem::path p(*u.trace.file);
        if (p.is_relative()) p = base_dir / p;
        ue.stream = std::make_shared<const EventStream>(load_stream(p));
      } else {
        ue.stream = std::make_shared<const EventStream>(generate_stream(*u.trace.generator, u.trace.events));
      }
    } catch (const ParseError& e) {
      throw ParseError(where, e.what());
    } catch (const Error& e) {
      throw ParseError(where, e.what());
    }
    if (stream_stats(*ue.stream).critical == 0) {
      throw ParseError(where, "stream has no critical events, utility is undefined");
    }
    s.ues.push_back(std::move(ue));
  }
  for (const auto& e : cfg.ens) {
    s.ens.push_back({e.bandwidth_hz, e.compute_units, e.security, e.power_pool_w});
  }
  validate_scenario(s);
  return s;
}

// ---------------------------------------------------------------------------
// Random scenarios

struct RandomScenarioParams {
  std::size_t users = 3;
  std::size_t nodes = 2;
  int security_levels = 2;
  std::size_t events_per_user = 40;
  std::size_t layer_count = 4;
  std::int64_t min_compute = 2;
  std::int64_t max_compute = 8;
  // Probability that a user's legitimate channel beats the eavesdropper's.
  double advantage_probability = 1.0;
};

// Deterministic in seed. Node 0 always sits at level 1 so every user has an
// admissible node; each generated stream contains at least one critical
// event.
inline ScenarioConfig random_scenario(const RandomScenarioParams& p, std::uint64_t seed) {
  if (p.users == 0 || p.nodes == 0) throw InvalidInputError("random_scenario: users and nodes must be >= 1");
  if (p.security_levels < 1) throw InvalidInputError("random_scenario: security_levels must be >= 1");
  if (p.events_per_user == 0 || p.layer_count == 0) {
    throw InvalidInputError("random_scenario: events_per_user and layer_count must be >= 1");
  }
  if (p.min_compute < 0 || p.max_compute < p.min_compute) throw InvalidInputError("random_scenario: bad compute range");

  std::mt19937_64 rng(seed);
  const auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  const auto pick = [&](std::int64_t lo, std::int64_t hi) { return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng); };

  ScenarioConfig cfg;
  cfg.security_levels = p.security_levels;
  cfg.b_max_hz = 1e6;
  cfg.p_max_w = 0.2;
  cfg.seed = seed;

  for (std::size_t i = 0; i < p.users; ++i) {
    UEConfig ue;
    ue.weight = uniform(0.5, 2.0);
    ue.security = static_cast<int>(pick(1, p.security_levels));
    ue.demand.feature_bits = uniform(2e4, 1e5);
    ue.demand.deadline = uniform(0.2, 1.0);
    ue.channel.noise_psd = 1e-13;
    ue.channel.eav_noise_psd = 1e-13;
    ue.channel.gain = std::pow(10.0, uniform(-7.0, -6.0));
    const bool advantage = uniform(0.0, 1.0) < p.advantage_probability;
    ue.channel.eav_gain = ue.channel.gain * (advantage ? uniform(0.05, 0.6) : uniform(1.0, 2.0));
    ue.energy.joules_per_access = 1e-9;
    for (int k = 0; k < 4; ++k) ue.energy.access_counts.push_back(pick(1'000, 50'000));

    GeneratorParams g;
    g.layer_count = p.layer_count;
    g.critical_prior = uniform(0.2, 0.5);
    g.critical_drift = uniform(0.4, 1.0);
    g.normal_drift = -uniform(0.4, 1.0);
    g.noise_std = uniform(0.6, 1.2);
    g.seed = rng();
    while (stream_stats(generate_stream(g, p.events_per_user)).critical == 0) ++g.seed;
    ue.trace.generator = g;
    ue.trace.events = p.events_per_user;
    cfg.ues.push_back(std::move(ue));
  }
  const double share = std::max(1.0, static_cast<double>(p.users) / static_cast<double>(p.nodes));
  for (std::size_t j = 0; j < p.nodes; ++j) {
    ENConfig en;
    en.bandwidth_hz = cfg.b_max_hz * uniform(0.6, 1.0) * (share + 0.5);
    en.compute_units = pick(p.min_compute, p.max_compute);
    en.security = j == 0 ? 1 : static_cast<int>(pick(1, p.security_levels));
    cfg.ens.push_back(en);
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Result bundles

inline constexpr int kBundleSchemaVersion = 1;

inline std::string sha256_hex(const std::string& data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  std::ostringstream out;
  for (unsigned char c : digest) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(c);
  return out.str();
}

// Digest of the canonical (sorted-key, compact) document.
inline std::string config_digest(const ScenarioConfig& cfg) { return sha256_hex(serialize_scenario(cfg).dump()); }

struct ResultBundle {
  ScenarioConfig config;
  std::string config_digest;
  AllocationPlan plan;
  SolveReport report;
  std::optional<std::string> generated_at;  // omitted in deterministic runs
};

namespace detail {

inline json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline std::optional<double> read_optional(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

template <typename T>
json matrix_json(const Matrix<T>& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
Matrix<T> matrix_from_json(const json& j, std::size_t rows, std::size_t cols) {
  Matrix<T> m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<T>();
  }
  return m;
}

inline json bound_json(const BoundResult& b) {
  return {{"value", finite_or_null(b.value)}, {"feasible", b.feasible}, {"notes", b.notes}};
}

inline BoundResult bound_from_json(const json& j) {
  BoundResult b;
  b.value = j.at("value").is_null() ? -std::numeric_limits<double>::infinity() : j.at("value").get<double>();
  b.feasible = j.at("feasible").get<bool>();
  b.notes = j.at("notes").get<std::vector<std::string>>();
  return b;
}

inline Constraint constraint_from_name(const std::string& name) {
  for (int c = 0; c <= static_cast<int>(Constraint::node_power_pool); ++c) {
    if (name == constraint_name(static_cast<Constraint>(c))) return static_cast<Constraint>(c);
  }
  throw ParseError("report.violations", "unknown constraint " + name);
}

}  // namespace detail

inline json bundle_to_json(const ResultBundle& b) {
  const auto& r = b.report;
  json plan{{"assignment", detail::matrix_json(b.plan.assignment)},
            {"bandwidth_hz", detail::matrix_json(b.plan.bandwidth)},
            {"power_w", detail::matrix_json(b.plan.power)},
            {"compute_units", detail::matrix_json(b.plan.compute)},
            {"thresholds", json::array()}};
  for (const auto& t : b.plan.thresholds) plan["thresholds"].push_back({{"lower", t.lower}, {"upper", t.upper}});

  json violations = json::array();
  for (const auto& v : r.violations) {
    violations.push_back({{"constraint", constraint_name(v.constraint)},
                          {"user", v.user ? json(*v.user) : json(nullptr)},
                          {"node", v.node ? json(*v.node) : json(nullptr)},
                          {"detail", v.detail}});
  }
  json diagnostics = json::array();
  json metrics = json::array();
  for (const auto& d : r.diagnostics) {
    diagnostics.push_back({{"node", d.node},
                           {"bandwidth_hz", d.bandwidth},
                           {"power_w", d.power},
                           {"compute_units", d.compute},
                           {"offload_time_s", detail::finite_or_null(d.offload_time)},
                           {"offload_energy_j", detail::finite_or_null(d.offload_energy)},
                           {"local_energy_j", d.local_energy}});
    metrics.push_back({{"tp", d.counts.tp},
                       {"fp", d.counts.fp},
                       {"tn", d.counts.tn},
                       {"fn", d.counts.fn},
                       {"car", detail::optional_number(d.metrics.car)},
                       {"fpr", detail::optional_number(d.metrics.fpr)},
                       {"fnr", detail::optional_number(d.metrics.fnr)},
                       {"ofr", detail::optional_number(d.metrics.ofr)},
                       {"utility", detail::optional_number(d.metrics.utility)}});
  }
  json report{{"objective", r.objective},
              {"per_user_utility", r.per_user_utility},
              {"iterations", r.iterations},
              {"objective_history", r.objective_history},
              {"feasible", r.feasible},
              {"violations", std::move(violations)},
              {"lower_bound", detail::bound_json(r.lower)},
              {"upper_bound", detail::bound_json(r.upper)},
              {"relative_gap_pct", detail::optional_number(r.relative_gap_pct)},
              {"diagnostics", std::move(diagnostics)}};
  json out{{"schema_version", kBundleSchemaVersion},
           {"config_digest", b.config_digest},
           {"config", serialize_scenario(b.config)},
           {"plan", std::move(plan)},
           {"report", std::move(report)},
           {"metrics", std::move(metrics)}};
  if (b.generated_at) out["generated_at"] = *b.generated_at;
  return out;
}

// Structural check of a bundle document; returns one message per problem.
inline std::vector<std::string> validate_bundle_json(const json& j) {
  std::vector<std::string> errors;
  const auto need = [&](const json& obj, const std::string& path, const std::string& key, auto predicate,
                        const char* type) {
    if (!obj.is_object() || !obj.contains(key)) {
      errors.push_back(path + key + ": missing");
      return false;
    }
    if (!predicate(obj.at(key))) {
      errors.push_back(path + key + ": expected " + type);
      return false;
    }
    return true;
  };
  const auto is_int = [](const json& v) { return v.is_number_integer(); };
  const auto is_num = [](const json& v) { return v.is_number(); };
  const auto is_num_or_null = [](const json& v) { return v.is_number() || v.is_null(); };
  const auto is_str = [](const json& v) { return v.is_string(); };
  const auto is_bool = [](const json& v) { return v.is_boolean(); };
  const auto is_obj = [](const json& v) { return v.is_object(); };
  const auto is_arr = [](const json& v) { return v.is_array(); };

  if (!j.is_object()) return {"$: expected an object"};
  if (need(j, "", "schema_version", is_int, "integer") && j["schema_version"] != kBundleSchemaVersion) {
    errors.push_back("schema_version: unsupported value " + j["schema_version"].dump());
  }
  if (need(j, "", "config_digest", is_str, "string") && j["config_digest"].get<std::string>().size() != 64) {
    errors.push_back("config_digest: expected 64 hex characters");
  }
  if (need(j, "", "config", is_obj, "object")) {
    try {
      parse_scenario(j["config"]);
    } catch (const ParseError& e) {
      errors.push_back(std::string("config.") + e.what());
    }
  }
  std::size_t users = 0;
  std::size_t nodes = 0;
  if (j.contains("config") && j["config"].is_object()) {
    users = j["config"].value("ues", json::array()).size();
    nodes = j["config"].value("ens", json::array()).size();
  }
  const auto check_matrix = [&](const json& plan, const std::string& key, bool integral) {
    if (!need(plan, "plan.", key, is_arr, "array")) return;
    const auto& m = plan[key];
    bool ok = m.size() == users;
    for (const auto& row : m) {
      ok = ok && row.is_array() && row.size() == nodes;
      if (!ok) break;
      for (const auto& v : row) ok = ok && (integral ? v.is_number_integer() : v.is_number());
    }
    if (!ok) errors.push_back("plan." + key + ": expected " + std::to_string(users) + "x" + std::to_string(nodes) + " matrix");
  };
  if (need(j, "", "plan", is_obj, "object")) {
    const auto& plan = j["plan"];
    check_matrix(plan, "assignment", true);
    check_matrix(plan, "bandwidth_hz", false);
    check_matrix(plan, "power_w", false);
    check_matrix(plan, "compute_units", true);
    if (need(plan, "plan.", "thresholds", is_arr, "array")) {
      if (plan["thresholds"].size() != users) errors.push_back("plan.thresholds: expected one pair per user");
      for (const auto& t : plan["thresholds"]) {
        need(t, "plan.thresholds[].", "lower", is_num, "number");
        need(t, "plan.thresholds[].", "upper", is_num, "number");
      }
    }
  }
  if (need(j, "", "report", is_obj, "object")) {
    const auto& r = j["report"];
    need(r, "report.", "objective", is_num, "number");
    need(r, "report.", "per_user_utility", is_arr, "array");
    need(r, "report.", "iterations", is_int, "integer");
    need(r, "report.", "objective_history", is_arr, "array");
    need(r, "report.", "feasible", is_bool, "boolean");
    need(r, "report.", "violations", is_arr, "array");
    need(r, "report.", "relative_gap_pct", is_num_or_null, "number or null");
    for (const char* key : {"lower_bound", "upper_bound"}) {
      if (need(r, "report.", key, is_obj, "object")) {
        const std::string path = std::string("report.") + key + ".";
        need(r[key], path, "value", is_num_or_null, "number or null");
        need(r[key], path, "feasible", is_bool, "boolean");
        need(r[key], path, "notes", is_arr, "array");
      }
    }
    if (need(r, "report.", "diagnostics", is_arr, "array")) {
      if (r["diagnostics"].size() != users) errors.push_back("report.diagnostics: expected one entry per user");
      for (const auto& d : r["diagnostics"]) {
        need(d, "report.diagnostics[].", "node", is_int, "integer");
        need(d, "report.diagnostics[].", "bandwidth_hz", is_num, "number");
        need(d, "report.diagnostics[].", "power_w", is_num, "number");
        need(d, "report.diagnostics[].", "compute_units", is_int, "integer");
        need(d, "report.diagnostics[].", "offload_time_s", is_num_or_null, "number or null");
        need(d, "report.diagnostics[].", "offload_energy_j", is_num_or_null, "number or null");
        need(d, "report.diagnostics[].", "local_energy_j", is_num, "number");
      }
    }
  }
  if (need(j, "", "metrics", is_arr, "array")) {
    if (j["metrics"].size() != users) errors.push_back("metrics: expected one entry per user");
    for (const auto& m : j["metrics"]) {
      for (const char* key : {"tp", "fp", "tn", "fn"}) need(m, "metrics[].", key, is_int, "integer");
      for (const char* key : {"car", "fpr", "fnr", "ofr", "utility"}) {
        need(m, "metrics[].", key, is_num_or_null, "number or null");
      }
    }
  }
  if (j.contains("generated_at") && !j["generated_at"].is_string()) errors.push_back("generated_at: expected string");
  return errors;
}

struct BundleReadResult {
  ResultBundle bundle;
  std::vector<std::string> warnings;
};

inline BundleReadResult bundle_from_json(const json& j) {
  if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_number_integer()) {
    throw ParseError("schema_version", "missing or not an integer");
  }
  if (j["schema_version"].get<int>() != kBundleSchemaVersion) {
    throw SchemaVersionError("result bundle schema_version " + j["schema_version"].dump() +
                             " is not supported (expected " + std::to_string(kBundleSchemaVersion) + ")");
  }
  if (const auto errors = validate_bundle_json(j); !errors.empty()) throw ParseError("bundle", errors.front());

  BundleReadResult out;
  auto& b = out.bundle;
  b.config = parse_scenario(j["config"]);
  b.config_digest = j["config_digest"].get<std::string>();
  if (b.config_digest != config_digest(b.config)) {
    out.warnings.push_back("config digest mismatch: bundle integrity cannot be confirmed");
  }
  if (j.contains("generated_at")) b.generated_at = j["generated_at"].get<std::string>();

  const std::size_t n = b.config.ues.size();
  const std::size_t m = b.config.ens.size();
  const auto& plan = j["plan"];
  b.plan.assignment = detail::matrix_from_json<std::uint8_t>(plan["assignment"], n, m);
  b.plan.bandwidth = detail::matrix_from_json<double>(plan["bandwidth_hz"], n, m);
  b.plan.power = detail::matrix_from_json<double>(plan["power_w"], n, m);
  b.plan.compute = detail::matrix_from_json<std::int64_t>(plan["compute_units"], n, m);
  for (const auto& t : plan["thresholds"]) b.plan.thresholds.push_back({t["lower"].get<double>(), t["upper"].get<double>()});

  const auto& r = j["report"];
  auto& rep = b.report;
  rep.objective = r["objective"].get<double>();
  rep.per_user_utility = r["per_user_utility"].get<std::vector<double>>();
  rep.iterations = r["iterations"].get<std::size_t>();
  rep.objective_history = r["objective_history"].get<std::vector<double>>();
  rep.feasible = r["feasible"].get<bool>();
  for (const auto& v : r["violations"]) {
    Violation viol{detail::constraint_from_name(v.at("constraint").get<std::string>()), std::nullopt, std::nullopt,
                   v.at("detail").get<std::string>()};
    if (!v.at("user").is_null()) viol.user = v["user"].get<std::size_t>();
    if (!v.at("node").is_null()) viol.node = v["node"].get<std::size_t>();
    rep.violations.push_back(std::move(viol));
  }
  rep.lower = detail::bound_from_json(r["lower_bound"]);
  rep.upper = detail::bound_from_json(r["upper_bound"]);
  rep.relative_gap_pct = detail::read_optional(r["relative_gap_pct"]);
  const auto inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r["diagnostics"].size(); ++i) {
    const auto& d = r["diagnostics"][i];
    const auto& mj = j["metrics"][i];
    UserDiagnostics u;
    u.node = d["node"].get<std::size_t>();
    u.bandwidth = d["bandwidth_hz"].get<double>();
    u.power = d["power_w"].get<double>();
    u.compute = d["compute_units"].get<std::int64_t>();
    u.offload_time = d["offload_time_s"].is_null() ? inf : d["offload_time_s"].get<double>();
    u.offload_energy = d["offload_energy_j"].is_null() ? inf : d["offload_energy_j"].get<double>();
    u.local_energy = d["local_energy_j"].get<double>();
    u.counts = {mj["tp"].get<std::size_t>(), mj["fp"].get<std::size_t>(), mj["tn"].get<std::size_t>(),
                mj["fn"].get<std::size_t>()};
    u.metrics = {detail::read_optional(mj["car"]), detail::read_optional(mj["fpr"]), detail::read_optional(mj["fnr"]),
                 detail::read_optional(mj["ofr"]), detail::read_optional(mj["utility"])};
    rep.diagnostics.push_back(u);
  }
  return out;
}

inline void write_bundle(const ResultBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write bundle " + path.string());
  out << bundle_to_json(b).dump(2) << '\n';
}

inline BundleReadResult read_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open bundle " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace fairedge
