#pragma once

// Event streams: per-layer confidence scores of a binary early-exit
// classifier, a synthetic generator, and the trace CSV format.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fairedge/error.hpp"

namespace fairedge {

enum class Label : std::uint8_t { normal = 0, critical = 1 };

inline std::string_view to_string(Label label) {
  return label == Label::critical ? "critical" : "normal";
}

// Raw outputs of one exit head.
struct LayerLogits {
  double critical_logit = 0.0;
  double normal_logit = 0.0;
};

struct ConfidenceTrace {
  std::int64_t event_id = 0;
  Label true_label = Label::normal;
  std::vector<double> confidences;  // one per layer, each in (0,1)

  bool operator==(const ConfidenceTrace&) const = default;
};

// Softmax probability of the critical class, shifted by the larger logit so
// that large magnitudes do not overflow.
inline double confidence_from_logits(LayerLogits logits) {
  if (!std::isfinite(logits.critical_logit) || !std::isfinite(logits.normal_logit)) {
    throw InvalidInputError("confidence_from_logits: logits must be finite");
  }
  const double top = std::max(logits.critical_logit, logits.normal_logit);
  const double c = std::exp(logits.critical_logit - top);
  const double n = std::exp(logits.normal_logit - top);
  return c / (c + n);
}

// An ordered, validated collection of traces sharing one layer count.
class EventStream {
 public:
  explicit EventStream(std::size_t layer_count) : layer_count_(layer_count) {
    if (layer_count_ == 0) throw InvalidInputError("EventStream: layer count must be >= 1");
  }

  EventStream(std::size_t layer_count, std::vector<ConfidenceTrace> traces)
      : EventStream(layer_count) {
    std::unordered_set<std::int64_t> ids;
    for (const auto& t : traces) {
      check_trace(t);
      if (!ids.insert(t.event_id).second) {
        throw InvalidInputError("EventStream: duplicate event_id " + std::to_string(t.event_id));
      }
    }
    traces_ = std::move(traces);
  }

  std::size_t layer_count() const noexcept { return layer_count_; }
  std::size_t size() const noexcept { return traces_.size(); }
  bool empty() const noexcept { return traces_.empty(); }
  const std::vector<ConfidenceTrace>& traces() const noexcept { return traces_; }
  const ConfidenceTrace& operator[](std::size_t i) const { return traces_[i]; }
  auto begin() const noexcept { return traces_.begin(); }
  auto end() const noexcept { return traces_.end(); }

  bool operator==(const EventStream&) const = default;

 private:
  void check_trace(const ConfidenceTrace& t) const {
    if (t.confidences.size() != layer_count_) {
      throw InvalidInputError("EventStream: event " + std::to_string(t.event_id) + " has " +
                              std::to_string(t.confidences.size()) + " layers, expected " +
                              std::to_string(layer_count_));
    }
    for (double c : t.confidences) {
      if (!(c > 0.0 && c < 1.0)) {
        throw InvalidInputError("EventStream: event " + std::to_string(t.event_id) +
                                " has confidence outside (0,1)");
      }
    }
  }

  std::size_t layer_count_;
  std::vector<ConfidenceTrace> traces_;
};

struct StreamCounts {
  std::size_t total = 0;
  std::size_t critical = 0;
  std::size_t normal = 0;

  bool operator==(const StreamCounts&) const = default;
};

inline StreamCounts stream_stats(const EventStream& stream) {
  StreamCounts counts;
  for (const auto& t : stream) {
    if (t.true_label == Label::critical) {
      ++counts.critical;
    } else {
      ++counts.normal;
    }
  }
  counts.total = counts.critical + counts.normal;
  return counts;
}

// Class-conditional random walk on the critical-minus-normal logit. Deeper
// layers accumulate drift, so they tend to be more confident.
struct GeneratorParams {
  std::size_t layer_count = 4;
  double critical_prior = 0.3;
  double critical_drift = 0.8;  // logit units per layer
  double normal_drift = -0.8;   // logit units per layer
  double noise_std = 1.0;       // logit units
  std::uint64_t seed = 0;

  bool operator==(const GeneratorParams&) const = default;
};

inline EventStream generate_stream(const GeneratorParams& params, std::size_t count) {
  if (params.layer_count == 0) throw InvalidInputError("generate_stream: layer_count must be >= 1");
  if (!(params.noise_std >= 0.0)) throw InvalidInputError("generate_stream: noise_std must be >= 0");
  if (!(params.critical_prior >= 0.0 && params.critical_prior <= 1.0)) {
    throw InvalidInputError("generate_stream: critical_prior must lie in [0,1]");
  }
  // Softmax saturates to exactly 0 or 1 beyond ~37 logits; stay well inside.
  constexpr double kLogitClamp = 30.0;

  std::mt19937_64 rng(params.seed);
  std::bernoulli_distribution is_critical(params.critical_prior);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<ConfidenceTrace> traces;
  traces.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ConfidenceTrace trace;
    trace.event_id = static_cast<std::int64_t>(k);
    trace.true_label = is_critical(rng) ? Label::critical : Label::normal;
    const double drift =
        trace.true_label == Label::critical ? params.critical_drift : params.normal_drift;
    trace.confidences.reserve(params.layer_count);
    double diff = 0.0;
    for (std::size_t q = 0; q < params.layer_count; ++q) {
      diff += drift + params.noise_std * noise(rng);
      diff = std::clamp(diff, -kLogitClamp, kLogitClamp);
      trace.confidences.push_back(confidence_from_logits({diff, 0.0}));
    }
    traces.push_back(std::move(trace));
  }
  return EventStream(params.layer_count, std::move(traces));
}

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

template <typename T>
bool parse_number(std::string_view text, T& value) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace detail

// Header `event_id,label,c_1,...,c_L`. Confidences use the shortest decimal
// form that round-trips exactly.
inline void write_stream(const EventStream& stream, std::ostream& out) {
  out << "event_id,label";
  for (std::size_t q = 1; q <= stream.layer_count(); ++q) out << ",c_" << q;
  out << '\n';
  for (const auto& t : stream) {
    out << t.event_id << ',' << to_string(t.true_label);
    for (double c : t.confidences) out << ',' << detail::format_double(c);
    out << '\n';
  }
}

inline EventStream read_stream(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("line 1", "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv(line);
  if (header.size() < 3 || header[0] != "event_id" || header[1] != "label") {
    throw ParseError("line 1", "header must be event_id,label,c_1,...,c_L");
  }
  const std::size_t layers = header.size() - 2;
  for (std::size_t q = 0; q < layers; ++q) {
    if (header[q + 2] != "c_" + std::to_string(q + 1)) {
      throw ParseError("line 1", "expected column c_" + std::to_string(q + 1));
    }
  }

  std::vector<ConfidenceTrace> traces;
  std::unordered_set<std::int64_t> ids;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto fields = detail::split_csv(line);
    if (fields.size() != layers + 2) {
      throw ParseError(where, "expected " + std::to_string(layers + 2) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    ConfidenceTrace trace;
    if (!detail::parse_number(fields[0], trace.event_id)) {
      throw ParseError(where, "bad event_id '" + std::string(fields[0]) + "'");
    }
    if (!ids.insert(trace.event_id).second) {
      throw ParseError(where, "duplicate event_id " + std::to_string(trace.event_id));
    }
    if (fields[1] == "critical") {
      trace.true_label = Label::critical;
    } else if (fields[1] == "normal") {
      trace.true_label = Label::normal;
    } else {
      throw ParseError(where, "label must be critical or normal");
    }
    trace.confidences.reserve(layers);
    for (std::size_t q = 0; q < layers; ++q) {
      double c = 0.0;
      if (!detail::parse_number(fields[q + 2], c)) {
        throw ParseError(where, "bad confidence '" + std::string(fields[q + 2]) + "'");
      }
      if (!(c > 0.0 && c < 1.0)) {
        throw ParseError(where, "confidence " + std::string(fields[q + 2]) + " outside (0,1)");
      }
      trace.confidences.push_back(c);
    }
    traces.push_back(std::move(trace));
  }
  return EventStream(layers, std::move(traces));
}

inline void save_stream(const EventStream& stream, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("save_stream: cannot open " + path.string());
  write_stream(stream, out);
  if (!out) throw Error("save_stream: write failed for " + path.string());
}

inline EventStream load_stream(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("load_stream: cannot open " + path.string());
  return read_stream(in);
}

}  // namespace fairedge
