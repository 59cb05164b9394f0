#pragma once

// Linear/flat/unclear categorization of a job's memory footprint against its
// input size, plus extrapolation of the footprint to the full dataset.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ruya/error.hpp"

namespace ruya {

inline constexpr double kBytesPerGb = 1024.0 * 1024.0 * 1024.0;

struct MemorySample {
  std::uint64_t input_bytes = 0;
  std::uint64_t job_memory_bytes = 0;
};

enum class MemoryCategory { Linear, Flat, Unclear };

inline std::string_view to_string(MemoryCategory c) {
  switch (c) {
    case MemoryCategory::Linear: return "linear";
    case MemoryCategory::Flat: return "flat";
    case MemoryCategory::Unclear: return "unclear";
  }
  return "unclear";
}

inline MemoryCategory parse_category(std::string_view s) {
  if (s == "linear") return MemoryCategory::Linear;
  if (s == "flat") return MemoryCategory::Flat;
  if (s == "unclear") return MemoryCategory::Unclear;
  throw InputError("unknown memory category '" + std::string(s) + "' (expected linear, flat or unclear)");
}

struct R2Thresholds {
  double low = 0.1;
  double high = 0.99;

  void validate() const {
    if (!(low > 0.0 && low < high && high < 1.0)) {
      throw ConfigError("R2 thresholds must satisfy 0 < low < high < 1");
    }
  }
};

// Fitted model. slope/intercept are meaningful for Linear, mean_bytes for Flat;
// all three are always populated from the fit so reports can echo them.
struct MemoryModel {
  MemoryCategory category = MemoryCategory::Unclear;
  double slope = 0.0;      // job bytes per input byte
  double intercept = 0.0;  // bytes
  double mean_bytes = 0.0;
  double r2 = 0.0;
  R2Thresholds thresholds;
};

struct MemoryRequirement {
  double job_gb = 0.0;
  bool clamped = false;  // extrapolation came out non-positive and was floored
};

inline MemoryCategory categorize(double r2, const R2Thresholds& t) {
  if (r2 >= t.high) return MemoryCategory::Linear;
  if (r2 < t.low) return MemoryCategory::Flat;
  return MemoryCategory::Unclear;
}

// Ordinary least squares of job memory on input size, scored with R^2 on the
// training points themselves.
inline MemoryModel fit_memory_model(std::span<const MemorySample> samples, const R2Thresholds& thresholds = {}) {
  thresholds.validate();
  if (samples.size() < 3) {
    throw InsufficientDataError("need at least 3 memory samples, got " + std::to_string(samples.size()));
  }
  const auto n = static_cast<double>(samples.size());
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (const auto& s : samples) {
    if (s.input_bytes == 0) throw InputError("memory sample with zero input size");
    mean_x += static_cast<double>(s.input_bytes);
    mean_y += static_cast<double>(s.job_memory_bytes);
  }
  mean_x /= n;
  mean_y /= n;

  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& s : samples) {
    const double dx = static_cast<double>(s.input_bytes) - mean_x;
    const double dy = static_cast<double>(s.job_memory_bytes) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) {
    throw InsufficientDataError("memory samples need at least 2 distinct input sizes");
  }

  MemoryModel model;
  model.thresholds = thresholds;
  model.slope = sxy / sxx;
  model.intercept = mean_y - model.slope * mean_x;
  model.mean_bytes = mean_y;

  if (syy == 0.0) {
    // constant footprint: R^2 is undefined, pinned to 0
    model.r2 = 0.0;
    model.category = MemoryCategory::Flat;
    return model;
  }

  double ss_res = 0.0;
  for (const auto& s : samples) {
    const double r = static_cast<double>(s.job_memory_bytes) - (model.slope * static_cast<double>(s.input_bytes) + model.intercept);
    ss_res += r * r;
  }
  model.r2 = std::min(1.0, 1.0 - ss_res / syy);
  model.category = categorize(model.r2, thresholds);
  return model;
}

// Smallest requirement reported when the fitted line goes non-positive.
inline constexpr double kRequirementFloorGb = 1.0 / 1024.0;

inline MemoryRequirement extrapolate_requirement(const MemoryModel& model, std::uint64_t full_dataset_bytes,
                                                 std::ostream* warn = &std::cerr) {
  if (model.category != MemoryCategory::Linear) {
    throw CategoryError("memory requirement can only be extrapolated from a linear model (got " +
                        std::string(to_string(model.category)) + ")");
  }
  if (full_dataset_bytes == 0) throw InputError("full dataset size must be positive");
  const double bytes = model.slope * static_cast<double>(full_dataset_bytes) + model.intercept;
  MemoryRequirement req{bytes / kBytesPerGb, false};
  if (!(req.job_gb > kRequirementFloorGb)) {
    if (warn) {
      *warn << "warning: extrapolated memory requirement " << req.job_gb << " GB is not positive; clamped to "
            << kRequirementFloorGb << " GB\n";
    }
    req.job_gb = kRequirementFloorGb;
    req.clamped = true;
  }
  return req;
}

// Plain-text sample table: one "input_bytes job_memory_bytes" pair per line,
// separated by whitespace or a comma. '#' starts a comment; a non-numeric
// first line is treated as a header.
inline std::vector<MemorySample> parse_sample_table(std::istream& in) {
  std::vector<MemorySample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (auto& ch : line) {
      if (ch == ',' || ch == ';' || ch == '\t' || ch == '\r') ch = ' ';
    }
    std::istringstream fields(line);
    std::string a;
    std::string b;
    std::string extra;
    if (!(fields >> a)) continue;
    if (!(fields >> b) || (fields >> extra)) throw ParseError("expected two columns: input_bytes job_memory_bytes", lineno);
    const bool numeric = std::isdigit(static_cast<unsigned char>(a.front())) != 0;
    if (!numeric && out.empty()) continue;  // header
    try {
      std::size_t pa = 0;
      std::size_t pb = 0;
      const auto x = std::stoull(a, &pa);
      const auto y = std::stoull(b, &pb);
      if (pa != a.size() || pb != b.size()) throw std::invalid_argument("trailing characters");
      out.push_back({x, y});
    } catch (const std::exception&) {
      throw ParseError("malformed sample row '" + line + "'", lineno);
    }
  }
  return out;
}

inline nlohmann::json memory_model_to_json(const MemoryModel& m) {
  return {{"category", std::string(to_string(m.category))},
          {"slope", m.slope},
          {"intercept_bytes", m.intercept},
          {"mean_bytes", m.mean_bytes},
          {"r2", m.r2},
          {"r2_low", m.thresholds.low},
          {"r2_high", m.thresholds.high}};
}

inline MemoryModel memory_model_from_json(const nlohmann::json& j) {
  try {
    MemoryModel m;
    m.category = parse_category(j.at("category").get<std::string>());
    m.slope = j.value("slope", 0.0);
    m.intercept = j.value("intercept_bytes", 0.0);
    m.mean_bytes = j.value("mean_bytes", 0.0);
    m.r2 = j.value("r2", 0.0);
    m.thresholds.low = j.value("r2_low", 0.1);
    m.thresholds.high = j.value("r2_high", 0.99);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed memory model: ") + e.what());
  }
}

}  // namespace ruya
