#pragma once

// Machine catalogs, the enumerated (machine type, scale-out) search space,
// normalized feature encoding, and the memory-aware priority partition.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ruya/error.hpp"
#include "ruya/memory_model.hpp"

namespace ruya {

struct MachineType {
  std::string name;
  int cores = 0;
  double memory_gb = 0.0;
  double price_per_hour = 0.0;

  void validate() const {
    if (name.empty()) throw ConfigError("machine type with empty name");
    if (cores < 1) throw ConfigError("machine type '" + name + "': cores must be >= 1");
    if (!(memory_gb > 0.0)) throw ConfigError("machine type '" + name + "': memory_gb must be > 0");
    if (!(price_per_hour > 0.0)) throw ConfigError("machine type '" + name + "': price_per_hour must be > 0");
  }

  friend bool operator==(const MachineType&, const MachineType&) = default;
};

struct ClusterConfig {
  MachineType machine_type;
  int scale_out = 0;

  [[nodiscard]] double total_memory_gb() const { return scale_out * machine_type.memory_gb; }
  [[nodiscard]] int total_cores() const { return scale_out * machine_type.cores; }
  [[nodiscard]] double hourly_cost() const { return scale_out * machine_type.price_per_hour; }
  [[nodiscard]] double memory_per_core_gb() const { return machine_type.memory_gb / machine_type.cores; }
};

using ConfigId = std::size_t;

// An explicit (machine type name, scale-out) member of a non-rectangular space.
struct ConfigPair {
  std::string machine_type;
  int scale_out = 0;
};

// Immutable list of configurations; a config's id is its position.
// Order is catalog order, then ascending scale-out.
class ConfigSpace {
 public:
  ConfigSpace() = default;

  [[nodiscard]] std::size_t size() const noexcept { return configs_.size(); }
  [[nodiscard]] bool empty() const noexcept { return configs_.empty(); }
  [[nodiscard]] const ClusterConfig& at(ConfigId id) const {
    if (id >= configs_.size()) throw LookupError("config id " + std::to_string(id) + " not in space");
    return configs_[id];
  }
  [[nodiscard]] std::span<const ClusterConfig> configs() const noexcept { return configs_; }
  [[nodiscard]] std::span<const MachineType> catalog() const noexcept { return catalog_; }

  [[nodiscard]] std::optional<ConfigId> find(std::string_view type_name, int scale_out) const {
    for (ConfigId id = 0; id < configs_.size(); ++id) {
      if (configs_[id].machine_type.name == type_name && configs_[id].scale_out == scale_out) return id;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::optional<ConfigId> find(const ClusterConfig& c) const {
    auto id = find(c.machine_type.name, c.scale_out);
    if (id && configs_[*id].machine_type == c.machine_type) return id;
    return std::nullopt;
  }

  static ConfigSpace from_pairs(std::vector<MachineType> catalog, std::span<const ConfigPair> pairs) {
    if (catalog.empty()) throw ConfigError("machine catalog is empty");
    if (pairs.empty()) throw ConfigError("configuration list is empty");
    std::map<std::string, std::size_t, std::less<>> type_index;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      catalog[i].validate();
      if (!type_index.emplace(catalog[i].name, i).second) {
        throw ConfigError("duplicate machine type name '" + catalog[i].name + "'");
      }
    }
    std::vector<std::pair<std::size_t, int>> keyed;
    keyed.reserve(pairs.size());
    for (const auto& p : pairs) {
      auto it = type_index.find(p.machine_type);
      if (it == type_index.end()) throw ConfigError("unknown machine type '" + p.machine_type + "'");
      if (p.scale_out < 1) throw ConfigError("scale-out must be >= 1 (got " + std::to_string(p.scale_out) + ")");
      keyed.emplace_back(it->second, p.scale_out);
    }
    std::sort(keyed.begin(), keyed.end());
    if (std::adjacent_find(keyed.begin(), keyed.end()) != keyed.end()) {
      throw ConfigError("duplicate (machine type, scale-out) pair in configuration list");
    }
    ConfigSpace space;
    space.catalog_ = std::move(catalog);
    space.configs_.reserve(keyed.size());
    for (const auto& [type, scale] : keyed) space.configs_.push_back({space.catalog_[type], scale});
    return space;
  }

 private:
  std::vector<MachineType> catalog_;
  std::vector<ClusterConfig> configs_;
};

// Full cartesian product of catalog and scale-outs.
inline ConfigSpace enumerate_space(std::vector<MachineType> catalog, std::span<const int> scale_outs) {
  if (catalog.empty()) throw ConfigError("machine catalog is empty");
  if (scale_outs.empty()) throw ConfigError("scale-out list is empty");
  std::vector<ConfigPair> pairs;
  pairs.reserve(catalog.size() * scale_outs.size());
  for (const auto& t : catalog) {
    for (int s : scale_outs) pairs.push_back({t.name, s});
  }
  return ConfigSpace::from_pairs(std::move(catalog), pairs);
}

// ---------------------------------------------------------------------------
// Feature encoding

using FeatureVector = std::vector<double>;

inline constexpr std::size_t kFeatureDims = 4;

// Raw (unnormalized) features in encoding order:
// total cores, total memory, scale-out, memory per core.
inline std::array<double, kFeatureDims> raw_features(const ClusterConfig& c) {
  return {static_cast<double>(c.total_cores()), c.total_memory_gb(), static_cast<double>(c.scale_out),
          c.memory_per_core_gb()};
}

// Min-max normalizer over a space. Zero-range dimensions encode as 0.5.
class FeatureEncoder {
 public:
  explicit FeatureEncoder(const ConfigSpace& space) : space_(&space) {
    if (space.empty()) throw ConfigError("cannot encode features over an empty space");
    lo_.fill(std::numeric_limits<double>::infinity());
    hi_.fill(-std::numeric_limits<double>::infinity());
    for (const auto& c : space.configs()) {
      const auto f = raw_features(c);
      for (std::size_t d = 0; d < kFeatureDims; ++d) {
        lo_[d] = std::min(lo_[d], f[d]);
        hi_[d] = std::max(hi_[d], f[d]);
      }
    }
  }

  [[nodiscard]] FeatureVector encode(ConfigId id) const { return normalize(raw_features(space_->at(id))); }

  [[nodiscard]] FeatureVector encode(const ClusterConfig& c) const {
    auto id = space_->find(c);
    if (!id) {
      throw LookupError("config " + c.machine_type.name + " x" + std::to_string(c.scale_out) + " is not in the space");
    }
    return encode(*id);
  }

  [[nodiscard]] std::vector<FeatureVector> encode_all() const {
    std::vector<FeatureVector> out;
    out.reserve(space_->size());
    for (ConfigId id = 0; id < space_->size(); ++id) out.push_back(encode(id));
    return out;
  }

 private:
  [[nodiscard]] FeatureVector normalize(const std::array<double, kFeatureDims>& f) const {
    FeatureVector v(kFeatureDims);
    for (std::size_t d = 0; d < kFeatureDims; ++d) {
      const double range = hi_[d] - lo_[d];
      v[d] = range > 0.0 ? (f[d] - lo_[d]) / range : 0.5;
    }
    return v;
  }

  const ConfigSpace* space_;
  std::array<double, kFeatureDims> lo_{};
  std::array<double, kFeatureDims> hi_{};
};

inline FeatureVector encode_features(const ClusterConfig& config, const ConfigSpace& space) {
  return FeatureEncoder(space).encode(config);
}

// ---------------------------------------------------------------------------
// Priority partition

struct PartitionParams {
  double flat_fraction = 0.15;        // share of the space kept for flat jobs
  double per_node_overhead_gb = 2.0;  // OS + framework memory per node
  double leeway_fraction = 0.10;      // safety margin on the job's own requirement
  double fallback_fraction = 0.10;    // size of each extreme group when nothing fits

  void validate() const {
    if (!(flat_fraction > 0.0 && flat_fraction <= 1.0)) throw ConfigError("flat fraction must be in (0, 1]");
    if (!(per_node_overhead_gb >= 0.0)) throw ConfigError("per-node overhead must be >= 0");
    if (!(leeway_fraction >= 0.0)) throw ConfigError("leeway fraction must be >= 0");
    if (!(fallback_fraction > 0.0 && fallback_fraction <= 0.5)) throw ConfigError("fallback fraction must be in (0, 0.5]");
  }
};

// Both lists hold config ids in ascending order.
struct PriorityPartition {
  std::vector<ConfigId> priority;
  std::vector<ConfigId> remainder;
};

namespace detail {

// ceil(fraction * n), tolerant of fractions like 10/69 that land a hair above an integer.
inline std::size_t fraction_count(double fraction, std::size_t n) {
  const double raw = fraction * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

// Ids ordered by total memory, then hourly cost, then id.
inline std::vector<ConfigId> ids_by_memory(const ConfigSpace& space, bool descending) {
  std::vector<ConfigId> ids(space.size());
  for (ConfigId i = 0; i < ids.size(); ++i) ids[i] = i;
  std::sort(ids.begin(), ids.end(), [&](ConfigId a, ConfigId b) {
    const auto& ca = space.at(a);
    const auto& cb = space.at(b);
    if (ca.total_memory_gb() != cb.total_memory_gb()) {
      return descending ? ca.total_memory_gb() > cb.total_memory_gb() : ca.total_memory_gb() < cb.total_memory_gb();
    }
    if (ca.hourly_cost() != cb.hourly_cost()) return ca.hourly_cost() < cb.hourly_cost();
    return a < b;
  });
  return ids;
}

inline PriorityPartition split(const ConfigSpace& space, std::set<ConfigId> chosen) {
  PriorityPartition p;
  for (ConfigId id = 0; id < space.size(); ++id) {
    (chosen.contains(id) ? p.priority : p.remainder).push_back(id);
  }
  return p;
}

}  // namespace detail

// Memory a config leaves for the job after per-node overhead.
inline double usable_memory_gb(const ClusterConfig& c, const PartitionParams& params) {
  return c.total_memory_gb() - c.scale_out * params.per_node_overhead_gb;
}

inline bool satisfies_requirement(const ClusterConfig& c, const MemoryRequirement& req, const PartitionParams& params) {
  return usable_memory_gb(c, params) >= req.job_gb * (1.0 + params.leeway_fraction);
}

inline PriorityPartition build_priority_partition(const ConfigSpace& space, const MemoryModel& model,
                                                  const std::optional<MemoryRequirement>& req,
                                                  const PartitionParams& params = {}) {
  params.validate();
  if (space.empty()) throw ConfigError("cannot partition an empty space");
  const std::size_t n = space.size();

  switch (model.category) {
    case MemoryCategory::Unclear: {
      PriorityPartition p;
      p.priority.resize(n);
      for (ConfigId i = 0; i < n; ++i) p.priority[i] = i;
      return p;
    }
    case MemoryCategory::Flat: {
      const auto ids = detail::ids_by_memory(space, false);
      const auto k = detail::fraction_count(params.flat_fraction, n);
      return detail::split(space, {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k)});
    }
    case MemoryCategory::Linear: {
      if (!req) throw ConfigError("a linear memory model needs a memory requirement to partition the space");
      std::set<ConfigId> fits;
      for (ConfigId i = 0; i < n; ++i) {
        if (satisfies_requirement(space.at(i), *req, params)) fits.insert(i);
      }
      if (!fits.empty()) return detail::split(space, std::move(fits));
      // Nothing is large enough: try both extremes.
      const auto k = detail::fraction_count(params.fallback_fraction, n);
      const auto low = detail::ids_by_memory(space, false);
      const auto high = detail::ids_by_memory(space, true);
      std::set<ConfigId> extremes(low.begin(), low.begin() + static_cast<std::ptrdiff_t>(k));
      extremes.insert(high.begin(), high.begin() + static_cast<std::ptrdiff_t>(k));
      return detail::split(space, std::move(extremes));
    }
  }
  throw ConfigError("unknown memory category");
}

// ---------------------------------------------------------------------------
// Catalog file (JSON):
//   {
//     "machine_types": [{"name": "m5.xlarge", "cores": 4, "memory_gb": 16, "price_per_hour": 0.192}, ...],
//     "scale_outs": [4, 8, 12]                                   // cartesian product, or
//     "configs": [{"machine_type": "m5.xlarge", "scale_out": 4}]  // explicit pairs
//   }

inline ConfigSpace space_from_catalog_json(const nlohmann::json& j) {
  try {
    std::vector<MachineType> catalog;
    for (const auto& m : j.at("machine_types")) {
      catalog.push_back({m.at("name").get<std::string>(), m.at("cores").get<int>(), m.at("memory_gb").get<double>(),
                         m.at("price_per_hour").get<double>()});
    }
    const bool has_scale = j.contains("scale_outs");
    const bool has_pairs = j.contains("configs");
    if (has_scale == has_pairs) throw ConfigError("catalog needs exactly one of 'scale_outs' or 'configs'");
    if (has_scale) {
      const auto scale_outs = j.at("scale_outs").get<std::vector<int>>();
      std::set<int> unique(scale_outs.begin(), scale_outs.end());
      if (unique.size() != scale_outs.size()) throw ConfigError("duplicate scale-out in catalog");
      return enumerate_space(std::move(catalog), scale_outs);
    }
    std::vector<ConfigPair> pairs;
    for (const auto& c : j.at("configs")) {
      pairs.push_back({c.at("machine_type").get<std::string>(), c.at("scale_out").get<int>()});
    }
    return ConfigSpace::from_pairs(std::move(catalog), pairs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed catalog: ") + e.what());
  }
}

inline ConfigSpace load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open catalog file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("catalog '" + path + "' is not valid JSON: " + e.what());
  }
  return space_from_catalog_json(j);
}

}  // namespace ruya
