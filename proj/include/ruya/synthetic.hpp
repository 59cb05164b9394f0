#pragma once

// Seeded generator of replay tables with memory bottlenecks: linear-category
// jobs get a cost cliff on configurations without enough usable memory, flat
// jobs gain nothing from memory, unclear jobs respond to memory in a
// non-threshold way.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "ruya/config_space.hpp"
#include "ruya/random.hpp"
#include "ruya/replay_harness.hpp"

namespace ruya {

struct SyntheticCounts {
  std::size_t linear = 4;
  std::size_t flat = 4;
  std::size_t unclear = 4;
};

struct SyntheticBenchmark {
  ReplayTable table;
  CategoryMap categories;
};

// Six node types (compute/general/memory families, two sizes) x ten scale-outs = 60 configs.
inline ConfigSpace synthetic_space() {
  std::vector<MachineType> catalog{
      {"c.xlarge", 4, 7.5, 0.199},  {"c.2xlarge", 8, 15.0, 0.398}, {"m.xlarge", 4, 16.0, 0.200},
      {"m.2xlarge", 8, 32.0, 0.400}, {"r.xlarge", 4, 30.5, 0.266},  {"r.2xlarge", 8, 61.0, 0.532},
  };
  const std::vector<int> scale_outs{4, 6, 8, 10, 12, 16, 20, 24, 32, 40};
  return enumerate_space(std::move(catalog), scale_outs);
}

namespace detail {

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform_unit(rng); }

// Startup plus compute that scales with cores, slowed by per-node coordination.
inline double base_runtime(const ClusterConfig& c, double work_core_s, double startup_s, double coordination) {
  return startup_s + work_core_s / c.total_cores() * (1.0 + coordination * c.scale_out);
}

}  // namespace detail

inline SyntheticBenchmark generate_bottleneck_benchmark(std::uint64_t seed, const SyntheticCounts& counts = {},
                                                        const PartitionParams& partition = {}) {
  Rng rng(seed);
  const auto space = synthetic_space();
  SyntheticBenchmark out;

  std::vector<double> usable;
  for (const auto& c : space.configs()) usable.push_back(usable_memory_gb(c, partition));
  std::vector<double> sorted_usable = usable;
  std::sort(sorted_usable.begin(), sorted_usable.end());

  const auto make_job = [&](MemoryCategory category, std::size_t index) {
    const double work = detail::uniform(rng, 2.0e4, 1.0e5);
    const double startup = detail::uniform(rng, 60.0, 180.0);
    const double coordination = detail::uniform(rng, 0.005, 0.02);
    ReplayJob job;
    job.meta = {std::string("synthetic-") + std::string(to_string(category)) + "-" + std::to_string(index + 1),
                "synthetic", "generated"};
    job.space = space;
    JobCategory jc;
    jc.category = category;

    double requirement = 0.0;
    double cliff = 1.0;
    double sensitivity = 0.0;
    double scale_gb = 1.0;
    if (category == MemoryCategory::Linear) {
      // Between roughly a third and a half of the space can hold the job.
      const auto idx = static_cast<std::size_t>(detail::uniform(rng, 0.5, 0.65) * static_cast<double>(usable.size()));
      requirement = 0.999 * sorted_usable[idx] / (1.0 + partition.leeway_fraction);
      cliff = detail::uniform(rng, 2.0, 5.0);
      jc.requirement = MemoryRequirement{requirement, false};
    } else if (category == MemoryCategory::Unclear) {
      sensitivity = detail::uniform(rng, 0.3, 1.2);
      scale_gb = detail::uniform(rng, 50.0, 400.0);
    }

    for (ConfigId id = 0; id < space.size(); ++id) {
      const auto& c = space.at(id);
      double runtime = detail::base_runtime(c, work, startup, coordination);
      if (category == MemoryCategory::Linear) {
        if (usable[id] < requirement) {
          runtime *= cliff;
        } else if (usable[id] < requirement * (1.0 + partition.leeway_fraction)) {
          runtime *= 1.25;  // garbage-collection pressure right at the limit
        }
      } else if (category == MemoryCategory::Unclear) {
        runtime *= 1.0 + sensitivity * std::exp(-usable[id] / scale_gb);
      }
      runtime *= detail::uniform(rng, 0.97, 1.03);
      job.entries.push_back({runtime / 3600.0 * c.hourly_cost(), runtime});
    }
    out.categories.emplace(job.meta.name, jc);
    out.table.jobs.push_back(std::move(job));
  };

  for (std::size_t i = 0; i < counts.linear; ++i) make_job(MemoryCategory::Linear, i);
  for (std::size_t i = 0; i < counts.flat; ++i) make_job(MemoryCategory::Flat, i);
  for (std::size_t i = 0; i < counts.unclear; ++i) make_job(MemoryCategory::Unclear, i);
  return out;
}

}  // namespace ruya
