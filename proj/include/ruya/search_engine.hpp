#pragma once

// Priority-first Bayesian-optimized configuration search and the plain
// Bayesian-optimization baseline, run against an abstract cost oracle.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ruya/bayes_opt.hpp"
#include "ruya/config_space.hpp"
#include "ruya/error.hpp"
#include "ruya/random.hpp"

namespace ruya {

struct Measurement {
  double cost = 0.0;
  double runtime_s = 0.0;
};

// Executes (or looks up) a job on one configuration.
class CostOracle {
 public:
  virtual ~CostOracle() = default;
  virtual Measurement measure(ConfigId id) = 0;
};

enum class SearchPhase { Initial, Priority, Remainder };
enum class StopReason { Converged, Exhausted, MaxIterations };

inline std::string_view to_string(SearchPhase p) {
  switch (p) {
    case SearchPhase::Initial: return "initial";
    case SearchPhase::Priority: return "priority";
    case SearchPhase::Remainder: return "remainder";
  }
  return "initial";
}

inline std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::Converged: return "converged";
    case StopReason::Exhausted: return "exhausted";
    case StopReason::MaxIterations: return "max_iterations";
  }
  return "exhausted";
}

struct Observation {
  ConfigId config_id = 0;
  double cost = 0.0;
  double runtime_s = 0.0;
  std::size_t iteration = 0;  // 1-based
  SearchPhase phase = SearchPhase::Initial;
  double expected_improvement = std::numeric_limits<double>::quiet_NaN();  // NaN for random draws
};

struct SearchTrace {
  std::vector<Observation> observations;
  std::vector<std::size_t> phase_boundaries;  // iteration of the first observation of each new phase
  StopReason stop_reason = StopReason::Exhausted;

  [[nodiscard]] std::size_t size() const noexcept { return observations.size(); }

  [[nodiscard]] double best_cost() const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : observations) best = std::min(best, o.cost);
    return best;
  }
};

class SearchError : public Error {
 public:
  SearchError(const std::string& what, SearchTrace partial) : Error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const SearchTrace& partial_trace() const noexcept { return partial_; }

 private:
  SearchTrace partial_;
};

struct SearchParams {
  std::size_t n_initial = 3;
  double ei_stop_fraction = 0.1;
  std::size_t min_observations = 6;
  std::optional<std::size_t> max_iterations;  // defaults to the space size
  std::uint64_t seed = 0;
  bool use_stopping_rule = true;
  bool init_from_full = false;              // draw initial configs from the whole space
  std::optional<GpHyperparams> hyperparams; // defaults to GpHyperparams::defaults(feature dims)
  bool refit_length_scales = false;         // marginal-likelihood grid search each iteration

  void validate() const {
    if (n_initial < 1) throw ConfigError("n_initial must be >= 1");
    if (!(ei_stop_fraction > 0.0 && ei_stop_fraction < 1.0)) throw ConfigError("ei_stop_fraction must be in (0, 1)");
    if (min_observations < n_initial) throw ConfigError("min_observations must be >= n_initial");
    if (max_iterations && *max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  }
};

namespace detail {

inline void check_partition(const ConfigSpace& space, const PriorityPartition& partition) {
  std::vector<int> seen(space.size(), 0);
  for (auto id : partition.priority) {
    if (id >= space.size()) throw ConfigError("partition references config outside the space");
    ++seen[id];
  }
  for (auto id : partition.remainder) {
    if (id >= space.size()) throw ConfigError("partition references config outside the space");
    ++seen[id];
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
    throw ConfigError("partition is not an exact disjoint cover of the space");
  }
  if (partition.priority.empty()) throw ConfigError("priority set is empty");
}

class SearchRun {
 public:
  SearchRun(const ConfigSpace& space, CostOracle& oracle, const SearchParams& params)
      : space_(space),
        oracle_(oracle),
        params_(params),
        features_(FeatureEncoder(space).encode_all()),
        observed_(space.size(), false),
        hp_(params.hyperparams.value_or(GpHyperparams::defaults(kFeatureDims))),
        max_iterations_(std::min(params.max_iterations.value_or(space.size()), space.size())) {}

  SearchTrace run(const PriorityPartition& partition) {
    Rng rng(params_.seed);
    const auto& initial_pool = params_.init_from_full ? all_ids() : partition.priority;
    const std::size_t wanted = std::min(params_.n_initial, max_iterations_);
    auto draws = sample_without_replacement<ConfigId>(rng, initial_pool, wanted);
    if (draws.size() < wanted) {
      // Priority set smaller than the initial sample: top up from the rest.
      auto extra = sample_without_replacement<ConfigId>(rng, partition.remainder, wanted - draws.size());
      draws.insert(draws.end(), extra.begin(), extra.end());
    }
    for (auto id : draws) observe(id, SearchPhase::Initial, std::numeric_limits<double>::quiet_NaN());

    while (true) {
      auto phase = SearchPhase::Priority;
      auto region = unobserved(partition.priority);
      if (region.empty()) {
        phase = SearchPhase::Remainder;
        region = unobserved(partition.remainder);
      }
      if (region.empty()) {
        trace_.stop_reason = StopReason::Exhausted;
        break;
      }
      if (trace_.size() >= max_iterations_) {
        trace_.stop_reason = StopReason::MaxIterations;
        break;
      }
      const auto gp = fit();
      std::vector<Candidate> candidates;
      candidates.reserve(region.size());
      for (auto id : region) candidates.push_back({id, features_[id], space_.at(id).hourly_cost()});
      const double best = trace_.best_cost();
      const auto pick = select_next(gp, candidates, best);
      if (params_.use_stopping_rule && trace_.size() >= params_.min_observations &&
          pick->expected_improvement < params_.ei_stop_fraction * best) {
        trace_.stop_reason = StopReason::Converged;
        break;
      }
      observe(pick->id, phase, pick->expected_improvement);
    }
    return std::move(trace_);
  }

 private:
  const std::vector<ConfigId>& all_ids() {
    if (all_.empty()) {
      all_.resize(space_.size());
      for (ConfigId i = 0; i < all_.size(); ++i) all_[i] = i;
    }
    return all_;
  }

  [[nodiscard]] std::vector<ConfigId> unobserved(const std::vector<ConfigId>& ids) const {
    std::vector<ConfigId> out;
    for (auto id : ids) {
      if (!observed_[id]) out.push_back(id);
    }
    return out;
  }

  GpPosterior fit() {
    std::vector<FeatureVector> X;
    std::vector<double> y;
    X.reserve(trace_.size());
    y.reserve(trace_.size());
    for (const auto& o : trace_.observations) {
      X.push_back(features_[o.config_id]);
      y.push_back(o.cost);
    }
    if (params_.refit_length_scales) hp_ = refit_length_scale(X, y, hp_, kLengthScaleGrid);
    return gp_fit(X, y, hp_);
  }

  void observe(ConfigId id, SearchPhase phase, double ei) {
    Measurement m;
    try {
      m = oracle_.measure(id);
    } catch (const std::exception& e) {
      throw SearchError("cost oracle failed for config " + std::to_string(id) + ": " + e.what(), trace_);
    }
    if (!(m.cost > 0.0) || !std::isfinite(m.cost)) {
      throw SearchError("cost oracle returned a non-positive cost for config " + std::to_string(id), trace_);
    }
    if (!trace_.observations.empty() && trace_.observations.back().phase != phase) {
      trace_.phase_boundaries.push_back(trace_.size() + 1);
    }
    observed_[id] = true;
    trace_.observations.push_back({id, m.cost, m.runtime_s, trace_.size() + 1, phase, ei});
  }

  const ConfigSpace& space_;
  CostOracle& oracle_;
  const SearchParams& params_;
  std::vector<FeatureVector> features_;
  std::vector<bool> observed_;
  std::vector<ConfigId> all_;
  GpHyperparams hp_;
  std::size_t max_iterations_;
  SearchTrace trace_;
};

}  // namespace detail

// Explores the priority set first, then the remainder, with all observations
// feeding one GP. Stops when the best expected improvement drops below
// ei_stop_fraction of the best cost seen (after min_observations).
inline SearchTrace run_ruya_search(const ConfigSpace& space, const PriorityPartition& partition, CostOracle& oracle,
                                   const SearchParams& params) {
  params.validate();
  if (space.empty()) throw ConfigError("search space is empty");
  detail::check_partition(space, partition);
  return detail::SearchRun(space, oracle, params).run(partition);
}

inline PriorityPartition whole_space_partition(const ConfigSpace& space) {
  PriorityPartition p;
  p.priority.resize(space.size());
  for (ConfigId i = 0; i < space.size(); ++i) p.priority[i] = i;
  return p;
}

inline SearchTrace run_baseline_search(const ConfigSpace& space, CostOracle& oracle, const SearchParams& params) {
  return run_ruya_search(space, whole_space_partition(space), oracle, params);
}

}  // namespace ruya
