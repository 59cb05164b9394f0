#pragma once

// Replay of pre-measured (job, configuration) executions: table loading, cost
// normalization, iterations-to-threshold scoring and the paired-seed
// comparison of the priority-first search against the plain baseline.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "ruya/config_space.hpp"
#include "ruya/error.hpp"
#include "ruya/memory_model.hpp"
#include "ruya/search_engine.hpp"

namespace ruya {

struct JobMeta {
  std::string name;
  std::string framework;
  std::string dataset_size;
};

struct ReplayJob {
  JobMeta meta;
  ConfigSpace space;
  std::vector<Measurement> entries;  // indexed by config id
};

struct ReplayTable {
  std::vector<ReplayJob> jobs;

  [[nodiscard]] const ReplayJob& job(std::string_view name) const {
    for (const auto& j : jobs) {
      if (j.meta.name == name) return j;
    }
    throw LookupError("job '" + std::string(name) + "' not in replay table");
  }
};

class ReplayOracle final : public CostOracle {
 public:
  explicit ReplayOracle(const ReplayJob& job) : job_(&job) {}
  Measurement measure(ConfigId id) override {
    if (id >= job_->entries.size()) throw LookupError("config id " + std::to_string(id) + " has no replay entry");
    return job_->entries[id];
  }

 private:
  const ReplayJob* job_;
};

// ---------------------------------------------------------------------------
// Delimited-text helpers

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, std::string_view column, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("column '" + std::string(column) + "': '" + s + "' is not a number", line);
  }
}

inline int parse_int(const std::string& s, std::string_view column, std::size_t line) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("column '" + std::string(column) + "': '" + s + "' is not an integer", line);
  }
}

inline bool skippable(const std::string& line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Replay table: CSV with header
//   job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s[,cost][,framework][,dataset_size]
// Without a cost column, cost = runtime_s / 3600 * scale_out * price_per_hour.
// Every job must cover the union of (machine type, scale-out) pairs in the
// file, unless per_job_space is set, in which case each job's space is just
// the configurations it has rows for.

struct ReplayLoadOptions {
  bool per_job_space = false;
};

inline ReplayTable parse_replay_table(std::istream& in, const ReplayLoadOptions& options = {}) {
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> col;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    const auto header = detail::split_csv(line);
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    break;
  }
  for (const char* required : {"job", "machine_type", "cores", "memory_gb", "price_per_hour", "scale_out", "runtime_s"}) {
    if (!col.contains(required)) throw ParseError(std::string("replay table header lacks column '") + required + "'", lineno);
  }
  const auto opt_col = [&](const char* name) -> std::optional<std::size_t> {
    auto it = col.find(name);
    return it == col.end() ? std::nullopt : std::optional<std::size_t>(it->second);
  };
  const auto cost_col = opt_col("cost");
  const auto framework_col = opt_col("framework");
  const auto size_col = opt_col("dataset_size");

  struct Row {
    std::string type;
    int scale_out;
    Measurement m;
  };
  std::vector<std::string> job_order;
  std::map<std::string, std::vector<Row>> rows;
  std::map<std::string, JobMeta> meta;
  std::vector<MachineType> catalog;
  std::map<std::string, std::size_t> type_index;

  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != col.size()) {
      throw ParseError("expected " + std::to_string(col.size()) + " fields, got " + std::to_string(f.size()), lineno);
    }
    const auto& job = f[col["job"]];
    if (job.empty()) throw ParseError("empty job name", lineno);
    MachineType type{f[col["machine_type"]], detail::parse_int(f[col["cores"]], "cores", lineno),
                     detail::parse_double(f[col["memory_gb"]], "memory_gb", lineno),
                     detail::parse_double(f[col["price_per_hour"]], "price_per_hour", lineno)};
    try {
      type.validate();
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), lineno);
    }
    if (auto it = type_index.find(type.name); it == type_index.end()) {
      type_index.emplace(type.name, catalog.size());
      catalog.push_back(type);
    } else if (!(catalog[it->second] == type)) {
      throw ParseError("machine type '" + type.name + "' redefined with different attributes", lineno);
    }
    const int scale_out = detail::parse_int(f[col["scale_out"]], "scale_out", lineno);
    if (scale_out < 1) throw ParseError("scale_out must be >= 1", lineno);
    Measurement m;
    m.runtime_s = detail::parse_double(f[col["runtime_s"]], "runtime_s", lineno);
    if (!(m.runtime_s > 0.0)) throw ParseError("runtime_s must be > 0", lineno);
    if (cost_col && !f[*cost_col].empty()) {
      m.cost = detail::parse_double(f[*cost_col], "cost", lineno);
    } else {
      m.cost = m.runtime_s / 3600.0 * scale_out * type.price_per_hour;
    }
    if (!(m.cost > 0.0)) throw ParseError("cost must be > 0", lineno);

    if (!rows.contains(job)) {
      job_order.push_back(job);
      meta[job] = {job, framework_col ? f[*framework_col] : "", size_col ? f[*size_col] : ""};
    }
    for (const auto& r : rows[job]) {
      if (r.type == type.name && r.scale_out == scale_out) {
        throw ParseError("duplicate entry for job '" + job + "' on " + type.name + " x" + std::to_string(scale_out), lineno);
      }
    }
    rows[job].push_back({type.name, scale_out, m});
  }
  if (job_order.empty()) throw ParseError("replay table has no data rows", 0);

  const auto build_space = [&](const std::vector<const std::vector<Row>*>& sources) {
    std::set<std::pair<std::string, int>> universe;
    for (const auto* rs : sources) {
      for (const auto& r : *rs) universe.emplace(r.type, r.scale_out);
    }
    std::vector<ConfigPair> pairs;
    for (const auto& [t, s] : universe) pairs.push_back({t, s});
    std::vector<MachineType> used;
    for (const auto& t : catalog) {
      if (std::any_of(pairs.begin(), pairs.end(), [&](const ConfigPair& p) { return p.machine_type == t.name; })) {
        used.push_back(t);
      }
    }
    return ConfigSpace::from_pairs(std::move(used), pairs);
  };
  std::vector<const std::vector<Row>*> all_rows;
  for (const auto& job : job_order) all_rows.push_back(&rows[job]);
  const auto shared_space = build_space(all_rows);

  std::ostringstream gaps;
  ReplayTable table;
  for (const auto& job : job_order) {
    auto space = options.per_job_space ? build_space({&rows[job]}) : shared_space;
    ReplayJob rj{meta[job], space, std::vector<Measurement>(space.size())};
    std::vector<bool> covered(space.size(), false);
    for (const auto& r : rows[job]) {
      const auto id = *space.find(r.type, r.scale_out);
      rj.entries[id] = r.m;
      covered[id] = true;
    }
    for (ConfigId id = 0; id < space.size(); ++id) {
      if (!covered[id]) {
        gaps << "\n  " << job << ": " << space.at(id).machine_type.name << " x" << space.at(id).scale_out;
      }
    }
    table.jobs.push_back(std::move(rj));
  }
  if (!gaps.str().empty()) throw InputError("replay table is incomplete; missing entries:" + gaps.str());
  return table;
}

// Writes every entry with an explicit cost column, in job then config-id order.
inline void write_replay_table_csv(const ReplayTable& table, std::ostream& out) {
  out << "job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s,cost,framework,dataset_size\n";
  for (const auto& job : table.jobs) {
    for (ConfigId id = 0; id < job.space.size(); ++id) {
      const auto& c = job.space.at(id);
      const auto& m = job.entries[id];
      out << job.meta.name << ',' << c.machine_type.name << ',' << c.machine_type.cores << ','
          << fmt::format("{:.17g}", c.machine_type.memory_gb) << ',' << fmt::format("{:.17g}", c.machine_type.price_per_hour)
          << ',' << c.scale_out << ',' << fmt::format("{:.17g}", m.runtime_s) << ',' << fmt::format("{:.17g}", m.cost) << ','
          << job.meta.framework << ',' << job.meta.dataset_size << '\n';
    }
  }
}

inline ReplayTable load_replay_table(const std::string& path, const ReplayLoadOptions& options = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open replay table '" + path + "'");
  return parse_replay_table(in, options);
}

// ---------------------------------------------------------------------------
// Category sidecar: CSV "job,category,job_gb"; job_gb is required for linear
// jobs and ignored otherwise.

struct JobCategory {
  MemoryCategory category = MemoryCategory::Unclear;
  std::optional<MemoryRequirement> requirement;
};

using CategoryMap = std::map<std::string, JobCategory, std::less<>>;

inline CategoryMap parse_categories(std::istream& in) {
  CategoryMap out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    auto f = detail::split_csv(line);
    if (!header_seen) {
      header_seen = true;
      if (f.size() >= 2 && f[0] == "job" && f[1] == "category") continue;
    }
    if (f.size() < 2 || f.size() > 3) throw ParseError("expected job,category[,job_gb]", lineno);
    JobCategory jc;
    try {
      jc.category = parse_category(f[1]);
    } catch (const InputError& e) {
      throw ParseError(e.what(), lineno);
    }
    if (jc.category == MemoryCategory::Linear) {
      if (f.size() < 3 || f[2].empty()) throw ParseError("linear job '" + f[0] + "' needs job_gb", lineno);
      const double gb = detail::parse_double(f[2], "job_gb", lineno);
      if (!(gb > 0.0)) throw ParseError("job_gb must be > 0", lineno);
      jc.requirement = MemoryRequirement{gb, false};
    }
    if (!out.emplace(f[0], jc).second) throw ParseError("duplicate category for job '" + f[0] + "'", lineno);
  }
  return out;
}

inline void write_categories_csv(const CategoryMap& categories, std::ostream& out) {
  out << "job,category,job_gb\n";
  for (const auto& [job, jc] : categories) {
    out << job << ',' << to_string(jc.category) << ',';
    if (jc.requirement) out << fmt::format("{:.17g}", jc.requirement->job_gb);
    out << '\n';
  }
}

inline CategoryMap load_categories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open category file '" + path + "'");
  return parse_categories(in);
}

// ---------------------------------------------------------------------------
// Metrics

// Cost of each config divided by the job's cheapest; the cheapest maps to exactly 1.0.
inline std::vector<double> normalize_costs(const ReplayJob& job) {
  double min_cost = std::numeric_limits<double>::infinity();
  for (const auto& m : job.entries) min_cost = std::min(min_cost, m.cost);
  std::vector<double> out;
  out.reserve(job.entries.size());
  for (const auto& m : job.entries) out.push_back(m.cost / min_cost);
  return out;
}

inline std::vector<double> normalize_costs(const ReplayTable& table, std::string_view job) {
  return normalize_costs(table.job(job));
}

inline constexpr std::array<double, 3> kDefaultThresholds{1.2, 1.1, 1.0};

// First 1-based iteration at which the best normalized cost so far is within
// each threshold. Threshold 1.0 means the optimum itself was observed
// (normalized costs are exactly 1.0 only for the argmin set).
inline std::vector<std::optional<std::size_t>> iterations_to_thresholds(const SearchTrace& trace,
                                                                        std::span<const double> normalized,
                                                                        std::span<const double> thresholds = kDefaultThresholds) {
  std::vector<std::optional<std::size_t>> out(thresholds.size());
  double best = std::numeric_limits<double>::infinity();
  for (const auto& o : trace.observations) {
    if (o.config_id >= normalized.size()) throw LookupError("trace config missing from normalized cost map");
    best = std::min(best, normalized[o.config_id]);
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      if (!out[t] && best <= thresholds[t]) out[t] = o.iteration;
    }
  }
  return out;
}

// Best normalized cost after each of the first `length` executions; once the
// search has stopped the best configuration keeps being used.
inline std::vector<double> best_cost_series(const SearchTrace& trace, std::span<const double> normalized, std::size_t length) {
  std::vector<double> out(length);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < length; ++k) {
    if (k < trace.size()) best = std::min(best, normalized[trace.observations[k].config_id]);
    out[k] = best;
  }
  return out;
}

// Running sum of normalized execution costs: observed configs during the
// search, the best found config afterwards.
inline std::vector<double> cumulative_cost_series(const SearchTrace& trace, std::span<const double> normalized,
                                                  std::size_t length) {
  std::vector<double> out(length);
  double best = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t k = 0; k < length; ++k) {
    if (k < trace.size()) {
      const double c = normalized[trace.observations[k].config_id];
      best = std::min(best, c);
      sum += c;
    } else {
      sum += best;
    }
    out[k] = sum;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Paired-seed comparison

struct CompareParams {
  std::size_t n_seeds = 200;
  std::uint64_t seed_base = 0;
  SearchParams search = [] {
    SearchParams p;
    p.use_stopping_rule = false;  // score complete searches
    return p;
  }();
  PartitionParams partition;
  std::vector<double> thresholds{kDefaultThresholds.begin(), kDefaultThresholds.end()};
  unsigned threads = 0;  // 0: hardware concurrency
  bool keep_traces = false;
};

struct MethodStats {
  std::vector<double> mean_iterations;  // per threshold, NaN if never reached
  std::vector<std::size_t> unreached;   // seeds excluded per threshold
};

struct JobComparison {
  std::string job;
  MemoryCategory category = MemoryCategory::Unclear;
  std::optional<double> job_gb;
  std::size_t space_size = 0;
  std::size_t priority_size = 0;
  MethodStats baseline;
  MethodStats ruya;
  std::vector<double> quotient;  // ruya / baseline per threshold
};

struct TraceRecord {
  std::string job;
  std::string method;
  std::uint64_t seed = 0;
  SearchTrace trace;
};

struct ComparisonReport {
  std::vector<double> thresholds;
  std::vector<std::uint64_t> seeds;
  std::vector<JobComparison> jobs;
  std::vector<double> mean_baseline;
  std::vector<double> mean_ruya;
  std::vector<double> mean_quotient;
  // Per-iteration means over jobs and seeds (index 0 = iteration 1).
  std::vector<double> best_cost_baseline;
  std::vector<double> best_cost_ruya;
  std::vector<double> cumulative_cost_baseline;
  std::vector<double> cumulative_cost_ruya;
  std::vector<TraceRecord> traces;  // only with CompareParams::keep_traces
};

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline double mean_ignoring_nan(std::span<const double> v) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double x : v) {
    if (!std::isnan(x)) {
      sum += x;
      ++n;
    }
  }
  return n == 0 ? nan() : sum / static_cast<double>(n);
}

struct RunOutcome {
  std::vector<std::optional<std::size_t>> hits;
  std::vector<double> best;
  std::vector<double> cumulative;
  SearchTrace trace;
};

inline MethodStats aggregate(const std::vector<std::vector<std::optional<std::size_t>>>& hits, std::size_t n_thresholds) {
  MethodStats s;
  s.mean_iterations.assign(n_thresholds, nan());
  s.unreached.assign(n_thresholds, 0);
  for (std::size_t t = 0; t < n_thresholds; ++t) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& h : hits) {
      if (h[t]) {
        sum += static_cast<double>(*h[t]);
        ++n;
      } else {
        ++s.unreached[t];
      }
    }
    if (n > 0) s.mean_iterations[t] = sum / static_cast<double>(n);
  }
  return s;
}

}  // namespace detail

inline ComparisonReport compare_methods(const ReplayTable& table, const CategoryMap& categories,
                                        std::span<const std::string> jobs, const CompareParams& params) {
  if (params.n_seeds < 1) throw ConfigError("need at least one seed");
  params.search.validate();
  params.partition.validate();
  const std::size_t n_thr = params.thresholds.size();

  struct JobSetup {
    const ReplayJob* job;
    JobCategory category;
    PriorityPartition partition;
    std::vector<double> normalized;
  };
  std::vector<JobSetup> setups;
  std::size_t horizon = 0;
  for (const auto& name : jobs) {
    const auto& job = table.job(name);
    auto it = categories.find(name);
    if (it == categories.end()) throw ConfigError("no memory category supplied for job '" + name + "'");
    MemoryModel model;
    model.category = it->second.category;
    auto partition = build_priority_partition(job.space, model, it->second.requirement, params.partition);
    setups.push_back({&job, it->second, std::move(partition), normalize_costs(job)});
    horizon = std::max(horizon, job.space.size());
  }

  ComparisonReport report;
  report.thresholds = params.thresholds;
  for (std::size_t s = 0; s < params.n_seeds; ++s) report.seeds.push_back(params.seed_base + s);

  // One slot per (job, seed, method); filled in parallel, reduced in index order.
  const std::size_t n_tasks = setups.size() * params.n_seeds;
  std::vector<detail::RunOutcome> baseline(n_tasks);
  std::vector<detail::RunOutcome> ruya(n_tasks);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  const auto worker = [&] {
    while (true) {
      const std::size_t task = next.fetch_add(1);
      if (task >= n_tasks) return;
      try {
        const auto& setup = setups[task / params.n_seeds];
        auto sp = params.search;
        sp.seed = report.seeds[task % params.n_seeds];
        const auto score = [&](SearchTrace trace, detail::RunOutcome& out) {
          out.hits = iterations_to_thresholds(trace, setup.normalized, params.thresholds);
          out.best = best_cost_series(trace, setup.normalized, horizon);
          out.cumulative = cumulative_cost_series(trace, setup.normalized, horizon);
          if (params.keep_traces) out.trace = std::move(trace);
        };
        ReplayOracle oracle_b(*setup.job);
        score(run_baseline_search(setup.job->space, oracle_b, sp), baseline[task]);
        ReplayOracle oracle_r(*setup.job);
        score(run_ruya_search(setup.job->space, setup.partition, oracle_r, sp), ruya[task]);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_tasks);
      }
    }
  };
  unsigned n_threads = params.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : params.threads;
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, n_tasks));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  report.best_cost_baseline.assign(horizon, 0.0);
  report.best_cost_ruya.assign(horizon, 0.0);
  report.cumulative_cost_baseline.assign(horizon, 0.0);
  report.cumulative_cost_ruya.assign(horizon, 0.0);

  for (std::size_t j = 0; j < setups.size(); ++j) {
    const auto& setup = setups[j];
    std::vector<std::vector<std::optional<std::size_t>>> hits_b;
    std::vector<std::vector<std::optional<std::size_t>>> hits_r;
    for (std::size_t s = 0; s < params.n_seeds; ++s) {
      const std::size_t task = j * params.n_seeds + s;
      hits_b.push_back(baseline[task].hits);
      hits_r.push_back(ruya[task].hits);
      for (std::size_t k = 0; k < horizon; ++k) {
        report.best_cost_baseline[k] += baseline[task].best[k];
        report.best_cost_ruya[k] += ruya[task].best[k];
        report.cumulative_cost_baseline[k] += baseline[task].cumulative[k];
        report.cumulative_cost_ruya[k] += ruya[task].cumulative[k];
      }
      if (params.keep_traces) {
        const auto& name = setup.job->meta.name;
        report.traces.push_back({name, "baseline", report.seeds[s], std::move(baseline[task].trace)});
        report.traces.push_back({name, "ruya", report.seeds[s], std::move(ruya[task].trace)});
      }
    }
    JobComparison jc;
    jc.job = setup.job->meta.name;
    jc.category = setup.category.category;
    if (setup.category.requirement) jc.job_gb = setup.category.requirement->job_gb;
    jc.space_size = setup.job->space.size();
    jc.priority_size = setup.partition.priority.size();
    jc.baseline = detail::aggregate(hits_b, n_thr);
    jc.ruya = detail::aggregate(hits_r, n_thr);
    for (std::size_t t = 0; t < n_thr; ++t) jc.quotient.push_back(jc.ruya.mean_iterations[t] / jc.baseline.mean_iterations[t]);
    report.jobs.push_back(std::move(jc));
  }

  const double runs = static_cast<double>(setups.size() * params.n_seeds);
  for (std::size_t k = 0; k < horizon; ++k) {
    report.best_cost_baseline[k] /= runs;
    report.best_cost_ruya[k] /= runs;
    report.cumulative_cost_baseline[k] /= runs;
    report.cumulative_cost_ruya[k] /= runs;
  }
  for (std::size_t t = 0; t < n_thr; ++t) {
    std::vector<double> b;
    std::vector<double> r;
    for (const auto& jc : report.jobs) {
      b.push_back(jc.baseline.mean_iterations[t]);
      r.push_back(jc.ruya.mean_iterations[t]);
    }
    report.mean_baseline.push_back(detail::mean_ignoring_nan(b));
    report.mean_ruya.push_back(detail::mean_ignoring_nan(r));
    report.mean_quotient.push_back(report.mean_ruya.back() / report.mean_baseline.back());
  }
  return report;
}

inline ComparisonReport compare_methods(const ReplayTable& table, const CategoryMap& categories,
                                        const CompareParams& params) {
  std::vector<std::string> names;
  for (const auto& j : table.jobs) names.push_back(j.meta.name);
  return compare_methods(table, categories, names, params);
}

// ---------------------------------------------------------------------------
// Report writers (CSV). Numbers use fixed precision so reruns are byte-identical.

namespace detail {

inline std::string fmt_num(double v, int precision) {
  if (std::isnan(v)) return "NA";
  return fmt::format("{:.{}f}", v, precision);
}

inline std::string threshold_label(double t) { return t == 1.0 ? "c=1.0" : fmt::format("c<={:.1f}", t); }

}  // namespace detail

// One row per job plus a final "Mean" row; iteration means, quotients (%) and
// unreached-seed counts per threshold.
inline void write_report_csv(const ComparisonReport& r, std::ostream& out) {
  out << "job,category,job_gb,space_size,priority_size";
  for (const char* method : {"baseline", "ruya"}) {
    for (double t : r.thresholds) out << ',' << method << ' ' << detail::threshold_label(t);
  }
  for (double t : r.thresholds) out << ",quotient% " << detail::threshold_label(t);
  for (const char* method : {"baseline", "ruya"}) {
    for (double t : r.thresholds) out << ',' << method << " unreached " << detail::threshold_label(t);
  }
  out << '\n';
  for (const auto& j : r.jobs) {
    out << j.job << ',' << to_string(j.category) << ',' << (j.job_gb ? detail::fmt_num(*j.job_gb, 3) : "") << ','
        << j.space_size << ',' << j.priority_size;
    for (double v : j.baseline.mean_iterations) out << ',' << detail::fmt_num(v, 3);
    for (double v : j.ruya.mean_iterations) out << ',' << detail::fmt_num(v, 3);
    for (double v : j.quotient) out << ',' << detail::fmt_num(100.0 * v, 1);
    for (auto v : j.baseline.unreached) out << ',' << v;
    for (auto v : j.ruya.unreached) out << ',' << v;
    out << '\n';
  }
  out << "Mean,,,,";
  for (double v : r.mean_baseline) out << ',' << detail::fmt_num(v, 3);
  for (double v : r.mean_ruya) out << ',' << detail::fmt_num(v, 3);
  for (double v : r.mean_quotient) out << ',' << detail::fmt_num(100.0 * v, 1);
  for (std::size_t i = 0; i < 2 * r.thresholds.size(); ++i) out << ',';
  out << '\n';
}

inline void write_series_csv(std::span<const double> baseline, std::span<const double> ruya, std::ostream& out) {
  out << "iteration,baseline,ruya\n";
  for (std::size_t k = 0; k < baseline.size(); ++k) {
    out << (k + 1) << ',' << detail::fmt_num(baseline[k], 6) << ',' << detail::fmt_num(ruya[k], 6) << '\n';
  }
}

inline void write_traces_csv(std::span<const TraceRecord> records, std::ostream& out) {
  out << "job,method,seed,iteration,config_id,cost,runtime_s,phase,expected_improvement,stop_reason\n";
  for (const auto& rec : records) {
    for (const auto& o : rec.trace.observations) {
      out << rec.job << ',' << rec.method << ',' << rec.seed << ',' << o.iteration << ',' << o.config_id << ','
          << fmt::format("{:.17g}", o.cost) << ',' << fmt::format("{:.17g}", o.runtime_s) << ',' << to_string(o.phase)
          << ',' << (std::isnan(o.expected_improvement) ? "" : fmt::format("{:.17g}", o.expected_improvement)) << ','
          << to_string(rec.trace.stop_reason) << '\n';
    }
  }
}

}  // namespace ruya
