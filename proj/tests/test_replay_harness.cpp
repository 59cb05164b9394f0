#include <gtest/gtest.h>

#include <sstream>

#include "ruya/replay_harness.hpp"
#include "ruya/synthetic.hpp"

using namespace ruya;

namespace {

const char* kToyTable =
    "job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s\n"
    "# two jobs on two node types at two sizes\n"
    "sort,m.large,2,8,0.1,4,3600\n"
    "sort,m.large,2,8,0.1,8,2000\n"
    "sort,r.large,2,16,0.15,4,3000\n"
    "sort,r.large,2,16,0.15,8,1500\n"
    "grep,m.large,2,8,0.1,4,600\n"
    "grep,m.large,2,8,0.1,8,400\n"
    "grep,r.large,2,16,0.15,4,500\n"
    "grep,r.large,2,16,0.15,8,300\n";

ReplayTable toy() {
  std::istringstream in(kToyTable);
  return parse_replay_table(in);
}

SearchTrace trace_of(std::vector<ConfigId> ids) {
  SearchTrace t;
  for (std::size_t i = 0; i < ids.size(); ++i) t.observations.push_back({ids[i], 1.0, 1.0, i + 1, SearchPhase::Priority, 0.0});
  return t;
}

template <typename F>
void expect_parse_error_at(const std::string& text, std::size_t line, F&& parse) {
  std::istringstream in(text);
  try {
    parse(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
  }
}

}  // namespace

TEST(ReplayTable, ToyFileLoadsTwoJobsOfFourEntries) {
  const auto t = toy();
  ASSERT_EQ(t.jobs.size(), 2u);
  for (const auto& j : t.jobs) {
    EXPECT_EQ(j.space.size(), 4u);
    EXPECT_EQ(j.entries.size(), 4u);
  }
  EXPECT_EQ(t.jobs[0].meta.name, "sort");
  EXPECT_THROW(static_cast<void>(t.job("nope")), LookupError);
}

TEST(ReplayTable, CostDerivedFromRuntimeNodesAndPrice) {
  const auto table = toy();
  const auto& sort = table.job("sort");
  const auto id = sort.space.find("m.large", 4);
  ASSERT_TRUE(id);
  EXPECT_NEAR(sort.entries[*id].cost, 0.4, 1e-12);
  EXPECT_DOUBLE_EQ(sort.entries[*id].runtime_s, 3600.0);
}

TEST(ReplayTable, ExplicitCostColumnWins) {
  std::istringstream in(
      "job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s,cost\n"
      "a,x,1,2,0.1,1,100,7.5\n"
      "a,x,1,2,0.1,2,100,\n");
  const auto t = parse_replay_table(in);
  EXPECT_DOUBLE_EQ(t.jobs[0].entries[0].cost, 7.5);
  EXPECT_NEAR(t.jobs[0].entries[1].cost, 100.0 / 3600.0 * 2 * 0.1, 1e-15);
}

TEST(ReplayTable, MissingConfigIsCompletenessError) {
  std::string text = kToyTable;
  text.erase(text.find("grep,r.large,2,16,0.15,8,300\n"));
  std::istringstream in(text);
  try {
    parse_replay_table(in);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("grep"), std::string::npos);
    EXPECT_NE(msg.find("r.large"), std::string::npos);
  }
  std::istringstream again(text);
  ReplayLoadOptions per_job;
  per_job.per_job_space = true;
  const auto t = parse_replay_table(again, per_job);
  EXPECT_EQ(t.job("grep").space.size(), 3u);
  EXPECT_EQ(t.job("sort").space.size(), 4u);
}

TEST(ReplayTable, MalformedRowsReportLineNumbers) {
  const auto parse = [](std::istream& in) { return parse_replay_table(in); };
  expect_parse_error_at("job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s\na,x,1,2,0.1,1,fast\n", 2,
                        parse);
  expect_parse_error_at("job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s\n\na,x,1,2,0.1\n", 3, parse);
  expect_parse_error_at("job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s\na,x,1,2,0.1,1,-5\n", 2,
                        parse);
  expect_parse_error_at(
      "job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s\na,x,1,2,0.1,1,5\na,x,1,2,0.1,1,6\n", 3, parse);
  expect_parse_error_at(
      "job,machine_type,cores,memory_gb,price_per_hour,scale_out,runtime_s\na,x,1,2,0.1,1,5\nb,x,2,2,0.1,2,6\n", 3, parse);
  expect_parse_error_at("job,machine_type,cores\n", 1, parse);
}

TEST(ReplayTable, WriteThenParseRoundTrips) {
  const auto bench = generate_bottleneck_benchmark(3, {1, 1, 1});
  std::stringstream buf;
  write_replay_table_csv(bench.table, buf);
  const auto back = parse_replay_table(buf);
  ASSERT_EQ(back.jobs.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    ASSERT_EQ(back.jobs[j].entries.size(), bench.table.jobs[j].entries.size());
    for (std::size_t i = 0; i < back.jobs[j].entries.size(); ++i) {
      EXPECT_DOUBLE_EQ(back.jobs[j].entries[i].cost, bench.table.jobs[j].entries[i].cost);
      EXPECT_DOUBLE_EQ(back.jobs[j].entries[i].runtime_s, bench.table.jobs[j].entries[i].runtime_s);
    }
  }
}

TEST(Categories, ParseAndRoundTrip) {
  std::istringstream in("job,category,job_gb\nsort,linear,42\ngrep,flat,\nwc,unclear\n");
  const auto c = parse_categories(in);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.at("sort").category, MemoryCategory::Linear);
  EXPECT_DOUBLE_EQ(c.at("sort").requirement->job_gb, 42.0);
  EXPECT_FALSE(c.at("grep").requirement);
  std::stringstream buf;
  write_categories_csv(c, buf);
  const auto back = parse_categories(buf);
  EXPECT_EQ(back.at("sort").requirement->job_gb, 42.0);
  EXPECT_EQ(back.at("wc").category, MemoryCategory::Unclear);

  const auto parse = [](std::istream& s) { return parse_categories(s); };
  expect_parse_error_at("job,category,job_gb\nsort,linear\n", 2, parse);
  expect_parse_error_at("job,category,job_gb\nsort,sideways,1\n", 2, parse);
  expect_parse_error_at("sort,flat\nsort,flat\n", 2, parse);
}

TEST(Categories, BundledCategoryFileCoversSixteenJobs) {
  const auto c = load_categories(RUYA_SOURCE_DIR "/data/table1_categories.csv");
  ASSERT_EQ(c.size(), 16u);
  int counts[3] = {0, 0, 0};
  for (const auto& [name, jc] : c) ++counts[static_cast<int>(jc.category)];
  EXPECT_EQ(counts[static_cast<int>(MemoryCategory::Linear)], 6);
  EXPECT_EQ(counts[static_cast<int>(MemoryCategory::Flat)], 6);
  EXPECT_EQ(counts[static_cast<int>(MemoryCategory::Unclear)], 4);
}

TEST(NormalizeCosts, DividesByMinimum) {
  ReplayJob job;
  job.entries = {{2.0, 1.0}, {4.0, 1.0}, {7.0, 1.0}};
  EXPECT_EQ(normalize_costs(job), (std::vector<double>{1.0, 2.0, 3.5}));
  job.entries = {{5.0, 1.0}};
  EXPECT_EQ(normalize_costs(job), (std::vector<double>{1.0}));
  job.entries = {{3.0, 1.0}, {3.0, 2.0}};
  EXPECT_EQ(normalize_costs(job), (std::vector<double>{1.0, 1.0}));
}

TEST(IterationsToThresholds, DirectScan) {
  const std::vector<double> normalized{3.0, 1.15, 1.0};
  const auto hits = iterations_to_thresholds(trace_of({0, 1, 2}), normalized);
  EXPECT_EQ(hits[0], 2u);
  EXPECT_EQ(hits[1], 3u);
  EXPECT_EQ(hits[2], 3u);
  const auto first = iterations_to_thresholds(trace_of({2, 0, 1}), normalized);
  for (const auto& h : first) EXPECT_EQ(h, 1u);
  const auto never = iterations_to_thresholds(trace_of({0}), normalized);
  for (const auto& h : never) EXPECT_FALSE(h);
}

TEST(IterationsToThresholds, MatchesFirstCrossingOracle) {
  Rng rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 1 + uniform_index(rng, 30);
    std::vector<double> normalized(n);
    for (auto& v : normalized) v = 1.0 + 2.0 * uniform_unit(rng);
    normalized[uniform_index(rng, n)] = 1.0;
    std::vector<ConfigId> order(n);
    for (ConfigId i = 0; i < n; ++i) order[i] = i;
    order = sample_without_replacement<ConfigId>(rng, order, 1 + uniform_index(rng, n));
    const auto hits = iterations_to_thresholds(trace_of(order), normalized);
    const double thresholds[] = {1.2, 1.1, 1.0};
    for (std::size_t t = 0; t < 3; ++t) {
      std::optional<std::size_t> want;
      for (std::size_t k = 1; k <= order.size() && !want; ++k) {
        double m = 1e300;
        for (std::size_t i = 0; i < k; ++i) m = std::min(m, normalized[order[i]]);
        if (m <= thresholds[t]) want = k;
      }
      EXPECT_EQ(hits[t], want);
    }
  }
}

TEST(Series, BestAndCumulativeCarryTheBestForward) {
  const std::vector<double> normalized{3.0, 1.5, 1.0, 2.0};
  const auto t = trace_of({0, 3, 1});
  EXPECT_EQ(best_cost_series(t, normalized, 5), (std::vector<double>{3.0, 2.0, 1.5, 1.5, 1.5}));
  EXPECT_EQ(cumulative_cost_series(t, normalized, 5), (std::vector<double>{3.0, 5.0, 6.5, 8.0, 9.5}));
}

TEST(Series, CumulativeEqualsPrefixSums) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 2 + uniform_index(rng, 20);
    std::vector<double> normalized(n);
    for (auto& v : normalized) v = 1.0 + uniform_unit(rng);
    std::vector<ConfigId> all(n);
    for (ConfigId i = 0; i < n; ++i) all[i] = i;
    const auto order = sample_without_replacement<ConfigId>(rng, all, n);
    const auto cum = cumulative_cost_series(trace_of(order), normalized, n);
    double sum = 0;
    for (std::size_t k = 0; k < n; ++k) {
      sum += normalized[order[k]];
      EXPECT_NEAR(cum[k], sum, 1e-12);
    }
  }
}

TEST(CompareMethods, UnclearOnlyGivesFullQuotients) {
  const auto bench = generate_bottleneck_benchmark(2, {0, 0, 3});
  CompareParams params;
  params.n_seeds = 5;
  params.threads = 2;
  const auto r = compare_methods(bench.table, bench.categories, params);
  ASSERT_EQ(r.jobs.size(), 3u);
  for (const auto& j : r.jobs) {
    for (double q : j.quotient) EXPECT_DOUBLE_EQ(q, 1.0);
    EXPECT_EQ(j.priority_size, j.space_size);
  }
  for (double q : r.mean_quotient) EXPECT_DOUBLE_EQ(q, 1.0);
  EXPECT_EQ(r.best_cost_baseline, r.best_cost_ruya);
  EXPECT_EQ(r.seeds, (std::vector<std::uint64_t>{0, 1, 2, 3, 4}));
}

TEST(CompareMethods, ExhaustiveSearchesAlwaysReachTheOptimum) {
  const auto bench = generate_bottleneck_benchmark(9, {2, 2, 1});
  CompareParams params;
  params.n_seeds = 3;
  params.threads = 1;
  const auto r = compare_methods(bench.table, bench.categories, params);
  for (const auto& j : r.jobs) {
    for (auto u : j.baseline.unreached) EXPECT_EQ(u, 0u);
    for (auto u : j.ruya.unreached) EXPECT_EQ(u, 0u);
    EXPECT_GE(j.baseline.mean_iterations[2], j.baseline.mean_iterations[0]);
  }
  EXPECT_NEAR(r.best_cost_baseline.back(), 1.0, 1e-12);
  EXPECT_NEAR(r.best_cost_ruya.back(), 1.0, 1e-12);
}

TEST(CompareMethods, ReportIndependentOfThreadCount) {
  const auto bench = generate_bottleneck_benchmark(4, {2, 2, 2});
  CompareParams params;
  params.n_seeds = 4;
  params.search.use_stopping_rule = true;
  std::string outputs[3];
  const unsigned threads[] = {1, 3, 8};
  for (int i = 0; i < 3; ++i) {
    params.threads = threads[i];
    const auto r = compare_methods(bench.table, bench.categories, params);
    std::ostringstream out;
    write_report_csv(r, out);
    write_series_csv(r.best_cost_baseline, r.best_cost_ruya, out);
    write_series_csv(r.cumulative_cost_baseline, r.cumulative_cost_ruya, out);
    outputs[i] = out.str();
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  EXPECT_EQ(outputs[0], outputs[2]);
}

TEST(CompareMethods, MissingCategoryIsConfigError) {
  const auto bench = generate_bottleneck_benchmark(1, {1, 1, 0});
  CategoryMap partial;
  partial.emplace(bench.table.jobs[0].meta.name, bench.categories.at(bench.table.jobs[0].meta.name));
  CompareParams params;
  params.n_seeds = 1;
  EXPECT_THROW(compare_methods(bench.table, partial, params), ConfigError);
}

TEST(CompareMethods, ReportCsvShape) {
  const auto bench = generate_bottleneck_benchmark(6, {1, 1, 1});
  CompareParams params;
  params.n_seeds = 2;
  params.keep_traces = true;
  const auto r = compare_methods(bench.table, bench.categories, params);
  std::ostringstream out;
  write_report_csv(r, out);
  std::istringstream lines(out.str());
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows.back().rfind("Mean,", 0), 0u);
  const auto columns = detail::split_csv(rows.front()).size();
  for (const auto& row : rows) EXPECT_EQ(detail::split_csv(row).size(), columns);
  EXPECT_EQ(r.traces.size(), 3u * 2u * 2u);
  std::ostringstream traces;
  write_traces_csv(r.traces, traces);
  EXPECT_NE(traces.str().find("synthetic-linear-1,ruya,0,1,"), std::string::npos);
}

TEST(SyntheticBenchmark, LinearJobsHaveCliffOutsidePriority) {
  const auto bench = generate_bottleneck_benchmark(12);
  EXPECT_EQ(bench.table.jobs.size(), 12u);
  for (const auto& job : bench.table.jobs) {
    EXPECT_EQ(job.space.size(), 60u);
    const auto& jc = bench.categories.at(job.meta.name);
    if (jc.category != MemoryCategory::Linear) continue;
    MemoryModel m;
    m.category = MemoryCategory::Linear;
    const auto p = build_priority_partition(job.space, m, jc.requirement);
    const auto normalized = normalize_costs(job);
    double best_priority = 1e300;
    for (auto id : p.priority) best_priority = std::min(best_priority, normalized[id]);
    EXPECT_DOUBLE_EQ(best_priority, 1.0) << job.meta.name;
  }
}

TEST(SyntheticBenchmark, SeedDeterminesTable) {
  const auto a = generate_bottleneck_benchmark(5);
  const auto b = generate_bottleneck_benchmark(5);
  const auto c = generate_bottleneck_benchmark(6);
  std::ostringstream sa, sb, sc;
  write_replay_table_csv(a.table, sa);
  write_replay_table_csv(b.table, sb);
  write_replay_table_csv(c.table, sc);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str(), sc.str());
}
