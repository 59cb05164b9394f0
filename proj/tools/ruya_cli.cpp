// ruya: profile a job's memory use, categorize it, partition a configuration
// space around it, search that space, and replay comparisons against the
// plain Bayesian baseline. Every command writes a manifest next to its output;
// `ruya rerun <manifest>` repeats the command after checking input digests.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ruya/config_space.hpp"
#include "ruya/memory_model.hpp"
#include "ruya/profiler.hpp"
#include "ruya/replay_harness.hpp"
#include "ruya/search_engine.hpp"
#include "ruya/synthetic.hpp"

#ifndef RUYA_VERSION
#define RUYA_VERSION "0.0.0"
#endif

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Files

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ruya::InputError("cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw ruya::Error("sha256 init failed");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", md[i]);
  return hex;
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

// Existing input file, as an absolute path. A missing file is a usage error.
std::string input_file(const std::string& p, std::string_view flag) {
  if (!fs::is_regular_file(p)) throw UsageError(fmt::format("{}: no such file '{}'", flag, p));
  return absolute(p);
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw ruya::InputError("cannot write '" + path.string() + "'");
}

template <typename Writer>
std::string render(Writer&& w) {
  std::ostringstream s;
  w(s);
  return s.str();
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ruya::InputError("cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ruya::ParseError(std::string("malformed JSON in '") + path + "': " + e.what(), 0);
  }
}

std::vector<double> parse_doubles(const std::string& s, std::string_view flag) {
  std::vector<double> out;
  for (const auto& field : ruya::detail::split_csv(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("{}: expected comma-separated numbers, got '{}'", flag, s));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shared parameter blocks

ruya::PartitionParams partition_params(const json& p) {
  ruya::PartitionParams pp;
  pp.flat_fraction = p.at("flat_fraction").get<double>();
  pp.per_node_overhead_gb = p.at("overhead_gb").get<double>();
  pp.leeway_fraction = p.at("leeway").get<double>();
  pp.fallback_fraction = p.at("fallback_fraction").get<double>();
  pp.validate();
  return pp;
}

ruya::SearchParams search_params(const json& p) {
  ruya::SearchParams sp;
  sp.n_initial = p.at("n_initial").get<std::size_t>();
  sp.ei_stop_fraction = p.at("ei_stop").get<double>();
  sp.min_observations = p.at("min_observations").get<std::size_t>();
  if (!p.at("max_iterations").is_null()) sp.max_iterations = p.at("max_iterations").get<std::size_t>();
  sp.use_stopping_rule = p.at("stopping").get<bool>();
  sp.refit_length_scales = p.at("refit_length_scales").get<bool>();
  sp.seed = p.value("seed", std::uint64_t{0});
  sp.validate();
  return sp;
}

// Category and requirement from a model file, or from explicit flags.
ruya::JobCategory job_category(const json& p) {
  ruya::JobCategory jc;
  if (!p.value("model", std::string()).empty()) {
    const auto j = read_json(p.at("model").get<std::string>());
    jc.category = ruya::memory_model_from_json(j).category;
    if (j.contains("requirement_gb")) {
      jc.requirement = ruya::MemoryRequirement{j.at("requirement_gb").get<double>(), j.value("requirement_clamped", false)};
    }
  } else {
    jc.category = ruya::parse_category(p.at("category").get<std::string>());
  }
  if (!p.at("job_gb").is_null()) jc.requirement = ruya::MemoryRequirement{p.at("job_gb").get<double>(), false};
  return jc;
}

ruya::MemoryModel model_for(const ruya::JobCategory& jc) {
  ruya::MemoryModel m;
  m.category = jc.category;
  return m;
}

json config_json(const ruya::ConfigSpace& space, ruya::ConfigId id) {
  const auto& c = space.at(id);
  return {{"id", id}, {"machine_type", c.machine_type.name}, {"scale_out", c.scale_out}};
}

// ---------------------------------------------------------------------------
// Commands. Each runner takes fully resolved parameters so a manifest can
// replay it without the original command line.

void run_profile(const json& p) {
  auto cmd = ruya::CommandTemplate::parse(p.at("cmd").get<std::string>());
  for (const auto& kv : p.at("env")) {
    const auto s = kv.get<std::string>();
    const auto eq = s.find('=');
    cmd.env.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  cmd.working_dir = p.at("workdir").get<std::string>();

  ruya::ProfileOptions opt;
  opt.window = {p.at("window").at(0).get<double>(), p.at("window").at(1).get<double>()};
  opt.seed = p.at("seed").get<std::uint64_t>();
  opt.poll_interval_s = p.at("poll").get<double>();
  opt.mode = p.at("mode").get<std::string>() == "prefix" ? ruya::SampleMode::Prefix : ruya::SampleMode::Bernoulli;
  opt.work_dir = p.at("sample_dir").get<std::string>();
  opt.keep_samples = p.at("keep_samples").get<bool>();

  const auto data = p.at("data").get<std::string>();
  const auto report = ruya::profile_job(cmd, data, opt);
  auto j = ruya::profiling_report_to_json(report);
  j["dataset_bytes"] = fs::file_size(data);
  j["command"] = p.at("cmd");
  write_file(p.at("out").get<std::string>(), j.dump(2) + "\n");

  fmt::print("calibrated fraction {:.6g}, {} samples, {:.1f} s\n", report.calibrated_fraction, report.samples.size(),
             report.wall_time_s);
  for (const auto& s : report.samples) fmt::print("  {:>14} input bytes  {:>14} job bytes\n", s.input_bytes, s.job_memory_bytes);
}

void run_model(const json& p) {
  std::vector<ruya::MemorySample> samples;
  std::optional<std::uint64_t> full;
  if (!p.at("full_size").is_null()) full = p.at("full_size").get<std::uint64_t>();
  if (!p.at("report").get<std::string>().empty()) {
    const auto j = read_json(p.at("report").get<std::string>());
    samples = ruya::profiling_report_from_json(j).samples;
    if (!full && j.contains("dataset_bytes")) full = j.at("dataset_bytes").get<std::uint64_t>();
  } else {
    std::ifstream in(p.at("samples").get<std::string>());
    samples = ruya::parse_sample_table(in);
  }
  ruya::R2Thresholds t{p.at("r2_low").get<double>(), p.at("r2_high").get<double>()};
  t.validate();

  const auto model = ruya::fit_memory_model(samples, t);
  auto j = ruya::memory_model_to_json(model);
  fmt::print("category {}\nr2 {:.6f}\n", ruya::to_string(model.category), model.r2);
  if (model.category == ruya::MemoryCategory::Linear) {
    if (full) {
      const auto req = ruya::extrapolate_requirement(model, *full, &std::cerr);
      j["full_dataset_bytes"] = *full;
      j["requirement_gb"] = req.job_gb;
      j["requirement_clamped"] = req.clamped;
      fmt::print("job_gb {:.3f}\n", req.job_gb);
    } else {
      std::cerr << "note: no full dataset size given; requirement not extrapolated\n";
    }
  }
  write_file(p.at("out").get<std::string>(), j.dump(2) + "\n");
}

void run_partition(const json& p) {
  const auto space = ruya::load_catalog(p.at("catalog").get<std::string>());
  const auto jc = job_category(p);
  const auto part = ruya::build_priority_partition(space, model_for(jc), jc.requirement, partition_params(p));

  json j{{"category", ruya::to_string(jc.category)},
         {"job_gb", jc.requirement ? json(jc.requirement->job_gb) : json()},
         {"priority", json::array()},
         {"remainder", json::array()}};
  for (auto id : part.priority) j["priority"].push_back(config_json(space, id));
  for (auto id : part.remainder) j["remainder"].push_back(config_json(space, id));
  write_file(p.at("out").get<std::string>(), j.dump(2) + "\n");
  fmt::print("{}: {} of {} configs in the priority set\n", ruya::to_string(jc.category), part.priority.size(), space.size());
}

void run_search(const json& p) {
  const auto table = ruya::load_replay_table(p.at("table").get<std::string>(), {p.at("per_job_space").get<bool>()});
  const auto name = p.at("job").get<std::string>();
  const auto& job = table.job(name);
  const auto sp = search_params(p);
  const auto method = p.at("method").get<std::string>();

  ruya::ReplayOracle oracle(job);
  ruya::SearchTrace trace;
  if (method == "baseline") {
    trace = ruya::run_baseline_search(job.space, oracle, sp);
  } else {
    ruya::JobCategory jc;
    if (!p.at("categories").get<std::string>().empty()) {
      const auto cats = ruya::load_categories(p.at("categories").get<std::string>());
      auto it = cats.find(name);
      if (it == cats.end()) throw ruya::ConfigError("job '" + name + "' has no entry in the categories file");
      jc = it->second;
    } else {
      jc = job_category(p);
    }
    const auto part = ruya::build_priority_partition(job.space, model_for(jc), jc.requirement, partition_params(p));
    trace = ruya::run_ruya_search(job.space, part, oracle, sp);
  }

  const std::vector<ruya::TraceRecord> records{{name, method, sp.seed, trace}};
  write_file(p.at("out").get<std::string>(), render([&](std::ostream& o) { ruya::write_traces_csv(records, o); }));

  const auto best = std::min_element(trace.observations.begin(), trace.observations.end(),
                                     [](const auto& a, const auto& b) { return a.cost < b.cost; });
  const auto& c = job.space.at(best->config_id);
  fmt::print("{} iterations ({}); best {} x{} cost {:.6g} at iteration {}\n", trace.size(),
             ruya::to_string(trace.stop_reason), c.machine_type.name, c.scale_out, best->cost, best->iteration);
}

void run_compare(const json& p) {
  const auto table = ruya::load_replay_table(p.at("table").get<std::string>(), {p.at("per_job_space").get<bool>()});
  const auto cats = ruya::load_categories(p.at("categories").get<std::string>());

  ruya::CompareParams cp;
  cp.n_seeds = p.at("seeds").get<std::size_t>();
  cp.seed_base = p.at("seed_base").get<std::uint64_t>();
  cp.search = search_params(p);
  cp.partition = partition_params(p);
  cp.thresholds = p.at("thresholds").get<std::vector<double>>();
  cp.threads = p.at("threads").get<unsigned>();
  cp.keep_traces = p.at("traces").get<bool>();

  auto jobs = p.at("jobs").get<std::vector<std::string>>();
  if (jobs.empty()) {
    for (const auto& j : table.jobs) jobs.push_back(j.meta.name);
  }
  const auto r = ruya::compare_methods(table, cats, jobs, cp);

  const fs::path dir = p.at("out").get<std::string>();
  write_file(dir / "report.csv", render([&](std::ostream& o) { ruya::write_report_csv(r, o); }));
  write_file(dir / "best_cost.csv",
             render([&](std::ostream& o) { ruya::write_series_csv(r.best_cost_baseline, r.best_cost_ruya, o); }));
  write_file(dir / "cumulative_cost.csv", render([&](std::ostream& o) {
               ruya::write_series_csv(r.cumulative_cost_baseline, r.cumulative_cost_ruya, o);
             }));
  if (cp.keep_traces) write_file(dir / "traces.csv", render([&](std::ostream& o) { ruya::write_traces_csv(r.traces, o); }));

  fmt::print("{} jobs x {} seeds\n{:<12}", r.jobs.size(), r.seeds.size(), "");
  for (double t : r.thresholds) fmt::print("{:>10}", ruya::detail::threshold_label(t));
  const auto row = [](std::string_view label, const std::vector<double>& v, double scale) {
    fmt::print("\n{:<12}", label);
    for (double x : v) fmt::print("{:>10}", ruya::detail::fmt_num(scale * x, 3));
  };
  row("baseline", r.mean_baseline, 1.0);
  row("ruya", r.mean_ruya, 1.0);
  row("quotient %", r.mean_quotient, 100.0);
  fmt::print("\n");
}

void run_synth(const json& p) {
  ruya::SyntheticCounts counts{p.at("linear").get<std::size_t>(), p.at("flat").get<std::size_t>(),
                               p.at("unclear").get<std::size_t>()};
  const auto bench = ruya::generate_bottleneck_benchmark(p.at("seed").get<std::uint64_t>(), counts, partition_params(p));
  const fs::path dir = p.at("out").get<std::string>();
  write_file(dir / "table.csv", render([&](std::ostream& o) { ruya::write_replay_table_csv(bench.table, o); }));
  write_file(dir / "categories.csv", render([&](std::ostream& o) { ruya::write_categories_csv(bench.categories, o); }));
  fmt::print("{} jobs x {} configs\n", bench.table.jobs.size(), bench.table.jobs.empty() ? 0 : bench.table.jobs[0].space.size());
}

struct Command {
  void (*run)(const json&);
  std::vector<std::string> inputs;  // params holding input file paths
  bool out_is_dir;
};

const std::map<std::string, Command>& commands() {
  static const std::map<std::string, Command> table{
      {"profile", {run_profile, {"data"}, false}},
      {"model", {run_model, {"report", "samples"}, false}},
      {"partition", {run_partition, {"catalog", "model"}, false}},
      {"search", {run_search, {"table", "categories", "model"}, false}},
      {"replay compare", {run_compare, {"table", "categories"}, true}},
      {"synth", {run_synth, {}, true}},
  };
  return table;
}

fs::path manifest_path(const json& params, const Command& cmd) {
  const fs::path out = params.at("out").get<std::string>();
  return cmd.out_is_dir ? out / "manifest.json" : fs::path(out.string() + ".manifest.json");
}

json input_digests(const json& params, const Command& cmd) {
  json d = json::object();
  for (const auto& key : cmd.inputs) {
    const auto path = params.value(key, std::string());
    if (!path.empty()) d[key] = {{"path", path}, {"sha256", sha256_file(path)}};
  }
  return d;
}

void execute(const std::string& name, const json& params, bool dry_run = false) {
  const auto& cmd = commands().at(name);
  if (dry_run) {
    std::cout << json{{"subcommand", name}, {"params", params}}.dump(2) << '\n';
    return;
  }
  json manifest{{"tool", "ruya"},
                {"version", RUYA_VERSION},
                {"subcommand", name},
                {"params", params},
                {"inputs", input_digests(params, cmd)},
                {"seed", params.contains("seed") ? params.at("seed") : params.value("seed_base", json())}};
  cmd.run(params);
  write_file(manifest_path(params, cmd), manifest.dump(2) + "\n");
}

void rerun(const std::string& manifest_file, const std::string& out_override, bool dry_run) {
  const auto m = read_json(manifest_file);
  const auto name = m.at("subcommand").get<std::string>();
  if (!commands().contains(name)) throw ruya::ConfigError("manifest names unknown subcommand '" + name + "'");
  for (const auto& [key, entry] : m.at("inputs").items()) {
    const auto path = entry.at("path").get<std::string>();
    if (!fs::is_regular_file(path)) throw ruya::InputError("input '" + key + "' missing: " + path);
    if (sha256_file(path) != entry.at("sha256").get<std::string>()) {
      throw ruya::InputError("input '" + key + "' changed since the manifest was written: " + path);
    }
  }
  auto params = m.at("params");
  if (!out_override.empty()) params["out"] = absolute(out_override);
  execute(name, params, dry_run);
}

// ---------------------------------------------------------------------------
// Command line

struct SearchFlags {
  std::size_t n_initial = 3;
  double ei_stop = 0.1;
  std::size_t min_observations = 6;
  std::size_t max_iterations = 0;
  bool refit = false;

  void add(CLI::App* app) {
    app->add_option("--n-initial", n_initial, "random initial configurations")->check(CLI::PositiveNumber);
    app->add_option("--ei-stop", ei_stop, "stop when max EI < this fraction of the best cost")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--min-observations", min_observations, "observations before the stopping rule may fire");
    app->add_option("--max-iterations", max_iterations, "iteration cap (0: size of the space)");
    app->add_flag("--refit-length-scales", refit, "grid-search GP length scales by marginal likelihood");
  }

  void store(json& p) const {
    p["n_initial"] = n_initial;
    p["ei_stop"] = ei_stop;
    p["min_observations"] = min_observations;
    p["max_iterations"] = max_iterations == 0 ? json() : json(max_iterations);
    p["refit_length_scales"] = refit;
  }
};

struct PartitionFlags {
  double flat_fraction = 0.15;
  double overhead_gb = 2.0;
  double leeway = 0.10;
  double fallback_fraction = 0.10;

  void add(CLI::App* app) {
    app->add_option("--flat-fraction", flat_fraction, "share of lowest-memory configs prioritized for flat jobs")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--overhead-gb", overhead_gb, "memory per node reserved for OS and framework")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--leeway", leeway, "safety margin on the job's memory requirement")->check(CLI::NonNegativeNumber);
    app->add_option("--fallback-fraction", fallback_fraction,
                    "size of each memory extreme prioritized when no config fits")
        ->check(CLI::Range(0.0, 0.5));
  }

  void store(json& p) const {
    p["flat_fraction"] = flat_fraction;
    p["overhead_gb"] = overhead_gb;
    p["leeway"] = leeway;
    p["fallback_fraction"] = fallback_fraction;
  }
};

// --model file, or --category with an optional --job-gb.
struct CategoryFlags {
  std::string model;
  std::string category;
  std::optional<double> job_gb;

  void add(CLI::App* app) {
    app->add_option("--model", model, "model file written by `ruya model`");
    app->add_option("--category", category, "memory category instead of a model file")
        ->check(CLI::IsMember({"linear", "flat", "unclear"}));
    app->add_option("--job-gb", job_gb, "memory requirement in GB (overrides the model's)")->check(CLI::PositiveNumber);
  }

  void store(json& p, bool required) const {
    if (!model.empty() && !category.empty()) throw UsageError("--model and --category are mutually exclusive");
    if (required && model.empty() && category.empty()) throw UsageError("one of --model or --category is required");
    p["model"] = model.empty() ? std::string() : input_file(model, "--model");
    p["category"] = category;
    p["job_gb"] = job_gb ? json(*job_gb) : json();
  }
};

int main_impl(int argc, char** argv) {
  CLI::App app{"Memory-aware, priority-first Bayesian search for cluster configurations."};
  app.set_version_flag("--version", RUYA_VERSION);
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  bool dry_run = false;
  app.add_flag("--dry-run", dry_run, "print the resolved parameters as JSON and exit without running");

  std::string out;
  std::uint64_t seed = 0;
  SearchFlags sf;
  PartitionFlags pf;
  CategoryFlags cf;

  // profile
  auto* profile = app.add_subcommand("profile", "Profile a job's peak memory on five growing dataset samples.");
  profile->footer(
      "Calibration starts from a 0.01 sample fraction, halving or doubling it until a run lands in the window.\n"
      "The command template must contain {input} exactly once.");
  std::string pcmd;
  std::string data;
  std::string window = "30,300";
  double poll = 0.2;
  std::string mode = "bernoulli";
  std::vector<std::string> env;
  std::string workdir;
  std::string sample_dir;
  bool keep_samples = false;
  profile->add_option("--cmd", pcmd, "command template, e.g. \"./job --input {input}\"")->required();
  profile->add_option("--data", data, "full dataset (newline-delimited records)")->required();
  profile->add_option("--window", window, "target runtime window in seconds: min,max");
  profile->add_option("--seed", seed, "sampling seed");
  profile->add_option("--poll", poll, "memory polling interval in seconds")->check(CLI::PositiveNumber);
  profile->add_option("--mode", mode, "sampling mode")->check(CLI::IsMember({"bernoulli", "prefix"}));
  profile->add_option("--env", env, "extra environment variable KEY=VALUE (repeatable)");
  profile->add_option("--workdir", workdir, "working directory for the job");
  profile->add_option("--sample-dir", sample_dir, "where sample files go (default: a temp dir)");
  profile->add_flag("--keep-samples", keep_samples, "keep sample files after profiling");
  profile->add_option("--out", out, "report file (JSON)")->required();

  // model
  auto* model = app.add_subcommand("model", "Fit and categorize a memory model; extrapolate the requirement.");
  std::string report;
  std::string samples;
  std::uint64_t full_size = 0;
  double r2_low = 0.1;
  double r2_high = 0.99;
  auto* report_opt = model->add_option("--report", report, "profiling report from `ruya profile`");
  auto* samples_opt = model->add_option("--samples", samples, "text table of input_bytes job_memory_bytes rows");
  report_opt->excludes(samples_opt);
  auto* full_opt = model->add_option("--full-size", full_size, "full dataset size in bytes (default: from the report)")
                       ->check(CLI::PositiveNumber);
  model->add_option("--r2-low", r2_low, "below this R2 the job is flat");
  model->add_option("--r2-high", r2_high, "at or above this R2 the job is linear");
  model->add_option("--out", out, "model file (JSON)")->required();

  // partition
  auto* partition = app.add_subcommand("partition", "Split a configuration catalog into priority and remainder sets.");
  std::string catalog;
  partition->add_option("--catalog", catalog, "machine catalog (JSON)")->required();
  cf.add(partition);
  pf.add(partition);
  partition->add_option("--out", out, "partition file (JSON)")->required();

  // search
  auto* search = app.add_subcommand("search", "Search one job of a replay table and write its trace.");
  std::string table;
  std::string categories;
  std::string job;
  std::string method = "ruya";
  bool no_stopping = false;
  bool per_job_space = false;
  search->add_option("--table", table, "replay table (CSV)")->required();
  search->add_option("--job", job, "job name in the table")->required();
  search->add_option("--categories", categories, "category sidecar (CSV); alternative to --model/--category");
  search->add_option("--method", method, "search method")->check(CLI::IsMember({"ruya", "baseline"}));
  search->add_option("--seed", seed, "seed for the initial draws");
  search->add_flag("--no-stopping", no_stopping, "search until the space is exhausted");
  search->add_flag("--per-job-space", per_job_space, "each job's space is the configs it has rows for");
  cf.add(search);
  sf.add(search);
  pf.add(search);
  search->add_option("--out", out, "trace file (CSV)")->required();

  // replay compare
  auto* replay = app.add_subcommand("replay", "Replay-based evaluation.");
  replay->require_subcommand(1);
  auto* compare = replay->add_subcommand("compare", "Compare Ruya against the baseline over paired seeds.");
  std::size_t seeds = 200;
  std::uint64_t seed_base = 0;
  unsigned threads = 0;
  bool with_stopping = false;
  bool traces = false;
  std::string thresholds = "1.2,1.1,1.0";
  std::vector<std::string> jobs;
  compare->add_option("--table", table, "replay table (CSV)")->required();
  compare->add_option("--categories", categories, "category sidecar (CSV)")->required();
  compare->add_option("--seeds", seeds, "paired seeds per job")->check(CLI::PositiveNumber);
  compare->add_option("--seed-base", seed_base, "first seed");
  compare->add_option("--threads", threads, "worker threads (0: all cores)");
  compare->add_option("--thresholds", thresholds, "normalized-cost thresholds");
  compare->add_option("--jobs", jobs, "restrict to these jobs")->delimiter(',');
  compare->add_flag("--with-stopping", with_stopping, "apply the EI stopping rule (off: complete searches)");
  compare->add_flag("--traces", traces, "also write every search trace");
  compare->add_flag("--per-job-space", per_job_space, "each job's space is the configs it has rows for");
  sf.add(compare);
  pf.add(compare);
  compare->add_option("--out", out, "output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate the synthetic memory-bottleneck benchmark.");
  std::size_t n_linear = 4;
  std::size_t n_flat = 4;
  std::size_t n_unclear = 4;
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--linear", n_linear, "linear jobs");
  synth->add_option("--flat", n_flat, "flat jobs");
  synth->add_option("--unclear", n_unclear, "unclear jobs");
  pf.add(synth);
  synth->add_option("--out", out, "output directory")->required();

  // rerun
  auto* rerun_cmd = app.add_subcommand("rerun", "Repeat a command from its manifest after checking input digests.");
  std::string manifest;
  std::string rerun_out;
  rerun_cmd->add_option("manifest", manifest, "manifest written next to a previous output")->required();
  rerun_cmd->add_option("--out", rerun_out, "write outputs here instead of the original location");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  json p;
  if (rerun_cmd->parsed()) {
    rerun(input_file(manifest, "manifest"), rerun_out, dry_run);
    return 0;
  }
  if (profile->parsed()) {
    const auto w = parse_doubles(window, "--window");
    if (w.size() != 2) throw UsageError("--window: expected min,max");
    try {
      ruya::RuntimeWindow{w[0], w[1]}.validate();
      ruya::CommandTemplate::parse(pcmd);
    } catch (const ruya::InputError& e) {
      throw UsageError(e.what());
    }
    for (const auto& kv : env) {
      if (kv.find('=') == std::string::npos || kv.front() == '=') throw UsageError("--env: expected KEY=VALUE, got '" + kv + "'");
    }
    p = {{"cmd", pcmd},  {"data", input_file(data, "--data")},
         {"window", w},  {"seed", seed},
         {"poll", poll}, {"mode", mode},
         {"env", env},   {"workdir", workdir.empty() ? "" : absolute(workdir)},
         {"sample_dir", sample_dir.empty() ? "" : absolute(sample_dir)},
         {"keep_samples", keep_samples}};
    p["out"] = absolute(out);
    execute("profile", p, dry_run);
  } else if (model->parsed()) {
    if (report.empty() == samples.empty()) throw UsageError("exactly one of --report or --samples is required");
    p = {{"report", report.empty() ? "" : input_file(report, "--report")},
         {"samples", samples.empty() ? "" : input_file(samples, "--samples")},
         {"full_size", full_opt->count() ? json(full_size) : json()},
         {"r2_low", r2_low},
         {"r2_high", r2_high},
         {"out", absolute(out)}};
    execute("model", p, dry_run);
  } else if (partition->parsed()) {
    p["catalog"] = input_file(catalog, "--catalog");
    cf.store(p, true);
    pf.store(p);
    p["out"] = absolute(out);
    execute("partition", p, dry_run);
  } else if (search->parsed()) {
    p["table"] = input_file(table, "--table");
    p["job"] = job;
    p["method"] = method;
    p["seed"] = seed;
    p["stopping"] = !no_stopping;
    p["per_job_space"] = per_job_space;
    p["categories"] = categories.empty() ? "" : input_file(categories, "--categories");
    cf.store(p, method == "ruya" && categories.empty());
    sf.store(p);
    pf.store(p);
    p["out"] = absolute(out);
    execute("search", p, dry_run);
  } else if (compare->parsed()) {
    p["table"] = input_file(table, "--table");
    p["categories"] = input_file(categories, "--categories");
    p["seeds"] = seeds;
    p["seed_base"] = seed_base;
    p["threads"] = threads;
    p["thresholds"] = parse_doubles(thresholds, "--thresholds");
    p["jobs"] = jobs;
    p["stopping"] = with_stopping;
    p["traces"] = traces;
    p["per_job_space"] = per_job_space;
    sf.store(p);
    pf.store(p);
    p["out"] = absolute(out);
    execute("replay compare", p, dry_run);
  } else if (synth->parsed()) {
    p = {{"seed", seed}, {"linear", n_linear}, {"flat", n_flat}, {"unclear", n_unclear}};
    pf.store(p);
    p["out"] = absolute(out);
    execute("synth", p, dry_run);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return main_impl(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
