#pragma once

// Single-machine memory profiling: dataset sampling, runtime-window
// calibration of the sample size, and resident-memory monitoring of the job's
// process tree. Linux only (/proc).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <spawn.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "ruya/error.hpp"
#include "ruya/memory_model.hpp"
#include "ruya/random.hpp"

extern char** environ;

namespace ruya {

namespace fs = std::filesystem;

inline constexpr std::string_view kInputPlaceholder = "{input}";

// ---------------------------------------------------------------------------
// Errors

class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, std::uint64_t achieved_bytes)
      : Error(what), achieved_bytes_(achieved_bytes) {}
  [[nodiscard]] std::uint64_t achieved_bytes() const noexcept { return achieved_bytes_; }

 private:
  std::uint64_t achieved_bytes_;
};

struct TraceSeries {
  std::vector<double> timestamps;       // seconds since launch, strictly increasing
  std::vector<std::uint64_t> rss_bytes;
  std::uint64_t baseline_bytes = 0;

  [[nodiscard]] std::uint64_t peak_bytes() const {
    return rss_bytes.empty() ? 0 : *std::max_element(rss_bytes.begin(), rss_bytes.end());
  }
  // Peak above the pre-workload floor.
  [[nodiscard]] std::uint64_t job_memory_bytes() const {
    const auto peak = peak_bytes();
    return peak > baseline_bytes ? peak - baseline_bytes : 0;
  }
};

class ProfilingError : public Error {
 public:
  ProfilingError(const std::string& what, TraceSeries partial = {}, int exit_status = 0, std::string output = {})
      : Error(what), partial_(std::move(partial)), exit_status_(exit_status), output_(std::move(output)) {}
  [[nodiscard]] const TraceSeries& partial_trace() const noexcept { return partial_; }
  [[nodiscard]] int exit_status() const noexcept { return exit_status_; }
  [[nodiscard]] const std::string& output() const noexcept { return output_; }

 private:
  TraceSeries partial_;
  int exit_status_;
  std::string output_;
};

class CalibrationError : public Error {
 public:
  CalibrationError(const std::string& what, double last_runtime_s) : Error(what), last_runtime_s_(last_runtime_s) {}
  [[nodiscard]] double last_runtime_s() const noexcept { return last_runtime_s_; }

 private:
  double last_runtime_s_;
};

// ---------------------------------------------------------------------------
// Command templates

struct CommandTemplate {
  std::vector<std::string> argv;                          // exactly one element contains "{input}"
  std::vector<std::pair<std::string, std::string>> env;   // added to / overriding the parent environment
  fs::path working_dir;                                   // empty: inherit

  void validate() const {
    if (argv.empty()) throw InputError("command template is empty");
    std::size_t count = 0;
    for (const auto& a : argv) {
      for (auto pos = a.find(kInputPlaceholder); pos != std::string::npos; pos = a.find(kInputPlaceholder, pos + 1)) {
        ++count;
      }
    }
    if (count != 1) {
      throw InputError("command template must contain the {input} placeholder exactly once (found " +
                       std::to_string(count) + ")");
    }
  }

  [[nodiscard]] std::vector<std::string> instantiate(const fs::path& input) const {
    validate();
    std::vector<std::string> out = argv;
    for (auto& a : out) {
      if (auto pos = a.find(kInputPlaceholder); pos != std::string::npos) a.replace(pos, kInputPlaceholder.size(), input.string());
    }
    return out;
  }

  // Splits a command line on whitespace; single and double quotes group, backslash escapes.
  static CommandTemplate parse(std::string_view line) {
    CommandTemplate t;
    std::string cur;
    bool in_token = false;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char ch = line[i];
      if (quote) {
        if (ch == quote) {
          quote = 0;
        } else if (ch == '\\' && quote == '"' && i + 1 < line.size()) {
          cur += line[++i];
        } else {
          cur += ch;
        }
      } else if (ch == '\'' || ch == '"') {
        quote = ch;
        in_token = true;
      } else if (ch == '\\' && i + 1 < line.size()) {
        cur += line[++i];
        in_token = true;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        if (in_token) t.argv.push_back(std::exchange(cur, {}));
        in_token = false;
      } else {
        cur += ch;
        in_token = true;
      }
    }
    if (quote) throw InputError("unterminated quote in command template");
    if (in_token) t.argv.push_back(cur);
    t.validate();
    return t;
  }
};

// ---------------------------------------------------------------------------
// Sampling

enum class SampleMode { Bernoulli, Prefix };

struct SampleFile {
  fs::path path;
  std::uint64_t bytes = 0;
  std::uint64_t records = 0;
};

// Bernoulli mode keeps each newline-terminated record independently with
// probability `fraction`; Prefix mode keeps the leading records until the
// byte share is reached. Fraction 1.0 copies the file.
inline SampleFile generate_sample(const fs::path& dataset, double fraction, std::uint64_t seed, const fs::path& out_path,
                                  SampleMode mode = SampleMode::Bernoulli, char delimiter = '\n') {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("sample fraction must be in (0, 1]");
  std::ifstream in(dataset, std::ios::binary);
  if (!in) throw SamplingError("cannot read dataset '" + dataset.string() + "'", 0);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw SamplingError("cannot write sample '" + out_path.string() + "'", 0);

  SampleFile result{out_path, 0, 0};
  if (fraction == 1.0) {
    out << in.rdbuf();
    out.flush();
    result.bytes = fs::file_size(out_path);
    in.clear();
    in.seekg(0);
    result.records = static_cast<std::uint64_t>(
        std::count(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>(), delimiter));
  } else {
    Rng rng(seed);
    const auto prefix_budget = static_cast<std::uint64_t>(fraction * static_cast<double>(fs::file_size(dataset)));
    std::string record;
    while (std::getline(in, record, delimiter)) {
      const bool terminated = !in.eof();
      bool keep = false;
      if (mode == SampleMode::Bernoulli) {
        keep = uniform_unit(rng) < fraction;
      } else {
        keep = result.bytes < prefix_budget;
        if (!keep) break;
      }
      if (!keep) continue;
      out << record;
      result.bytes += record.size();
      if (terminated) {
        out.put(delimiter);
        ++result.bytes;
      }
      ++result.records;
    }
    if (in.bad()) throw SamplingError("error while reading dataset '" + dataset.string() + "'", result.bytes);
  }
  out.close();
  if (!out) throw SamplingError("error while writing sample '" + out_path.string() + "'", result.bytes);
  if (result.bytes == 0) {
    throw SamplingError("sample at fraction " + std::to_string(fraction) + " of '" + dataset.string() + "' is empty",
                        result.bytes);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Process monitoring

namespace detail {

struct ProcStat {
  pid_t pid = 0;
  pid_t ppid = 0;
  pid_t pgrp = 0;
  std::uint64_t rss_pages = 0;
};

inline std::optional<ProcStat> read_proc_stat(pid_t pid) {
  std::ifstream in("/proc/" + std::to_string(pid) + "/stat");
  std::string content;
  if (!in || !std::getline(in, content)) return std::nullopt;
  // The command name may contain spaces and parentheses; fields resume after the last ')'.
  const auto close = content.rfind(')');
  if (close == std::string::npos) return std::nullopt;
  std::istringstream rest(content.substr(close + 2));
  std::string state;
  ProcStat s;
  s.pid = pid;
  rest >> state >> s.ppid >> s.pgrp;
  std::string skip;
  // fields 6..23 (session .. vsize), then rss
  for (int i = 0; i < 18 && rest; ++i) rest >> skip;
  rest >> s.rss_pages;
  if (!rest) return std::nullopt;
  return s;
}

// Resident memory summed over `root`, its descendants and its process group.
inline std::uint64_t tree_rss_bytes(pid_t root) {
  std::vector<ProcStat> procs;
  for (const auto& entry : fs::directory_iterator("/proc", fs::directory_options::skip_permission_denied)) {
    const auto name = entry.path().filename().string();
    if (name.empty() || !std::all_of(name.begin(), name.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    if (auto s = read_proc_stat(static_cast<pid_t>(std::stol(name)))) procs.push_back(*s);
  }
  std::set<pid_t> members{root};
  bool grew = true;
  while (grew) {
    grew = false;
    for (const auto& p : procs) {
      if (!members.contains(p.pid) && (members.contains(p.ppid) || p.pgrp == root)) {
        members.insert(p.pid);
        grew = true;
      }
    }
  }
  static const auto page = static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
  std::uint64_t total = 0;
  for (const auto& p : procs) {
    if (members.contains(p.pid)) total += p.rss_pages * page;
  }
  return total;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

struct MonitorOptions {
  double poll_interval_s = 0.2;
  std::optional<double> timeout_s;  // kill the process group when exceeded
};

struct RunResult {
  TraceSeries trace;
  double runtime_s = 0.0;
  int exit_status = 0;  // exit code, or 128 + signal
  bool timed_out = false;
  std::string output;   // combined stdout/stderr
};

// Launches the command in its own process group and samples the group's
// resident memory until it exits. Never throws on a nonzero exit; see monitor_run.
inline RunResult run_monitored(const CommandTemplate& cmd, const fs::path& input, const MonitorOptions& options = {}) {
  if (!(options.poll_interval_s > 0.0)) throw InputError("poll interval must be positive");
  const auto args = cmd.instantiate(input);

  std::vector<std::string> env_strings;
  std::map<std::string, std::string> overrides(cmd.env.begin(), cmd.env.end());
  for (char** e = environ; e && *e; ++e) {
    std::string kv(*e);
    const auto key = kv.substr(0, kv.find('='));
    if (!overrides.contains(key)) env_strings.push_back(std::move(kv));
  }
  for (const auto& [k, v] : overrides) env_strings.push_back(k + "=" + v);

  std::vector<char*> argv_ptrs;
  for (const auto& a : args) argv_ptrs.push_back(const_cast<char*>(a.c_str()));
  argv_ptrs.push_back(nullptr);
  std::vector<char*> env_ptrs;
  for (const auto& e : env_strings) env_ptrs.push_back(const_cast<char*>(e.c_str()));
  env_ptrs.push_back(nullptr);

  char log_template[] = "/tmp/ruya-run-XXXXXX";
  const int log_fd = mkstemp(log_template);
  if (log_fd < 0) throw ProfilingError("cannot create output capture file");
  const fs::path log_path(log_template);
  close(log_fd);

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log_template, O_WRONLY | O_TRUNC, 0600);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  if (!cmd.working_dir.empty()) posix_spawn_file_actions_addchdir_np(&actions, cmd.working_dir.c_str());
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  pid_t pid = 0;
  const int rc = posix_spawnp(&pid, argv_ptrs[0], &actions, &attr, argv_ptrs.data(), env_ptrs.data());
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0) {
    fs::remove(log_path);
    throw ProfilingError("cannot launch '" + args.front() + "': " + std::strerror(rc), {}, 127);
  }

  RunResult result;
  const auto poll = std::chrono::duration<double>(options.poll_interval_s);
  int status = 0;
  bool exited = false;
  while (!exited) {
    const double t = std::chrono::duration<double>(clock::now() - start).count();
    const auto rss = detail::tree_rss_bytes(pid);
    if (result.trace.timestamps.empty() || t > result.trace.timestamps.back()) {
      result.trace.timestamps.push_back(t);
      result.trace.rss_bytes.push_back(rss);
    }
    if (waitpid(pid, &status, WNOHANG) == pid) break;
    if (options.timeout_s && t >= *options.timeout_s) {
      kill(-pid, SIGKILL);
      waitpid(pid, &status, 0);
      result.timed_out = true;
      break;
    }
    // Sleep in short slices so a quick exit is noticed promptly.
    const auto wake = clock::now() + std::chrono::duration_cast<clock::duration>(poll);
    while (clock::now() < wake) {
      if (waitpid(pid, &status, WNOHANG) == pid) {
        exited = true;
        break;
      }
      std::this_thread::sleep_for(std::min<clock::duration>(std::chrono::milliseconds(10), wake - clock::now()));
    }
  }
  // Reap anything the job left behind in its group.
  kill(-pid, SIGKILL);
  result.runtime_s = std::chrono::duration<double>(clock::now() - start).count();
  result.exit_status = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);

  const auto& rss = result.trace.rss_bytes;
  const auto early = std::min<std::size_t>(3, rss.size());
  result.trace.baseline_bytes = early == 0 ? 0 : *std::min_element(rss.begin(), rss.begin() + static_cast<std::ptrdiff_t>(early));
  result.output = detail::read_file(log_path);
  fs::remove(log_path);
  return result;
}

inline TraceSeries monitor_run(const CommandTemplate& cmd, const fs::path& input, double poll_interval_s = 0.2) {
  auto r = run_monitored(cmd, input, {poll_interval_s, std::nullopt});
  if (r.exit_status != 0) {
    throw ProfilingError("job exited with status " + std::to_string(r.exit_status) + ": " + r.output,
                         std::move(r.trace), r.exit_status, r.output);
  }
  return std::move(r.trace);
}

// ---------------------------------------------------------------------------
// Calibration

struct RuntimeWindow {
  double min_s = 30.0;
  double max_s = 300.0;

  void validate() const {
    if (!(min_s > 0.0 && min_s < max_s)) throw InputError("runtime window must satisfy 0 < min < max");
  }
};

struct TrialOutcome {
  double runtime_s = 0.0;
  bool canceled = false;  // stopped at the window's upper bound
};

struct CalibrationResult {
  double fraction = 0.0;
  double runtime_s = 0.0;
  std::size_t attempts = 0;
};

inline constexpr double kInitialSampleFraction = 0.01;
inline constexpr std::size_t kMaxCalibrationAttempts = 8;

// Halves the fraction after a too-long (or canceled) run and doubles it after
// a too-short one, until a run lands inside the window. Once the window has
// been bracketed the next fraction is the geometric midpoint of the bracket so
// the two rules cannot cycle. `trial` runs the job at a fraction.
template <typename Trial>
CalibrationResult calibrate_with(Trial&& trial, const RuntimeWindow& window, double start = kInitialSampleFraction,
                                 std::size_t max_attempts = kMaxCalibrationAttempts) {
  window.validate();
  double fraction = start;
  double too_short = 0.0;  // largest fraction known to run too short
  double too_long = 0.0;   // smallest fraction known to run too long
  double last_runtime = 0.0;
  for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
    const TrialOutcome outcome = trial(fraction);
    last_runtime = outcome.runtime_s;
    const bool long_run = outcome.canceled || outcome.runtime_s > window.max_s;
    if (!long_run && outcome.runtime_s >= window.min_s) return {fraction, outcome.runtime_s, attempt};
    if (long_run) {
      too_long = too_long == 0.0 ? fraction : std::min(too_long, fraction);
      fraction = too_short > 0.0 ? std::sqrt(too_short * too_long) : fraction / 2.0;
    } else {
      if (fraction >= 1.0) {
        throw CalibrationError("the full dataset runs in " + std::to_string(outcome.runtime_s) +
                                   " s, below the window minimum of " + std::to_string(window.min_s) + " s",
                               outcome.runtime_s);
      }
      too_short = std::max(too_short, fraction);
      fraction = too_long > 0.0 ? std::sqrt(too_short * too_long) : std::min(1.0, fraction * 2.0);
    }
  }
  throw CalibrationError("runtime window [" + std::to_string(window.min_s) + ", " + std::to_string(window.max_s) +
                             "] s not reached in " + std::to_string(max_attempts) + " attempts; last runtime " +
                             std::to_string(last_runtime) + " s",
                         last_runtime);
}

struct ProfileOptions {
  RuntimeWindow window;
  std::uint64_t seed = 0;
  double poll_interval_s = 0.2;
  SampleMode mode = SampleMode::Bernoulli;
  fs::path work_dir;  // sample files; empty: a fresh directory under the system temp dir
  bool keep_samples = false;
};

namespace detail {

inline fs::path make_work_dir(const fs::path& requested) {
  if (!requested.empty()) {
    fs::create_directories(requested);
    return requested;
  }
  std::string tmpl = (fs::temp_directory_path() / "ruya-profile-XXXXXX").string();
  if (!mkdtemp(tmpl.data())) throw ProfilingError("cannot create a temporary sample directory");
  return tmpl;
}

inline TrialOutcome run_trial(const CommandTemplate& cmd, const fs::path& dataset, double fraction,
                              const ProfileOptions& opt, const fs::path& dir, std::size_t attempt) {
  const auto sample = generate_sample(dataset, fraction, opt.seed, dir / ("calibration-" + std::to_string(attempt)), opt.mode);
  auto r = run_monitored(cmd, sample.path, {opt.poll_interval_s, opt.window.max_s});
  fs::remove(sample.path);
  if (r.timed_out) return {r.runtime_s, true};
  if (r.exit_status != 0) {
    throw ProfilingError("job exited with status " + std::to_string(r.exit_status) + " during calibration: " + r.output,
                         std::move(r.trace), r.exit_status, r.output);
  }
  return {r.runtime_s, false};
}

}  // namespace detail

inline double calibrate_sample_fraction(const CommandTemplate& cmd, const fs::path& dataset,
                                        const RuntimeWindow& window = {}, const ProfileOptions& options = {}) {
  auto opt = options;
  opt.window = window;
  const auto dir = detail::make_work_dir(opt.work_dir);
  std::size_t attempt = 0;
  auto result = calibrate_with(
      [&](double f) { return detail::run_trial(cmd, dataset, f, opt, dir, ++attempt); }, window);
  if (opt.work_dir.empty()) fs::remove_all(dir);
  return result.fraction;
}

// ---------------------------------------------------------------------------
// Full profile

struct ProfilingReport {
  std::vector<MemorySample> samples;
  std::vector<double> sample_fractions;
  double calibrated_fraction = 0.0;
  double wall_time_s = 0.0;
};

class PartialProfileError : public ProfilingError {
 public:
  PartialProfileError(const ProfilingError& cause, ProfilingReport partial)
      : ProfilingError(cause), partial_(std::move(partial)) {}
  [[nodiscard]] const ProfilingReport& partial_report() const noexcept { return partial_; }

 private:
  ProfilingReport partial_;
};

// Five equally spaced fractions ending at the calibrated one.
inline std::vector<double> profile_fractions(double calibrated) {
  std::vector<double> out;
  for (int k = 1; k <= 5; ++k) out.push_back(calibrated * k / 5.0);
  return out;
}

// Calibrates a base sample, then runs the job on five nested portions of it
// (k/5 of the base for k = 1..5) and records peak-minus-baseline memory.
inline ProfilingReport profile_job(const CommandTemplate& cmd, const fs::path& dataset, const ProfileOptions& options = {}) {
  cmd.validate();
  options.window.validate();
  const auto start = std::chrono::steady_clock::now();
  const auto dir = detail::make_work_dir(options.work_dir);
  const auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  ProfilingReport report;
  std::size_t attempt = 0;
  const auto calibration = calibrate_with(
      [&](double f) { return detail::run_trial(cmd, dataset, f, options, dir, ++attempt); }, options.window);
  report.calibrated_fraction = calibration.fraction;

  const auto base = generate_sample(dataset, calibration.fraction, options.seed, dir / "sample-base", options.mode);
  const auto fractions = profile_fractions(calibration.fraction);
  for (int k = 1; k <= 5; ++k) {
    const auto portion = k == 5 ? base
                                : generate_sample(base.path, k / 5.0, options.seed + static_cast<std::uint64_t>(k),
                                                  dir / ("sample-" + std::to_string(k)), options.mode);
    try {
      const auto trace = monitor_run(cmd, portion.path, options.poll_interval_s);
      report.samples.push_back({portion.bytes, trace.job_memory_bytes()});
      report.sample_fractions.push_back(fractions[static_cast<std::size_t>(k - 1)]);
    } catch (const ProfilingError& e) {
      report.wall_time_s = elapsed();
      throw PartialProfileError(e, report);
    }
  }
  if (!options.keep_samples) {
    if (options.work_dir.empty()) {
      fs::remove_all(dir);
    } else {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().filename().string().starts_with("sample-")) fs::remove(entry.path());
      }
    }
  }
  report.wall_time_s = elapsed();
  return report;
}

// Report document (JSON).
inline nlohmann::json profiling_report_to_json(const ProfilingReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    samples.push_back({{"fraction", r.sample_fractions.at(i)},
                       {"input_bytes", r.samples[i].input_bytes},
                       {"job_memory_bytes", r.samples[i].job_memory_bytes}});
  }
  return {{"samples", samples}, {"calibrated_fraction", r.calibrated_fraction}, {"wall_time_s", r.wall_time_s}};
}

inline ProfilingReport profiling_report_from_json(const nlohmann::json& j) {
  try {
    ProfilingReport r;
    for (const auto& s : j.at("samples")) {
      r.samples.push_back({s.at("input_bytes").get<std::uint64_t>(), s.at("job_memory_bytes").get<std::uint64_t>()});
      r.sample_fractions.push_back(s.value("fraction", 0.0));
    }
    r.calibrated_fraction = j.value("calibrated_fraction", 0.0);
    r.wall_time_s = j.value("wall_time_s", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed profiling report: ") + e.what());
  }
}

}  // namespace ruya
