#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "ruya/memory_model.hpp"
#include "ruya/random.hpp"

using namespace ruya;

namespace {

constexpr std::uint64_t kGb = 1ull << 30;
constexpr std::uint64_t kMb = 1ull << 20;

std::vector<MemorySample> line(double slope, double intercept_bytes, std::vector<std::uint64_t> xs) {
  std::vector<MemorySample> out;
  for (auto x : xs) out.push_back({x, static_cast<std::uint64_t>(std::llround(slope * static_cast<double>(x) + intercept_bytes))});
  return out;
}

// x = 1..5 (in MB) with residual pattern e orthogonal to both 1 and x, so the
// least-squares line is y = x exactly and R^2 = 10 / (10 + 10 c^2) = 1 / (1 + c^2).
std::vector<MemorySample> orthogonal_fixture(double c) {
  const int e[] = {1, -2, 0, 2, -1};
  std::vector<MemorySample> out;
  for (int i = 0; i < 5; ++i) {
    const double x = (i + 1) * 1e6;
    out.push_back({static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(std::llround(x + c * 1e6 * e[i] + 1e8))});
  }
  return out;
}

double relative(long double a, long double b) { return static_cast<double>(std::fabs(a - b) / std::max(std::fabs(b), 1.0L)); }

}  // namespace

TEST(FitMemoryModel, ExactLinear) {
  const auto s = line(2.0, 0.0, {1 * kGb, 2 * kGb, 3 * kGb, 4 * kGb, 5 * kGb});
  const auto m = fit_memory_model(s);
  EXPECT_EQ(m.category, MemoryCategory::Linear);
  EXPECT_NEAR(m.slope, 2.0, 1e-12);
  EXPECT_NEAR(m.intercept, 0.0, 1e-3);
  EXPECT_NEAR(m.r2, 1.0, 1e-12);
}

TEST(FitMemoryModel, ConstantTargetsAreFlatWithZeroR2) {
  std::vector<MemorySample> s;
  for (int i = 1; i <= 5; ++i) s.push_back({i * kGb, 3 * kGb});
  const auto m = fit_memory_model(s);
  EXPECT_EQ(m.category, MemoryCategory::Flat);
  EXPECT_EQ(m.r2, 0.0);
  EXPECT_DOUBLE_EQ(m.mean_bytes, 3.0 * kGb);
}

TEST(FitMemoryModel, NoisyPointsMatchNormalEquations) {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<MemorySample> s;
    for (int i = 0; i < 5; ++i) {
      const auto x = static_cast<std::uint64_t>(1e8 + 5e9 * uniform_unit(rng));
      const double y = 1.7 * static_cast<double>(x) + 3e8 + 4e8 * standard_normal(rng);
      s.push_back({x, static_cast<std::uint64_t>(std::max(0.0, y))});
    }
    const auto m = fit_memory_model(s);
    const auto o = oracle::normal_equations(s);
    EXPECT_LT(relative(m.slope, o.slope), 1e-9);
    // The intercept is a difference of large terms; compare relative to the target scale.
    EXPECT_LT(std::fabs(m.intercept - static_cast<double>(o.intercept)) / 1e9, 1e-9);
    EXPECT_LT(relative(m.r2, o.r2), 1e-9);
  }
}

TEST(FitMemoryModel, RecoversNoiselessLines) {
  // Slopes on a 1/1024 grid and inputs in whole MiB keep every target an exact integer.
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = static_cast<double>(512 + uniform_index(rng, 4096)) / 1024.0;
    const double b = static_cast<double>(1'000'000 + uniform_index(rng, 1'000'000'000));
    std::vector<MemorySample> s;
    for (int i = 1; i <= 5; ++i) {
      const std::uint64_t x = i * 200 * kMb;
      s.push_back({x, static_cast<std::uint64_t>(a * static_cast<double>(x) + b)});
    }
    const auto m = fit_memory_model(s);
    EXPECT_EQ(m.category, MemoryCategory::Linear);
    EXPECT_LT(relative(m.slope, a), 1e-9);
    EXPECT_LT(relative(m.intercept, b), 1e-9);
  }
}

TEST(FitMemoryModel, OrthogonalFixtureHasClosedFormR2) {
  for (double c : {0.1, 0.5, 1.0, 2.0, 3.0}) {
    const auto m = fit_memory_model(orthogonal_fixture(c));
    EXPECT_NEAR(m.r2, 1.0 / (1.0 + c * c), 1e-12) << c;
    EXPECT_NEAR(m.slope, 1.0, 1e-12);
  }
}

TEST(FitMemoryModel, ClassificationAroundThresholds) {
  // r2 = 1/(1+c^2): 0.99 sits at c ~ 0.10050, 0.1 at c = 3.
  EXPECT_EQ(fit_memory_model(orthogonal_fixture(0.1000)).category, MemoryCategory::Linear);
  EXPECT_EQ(fit_memory_model(orthogonal_fixture(0.1010)).category, MemoryCategory::Unclear);
  EXPECT_EQ(fit_memory_model(orthogonal_fixture(2.99)).category, MemoryCategory::Unclear);
  EXPECT_EQ(fit_memory_model(orthogonal_fixture(3.01)).category, MemoryCategory::Flat);
}

TEST(FitMemoryModel, ThresholdsAreInclusiveOnTheLinearSide) {
  const auto s = orthogonal_fixture(1.0);  // r2 = 0.5
  ASSERT_DOUBLE_EQ(fit_memory_model(s).r2, 0.5);
  EXPECT_EQ(fit_memory_model(s, {0.1, 0.5}).category, MemoryCategory::Linear);
  EXPECT_EQ(fit_memory_model(s, {0.5, 0.9}).category, MemoryCategory::Unclear);
  EXPECT_EQ(categorize(0.0999999, {}), MemoryCategory::Flat);
  EXPECT_EQ(categorize(0.1, {}), MemoryCategory::Unclear);
  EXPECT_EQ(categorize(0.99, {}), MemoryCategory::Linear);
}

// Sixteen five-point traces shaped like the evaluated job mix: six jobs whose
// peak grows with input, six with a fixed footprint plus GC jitter, and four
// whose footprint saturates or jumps so no straight line explains it well.
TEST(FitMemoryModel, SixteenJobTaxonomy) {
  struct Job {
    std::string name;
    MemoryCategory expected;
    std::vector<double> mb;  // peak at input sizes 100..500 MB
  };
  const std::vector<Job> jobs{
      {"naive-bayes-bigdata", MemoryCategory::Linear, {310, 607, 905, 1201, 1498}},
      {"naive-bayes-huge", MemoryCategory::Linear, {160, 318, 481, 640, 797}},
      {"kmeans-bigdata", MemoryCategory::Linear, {205, 398, 602, 801, 1003}},
      {"kmeans-huge", MemoryCategory::Linear, {104, 199, 300, 402, 499}},
      {"pagerank-spark-bigdata", MemoryCategory::Linear, {62, 96, 131, 164, 199}},
      {"pagerank-spark-huge", MemoryCategory::Linear, {41, 58, 74, 92, 108}},
      {"join-bigdata", MemoryCategory::Flat, {402, 398, 405, 396, 401}},
      {"join-huge", MemoryCategory::Flat, {388, 391, 385, 392, 387}},
      {"pagerank-hadoop-bigdata", MemoryCategory::Flat, {250, 250, 250, 250, 250}},
      {"pagerank-hadoop-huge", MemoryCategory::Flat, {251, 248, 252, 247, 250}},
      {"terasort-bigdata", MemoryCategory::Flat, {300, 310, 296, 308, 301}},
      {"terasort-huge", MemoryCategory::Flat, {512, 509, 515, 506, 513}},
      {"logistic-regression-bigdata", MemoryCategory::Unclear, {120, 480, 510, 505, 515}},
      {"logistic-regression-huge", MemoryCategory::Unclear, {200, 420, 300, 520, 410}},
      {"linear-regression-bigdata", MemoryCategory::Unclear, {100, 105, 110, 400, 420}},
      {"linear-regression-huge", MemoryCategory::Unclear, {300, 700, 820, 860, 870}},
  };
  int counts[3] = {0, 0, 0};
  for (const auto& job : jobs) {
    std::vector<MemorySample> s;
    for (std::size_t i = 0; i < job.mb.size(); ++i) {
      s.push_back({(i + 1) * 100 * kMb, static_cast<std::uint64_t>(job.mb[i] * kMb)});
    }
    const auto m = fit_memory_model(s);
    EXPECT_EQ(m.category, job.expected) << job.name << " r2=" << m.r2;
    ++counts[static_cast<int>(m.category)];
  }
  EXPECT_EQ(counts[static_cast<int>(MemoryCategory::Linear)], 6);
  EXPECT_EQ(counts[static_cast<int>(MemoryCategory::Flat)], 6);
  EXPECT_EQ(counts[static_cast<int>(MemoryCategory::Unclear)], 4);
}

TEST(FitMemoryModel, ScaleInvariantClassification) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<MemorySample> s;
    const double noise = std::pow(10.0, -3.0 + 4.0 * uniform_unit(rng));
    for (int i = 1; i <= 5; ++i) {
      s.push_back({static_cast<std::uint64_t>(i) * 1000 * kMb,
                   static_cast<std::uint64_t>(std::max(1.0, 1e9 * (i + noise * standard_normal(rng)) + 5e9))});
    }
    const auto base = fit_memory_model(s);
    for (std::uint64_t k : {3ull, 7ull, 1000ull}) {
      auto scaled = s;
      for (auto& p : scaled) p.input_bytes *= k;
      const auto m = fit_memory_model(scaled);
      EXPECT_NEAR(m.r2, base.r2, 1e-9);
      // Exactly at a threshold the category may legitimately flip on rounding.
      if (std::fabs(base.r2 - 0.99) > 1e-9 && std::fabs(base.r2 - 0.1) > 1e-9) EXPECT_EQ(m.category, base.category);
    }
  }
}

TEST(FitMemoryModel, NoiseLowersR2OnAverage) {
  double previous = 2.0;
  for (double noise : {0.01, 0.1, 0.5, 2.0, 10.0}) {
    Rng rng(77);
    double sum = 0;
    for (int trial = 0; trial < 400; ++trial) {
      std::vector<MemorySample> s;
      for (int i = 1; i <= 5; ++i) {
        s.push_back({static_cast<std::uint64_t>(i) * kGb,
                     static_cast<std::uint64_t>(std::max(0.0, 1e9 * (i + noise * standard_normal(rng)) + 5e10))});
      }
      sum += fit_memory_model(s).r2;
    }
    const double mean = sum / 400;
    EXPECT_LT(mean, previous) << noise;
    previous = mean;
  }
}

// With pure-noise targets R^2 ~ Beta(1/2, (n-2)/2), so the Flat rate depends on
// the number of points: with 60 points P(R^2 < 0.1) is about 0.986.
TEST(FitMemoryModel, PureNoiseIsMostlyFlat) {
  Rng rng(2024);
  int flat = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<MemorySample> s;
    for (int i = 1; i <= 60; ++i) {
      s.push_back({static_cast<std::uint64_t>(i) * 50 * kMb,
                   static_cast<std::uint64_t>(4e9 + 1e8 * standard_normal(rng))});
    }
    if (fit_memory_model(s).category == MemoryCategory::Flat) ++flat;
  }
  EXPECT_GE(flat, 950);
}

// At the profiler's five points the same rate follows the Beta(1/2, 3/2) CDF,
// F(x) = (2/pi)(asin(sqrt x) + sqrt(x(1-x))), about 0.396 at x = 0.1.
TEST(FitMemoryModel, PureNoiseFlatRateAtFivePointsMatchesBetaLaw) {
  const double x = 0.1;
  const double p = 2.0 / std::numbers::pi * (std::asin(std::sqrt(x)) + std::sqrt(x * (1 - x)));
  Rng rng(31);
  const int trials = 4000;
  int flat = 0;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<MemorySample> s;
    for (int i = 1; i <= 5; ++i) {
      s.push_back({static_cast<std::uint64_t>(i) * 100 * kMb, static_cast<std::uint64_t>(4e9 + 1e8 * standard_normal(rng))});
    }
    if (fit_memory_model(s).category == MemoryCategory::Flat) ++flat;
  }
  const double sigma = std::sqrt(p * (1 - p) / trials);
  EXPECT_NEAR(static_cast<double>(flat) / trials, p, 4 * sigma);
}

TEST(FitMemoryModel, InsufficientData) {
  EXPECT_THROW(fit_memory_model(line(1.0, 0, {kGb, 2 * kGb})), InsufficientDataError);
  EXPECT_THROW(fit_memory_model(line(1.0, 0, {kGb, kGb, kGb})), InsufficientDataError);
  std::vector<MemorySample> ok{{kGb, kGb}, {kGb, 2 * kGb}, {2 * kGb, 3 * kGb}};
  EXPECT_NO_THROW(fit_memory_model(ok));
}

TEST(FitMemoryModel, InvalidThresholds) {
  const auto s = orthogonal_fixture(1.0);
  EXPECT_THROW(fit_memory_model(s, {0.5, 0.5}), ConfigError);
  EXPECT_THROW(fit_memory_model(s, {0.0, 0.9}), ConfigError);
  EXPECT_THROW(fit_memory_model(s, {0.1, 1.0}), ConfigError);
}

TEST(ExtrapolateRequirement, DoublingSlope) {
  MemoryModel m;
  m.category = MemoryCategory::Linear;
  m.slope = 2.0;
  const auto full = static_cast<std::uint64_t>(251.5 * kGb);
  const auto r = extrapolate_requirement(m, full);
  EXPECT_NEAR(r.job_gb, 503.0, 1e-9);
  EXPECT_FALSE(r.clamped);
}

TEST(ExtrapolateRequirement, InterceptDominated) {
  MemoryModel m;
  m.category = MemoryCategory::Linear;
  m.slope = 1.0;
  m.intercept = 5.0 * kGb;
  EXPECT_NEAR(extrapolate_requirement(m, 1).job_gb, 5.0, 1e-9);
}

TEST(ExtrapolateRequirement, RandomTriplesMatchArithmetic) {
  Rng rng(8);
  MemoryModel m;
  m.category = MemoryCategory::Linear;
  for (int trial = 0; trial < 1000; ++trial) {
    m.slope = 0.01 + 10.0 * uniform_unit(rng);
    m.intercept = 1e10 * uniform_unit(rng);
    const auto full = 1 + uniform_index(rng, 1ull << 42);
    const long double expected = (static_cast<long double>(m.slope) * full + m.intercept) / (1024.0L * 1024.0L * 1024.0L);
    EXPECT_LT(relative(extrapolate_requirement(m, full).job_gb, expected), 1e-12);
  }
}

TEST(ExtrapolateRequirement, MonotoneInDatasetSize) {
  MemoryModel m;
  m.category = MemoryCategory::Linear;
  m.slope = 0.3;
  m.intercept = -2.0 * kGb;
  double previous = 0;
  for (std::uint64_t gb = 1; gb < 2000; gb += 37) {
    const double v = extrapolate_requirement(m, gb * kGb, nullptr).job_gb;
    EXPECT_GE(v, previous);
    previous = v;
  }
}

TEST(ExtrapolateRequirement, NegativeIsClampedWithWarning) {
  MemoryModel m;
  m.category = MemoryCategory::Linear;
  m.slope = 0.1;
  m.intercept = -10.0 * kGb;
  std::ostringstream warn;
  const auto r = extrapolate_requirement(m, kGb, &warn);
  EXPECT_TRUE(r.clamped);
  EXPECT_DOUBLE_EQ(r.job_gb, kRequirementFloorGb);
  EXPECT_NE(warn.str().find("clamped"), std::string::npos);
}

TEST(ExtrapolateRequirement, NonLinearModelsAreRejected) {
  MemoryModel m;
  m.category = MemoryCategory::Flat;
  EXPECT_THROW(extrapolate_requirement(m, kGb), CategoryError);
  m.category = MemoryCategory::Unclear;
  EXPECT_THROW(extrapolate_requirement(m, kGb), CategoryError);
  m.category = MemoryCategory::Linear;
  EXPECT_THROW(extrapolate_requirement(m, 0), InputError);
}

TEST(SampleTable, ParsesWhitespaceCommasCommentsAndHeader) {
  std::istringstream in("# profile of job x\ninput_bytes,job_memory_bytes\n100, 200\n300\t400\n\n500 600\n");
  const auto s = parse_sample_table(in);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[1].input_bytes, 300u);
  EXPECT_EQ(s[2].job_memory_bytes, 600u);
}

TEST(SampleTable, MalformedLineReportsLineNumber) {
  std::istringstream in("100 200\n300 x\n");
  try {
    parse_sample_table(in);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream extra("100 200 300\n");
  EXPECT_THROW(parse_sample_table(extra), ParseError);
}

TEST(MemoryModelJson, RoundTrip) {
  const auto m = fit_memory_model(orthogonal_fixture(0.5));
  const auto back = memory_model_from_json(memory_model_to_json(m));
  EXPECT_EQ(back.category, m.category);
  EXPECT_DOUBLE_EQ(back.slope, m.slope);
  EXPECT_DOUBLE_EQ(back.intercept, m.intercept);
  EXPECT_DOUBLE_EQ(back.r2, m.r2);
  EXPECT_THROW(memory_model_from_json(nlohmann::json::parse(R"({"category":"weird"})")), Error);
}
