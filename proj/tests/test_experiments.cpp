#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "otl/cli.hpp"
#include "otl/config.hpp"
#include "otl/experiment.hpp"

using namespace otl;

namespace {

std::string config_error_key(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

const char* kSmallBernoulli =
    "name = small\n"
    "family = bernoulli\n"
    "theta_t = 0.6\n"
    "theta_s = 0.65\n"
    "m = 300\n"
    "n = 120\n"
    "prior.c = 0.1\n"
    "reps = 24\n"
    "seed = 5\n"
    "grid = 201\n";

std::filesystem::path temp_dir() {
  auto p = std::filesystem::temp_directory_path() / "otl_test_experiments";
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "otl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST(Config, LogisticPositiveBuiltin) {
  const auto sc = load_scenario("logistic_positive");
  EXPECT_EQ(sc.theta_t, (ParamPoint{0.3, 0.5}));
  EXPECT_EQ(sc.theta_s, (ParamPoint{0.2, 0.4}));
  EXPECT_EQ(sc.m, 5000u);
  EXPECT_EQ(sc.n, 200u);
  EXPECT_EQ(sc.reps, 200u);
  EXPECT_EQ(sc.prior.conditional.kind, ConditionalKind::GaussianAround);
  EXPECT_EQ(sc.prior.conditional.c, 0.1);
  EXPECT_EQ(sc.family.kind(), FamilyKind::LogisticRegression);
  EXPECT_EQ(sc.family.covariate_mean(), Eigen::Vector2d(5, -5));
}

TEST(Config, LogisticNegativeBuiltin) {
  const auto sc = load_scenario("logistic_negative");
  EXPECT_EQ(sc.theta_s, (ParamPoint{0.8, 0.2}));
  EXPECT_EQ(sc.theta_t, (ParamPoint{0.3, 0.5}));
}

TEST(Config, BernoulliNegativeBuiltin) {
  const auto sc = load_scenario("bernoulli_negative");
  EXPECT_EQ(sc.theta_t[0], 0.6);
  EXPECT_EQ(sc.theta_s[0], 0.8);
  EXPECT_EQ(sc.prior.conditional.kind, ConditionalKind::HardWindow);
  EXPECT_EQ(sc.prior.conditional.delta, 0.1);
}

TEST(Config, EveryBuiltinLoads) {
  for (const auto& name : builtin_scenario_names()) EXPECT_NO_THROW(load_scenario(name)) << name;
  const auto tv = load_scenario("time_variant_demo");
  ASSERT_TRUE(tv.schedule.has_value());
  EXPECT_EQ(tv.schedule->segments.size(), 2u);
  EXPECT_EQ(tv.n, 600u);
}

TEST(Config, ErrorsCarryKeyPath) {
  EXPECT_EQ(config_error_key(std::string(kSmallBernoulli) + "colour = red\n"), "colour");
  EXPECT_EQ(config_error_key("family = bernoulli\ntheta_s = 0.5\nn = 10\n"), "theta_t");
  EXPECT_EQ(config_error_key("family = bernoulli\ntheta_t = 1.5\ntheta_s = 0.5\nn = 10\n"), "theta_t");
  EXPECT_EQ(config_error_key("family = bernoulli\ntheta_t = 0.5\ntheta_s = 0.5\nn = ten\n"), "n");
  EXPECT_EQ(config_error_key("family = poisson\ntheta_t = 0.5\ntheta_s = 0.5\nn = 10\n"), "family");
  EXPECT_EQ(config_error_key(std::string(kSmallBernoulli) + "prior.kind = cauchy\n"), "prior.kind");
  EXPECT_EQ(config_error_key("family = gaussian\ntheta_t = 0.5,0.5\ntheta_s = 0.4,0.5\nshared = 1\nn = 10\n"), "shared");
  EXPECT_THROW(load_scenario("/nonexistent/scenario.cfg"), ConfigError);
}

TEST(Config, FileRoundTrip) {
  const auto path = temp_dir() / "small.cfg";
  std::ofstream(path) << "# comment line\n" << kSmallBernoulli;
  const auto sc = load_scenario(path.string());
  EXPECT_EQ(sc.name, "small");
  EXPECT_EQ(sc.grid_resolution, 201u);
  EXPECT_EQ(sc.m, 300u);
}

TEST(Experiment, CsvRoundTrip) {
  RegretCurve c;
  c.resize(3);
  for (std::size_t k = 0; k < 3; ++k) {
    c.n[k] = k + 1;
    c.mean_regret[k] = std::sqrt(2.0) * static_cast<double>(k + 1);
    c.std_error[k] = 1.0 / 3.0;
    c.mean_regret_baseline[k] = -std::exp(1.0) * 1e-7;
    c.std_error_baseline[k] = 0.0;
    c.asymptote[k] = k == 0 ? std::nullopt : std::optional<double>(std::log(static_cast<double>(k)));
    c.asymptote_baseline[k] = 2.5;
    c.bound[k] = std::nullopt;
  }
  const std::string text = format_curve_csv(c);
  EXPECT_EQ(text.substr(0, text.find('\n')), kCurveHeader);
  const RegretCurve back = parse_curve_csv(text);
  EXPECT_EQ(format_curve_csv(back), text);
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(back.n[k], c.n[k]);
    EXPECT_NEAR(back.mean_regret[k], c.mean_regret[k], 5e-9 * std::abs(c.mean_regret[k]));
    EXPECT_EQ(back.asymptote[k].has_value(), c.asymptote[k].has_value());
    EXPECT_FALSE(back.bound[k].has_value());
  }
  EXPECT_NE(text.find(",NA"), std::string::npos);
  EXPECT_THROW(parse_curve_csv("n,wrong\n"), PreconditionError);
  EXPECT_THROW(parse_curve_csv(""), PreconditionError);
}

TEST(Experiment, AtomicWriteLeavesNoTemporary) {
  const auto path = temp_dir() / "curve.csv";
  RegretCurve c;
  c.resize(1);
  c.n[0] = 1;
  write_curve_csv(c, path);
  EXPECT_TRUE(std::filesystem::exists(path));
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  EXPECT_EQ(read_curve_csv(path), parse_curve_csv(format_curve_csv(c)));
}

TEST(Experiment, OutputIndependentOfThreadCount) {
  const auto sc = parse_scenario(kSmallBernoulli);
  ExperimentOptions one;
  one.threads = 1;
  ExperimentOptions four;
  four.threads = 4;
  const auto a = run_experiment(sc, one);
  const auto b = run_experiment(sc, four);
  const auto c = run_experiment(sc, one);
  EXPECT_EQ(format_curve_csv(a.curve), format_curve_csv(b.curve));
  EXPECT_EQ(format_curve_csv(a.curve), format_curve_csv(c.curve));
  EXPECT_EQ(a.target_checksums, b.target_checksums);
  EXPECT_EQ(a.completed, sc.reps);
}

TEST(Experiment, ArmsShareTargetData) {
  // Recompute both arms from each trial's stream: the driver's means and
  // checksums must match a single shared draw per trial.
  const auto sc = parse_scenario(kSmallBernoulli);
  const auto res = run_experiment(sc, {});
  const GridSpec grid = sc.grid();
  const GridPosterior base = source_free_prior(sc.baseline_prior, grid);
  std::vector<std::vector<double>> with_rows;
  std::vector<std::vector<double>> base_rows;
  for (std::size_t r = 0; r < sc.reps; ++r) {
    RandomStream rng = trial_stream(sc.seed, r);
    const TrialData data = draw_trial_data(sc, rng);
    EXPECT_EQ(res.target_checksums[r], data.target_checksum());
    const GridPosterior pi = induced_target_prior(sc.prior, sc.family, data.source, grid);
    with_rows.push_back(log_loss_trace(pi, sc.family, sc.theta_t.view(), data.target).per_step);
    base_rows.push_back(log_loss_trace(base, sc.family, sc.theta_t.view(), data.target).per_step);
  }
  EXPECT_EQ(mean_curve(with_rows).mean, res.curve.mean_regret);
  EXPECT_EQ(mean_curve(base_rows).mean, res.curve.mean_regret_baseline);
}

TEST(Experiment, AsymptoteColumns) {
  const auto sc = parse_scenario(kSmallBernoulli);
  const auto cols = asymptote_columns(sc, 120);
  // Default Bernoulli box [1e-4, 1 - 1e-4], so the uniform density is 1 / 0.9998.
  const double log_w_hat = -std::log(1.0 - 2e-4);
  ASSERT_TRUE(cols.baseline[99].has_value());
  EXPECT_NEAR(*cols.baseline[99],
              0.5 * std::log(100.0 / (2.0 * M_PI * M_E)) + 0.5 * std::log(25.0 / 6.0) - log_w_hat, 1e-9);
  ASSERT_TRUE(cols.with_source[99].has_value());
  const double log_w = std::log(1.0 / (0.1 * std::sqrt(2.0 * M_PI))) - 0.5 * 0.25;
  EXPECT_NEAR(*cols.with_source[99], *cols.baseline[99] + log_w_hat - log_w, 1e-9);
  // A window that excludes the truth has no asymptote.
  const auto neg = asymptote_columns(load_scenario("bernoulli_negative"), 10);
  EXPECT_FALSE(neg.with_source[0].has_value());
  EXPECT_TRUE(neg.baseline[0].has_value());
}

TEST(Experiment, ZeroOneRunFillsBound) {
  auto sc = load_scenario("logistic_positive");
  sc.loss = LossKind::ZeroOne;
  sc.m = 300;
  sc.n = 40;
  sc.reps = 4;
  sc.grid_resolution = 21;
  const auto res = run_experiment(sc, {});
  for (std::size_t k = 0; k < sc.n; ++k) {
    ASSERT_TRUE(res.curve.bound[k].has_value());
    EXPECT_GE(*res.curve.bound[k], 0.0);
  }
}

TEST(Experiment, SnapshotConcentratesWithTightPrior) {
  auto tight = load_scenario("logistic_positive");
  tight.m = 2000;
  tight.grid_resolution = 41;
  auto loose = tight;
  loose.prior = PriorSpec::uniform_gaussian_around(loose.family.box(), 1.0);

  const auto st = posterior_snapshot(tight, 10);
  EXPECT_LT(st.target_with_source.covariance().trace(), st.target_no_source.covariance().trace());
  EXPECT_LT((st.source_posterior.mean() - Eigen::Vector2d(0.2, 0.4)).cwiseAbs().maxCoeff(), 0.05);

  const auto sl = posterior_snapshot(loose, 50);
  const double a = sl.target_with_source.covariance().trace();
  const double b = sl.target_no_source.covariance().trace();
  EXPECT_LT(std::abs(a - b), 0.2 * b);

  const std::string csv = format_snapshot_csv(st);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "theta_1,theta_2,density,tag");
  EXPECT_NE(csv.find("target_posterior_no_source"), std::string::npos);
  EXPECT_THROW(posterior_snapshot(tight, 201), PreconditionError);
}

TEST(Cli, ExitCodes) {
  std::string out;
  std::string err;
  EXPECT_EQ(run_cli({"run", "--scenario", "logistic_positive", "--bogus"}, &out, &err), 1);
  EXPECT_NE(err.find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli({"run", "--scenario", "no_such_scenario"}, &out, &err), 1);
  EXPECT_EQ(run_cli({}, &out, &err), 1);
}

TEST(Cli, ValidatePriorWarnsButSucceeds) {
  std::string out;
  std::string err;
  EXPECT_EQ(run_cli({"validate-prior", "--scenario", "bernoulli_negative"}, &out, &err), 0);
  EXPECT_NE(out.find("conditional: improper"), std::string::npos);
  EXPECT_NE(err.find("warning"), std::string::npos);
  EXPECT_EQ(run_cli({"validate-prior", "--scenario", "logistic_positive"}, &out, &err), 0);
  EXPECT_NE(out.find("conditional: proper"), std::string::npos);
}

TEST(Cli, AsymptoteCsv) {
  std::string out;
  EXPECT_EQ(run_cli({"asymptote", "--scenario", "logistic_positive", "--n-max", "200"}, &out), 0);
  std::istringstream in(out);
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line, "n,asymptote,asymptote_baseline");
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 200u);
}

TEST(Cli, RunIsByteIdenticalAcrossInvocations) {
  const auto cfg = temp_dir() / "cli_small.cfg";
  std::ofstream(cfg) << kSmallBernoulli;
  const auto a = temp_dir() / "a.csv";
  const auto b = temp_dir() / "b.csv";
  ASSERT_EQ(run_cli({"run", "--scenario", cfg.string(), "--seed", "7", "--threads", "1", "--out", a.string()}), 0);
  ASSERT_EQ(run_cli({"run", "--scenario", cfg.string(), "--seed", "7", "--threads", "3", "--out", b.string()}), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_FALSE(slurp(a).empty());
}

TEST(Cli, SnapshotWritesFile) {
  const auto path = temp_dir() / "snap.csv";
  ASSERT_EQ(run_cli({"snapshot", "--scenario", "time_variant_demo", "--n", "5", "--out", path.string()}), 0);
  const std::string text = slurp(path);
  EXPECT_EQ(text.substr(0, text.find('\n')), "theta_1,density,tag");
}
