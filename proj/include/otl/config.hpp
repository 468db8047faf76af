#pragma once

// Flat `key = value` scenario files and the builtin scenario catalog.
//
// Lines are `key = value`; `#` starts a comment. Lists are comma separated.
// Keys:
//   name             label used in messages and outputs
//   family           bernoulli | gaussian | logistic                  (required)
//   theta_t          target parameter                                  (required unless segments is set)
//   theta_s          source parameter                                  (required)
//   n                target sample count                               (required unless segments is set)
//   m                source sample count                               default 0
//   box.lo, box.hi   parameter box, one value per axis or one for all  default by family
//   covariate.mean   logistic covariate mean                           default 0
//   covariate.cov    logistic covariate covariance                     default identity
//   noise.cov        gaussian observation covariance                   default identity
//   fisher.samples   Monte-Carlo draws for logistic Fisher information
//   shared           number of leading coordinates shared with the source, default 0
//   prior.kind       gaussian_around | hard_window | uniform           default gaussian_around
//   prior.c, prior.delta
//   prior.marginal   uniform | gaussian; prior.marginal.mean, prior.marginal.sd for gaussian
//   baseline.kind    uniform (the target-only prior)
//   reps, seed, grid
//   loss             log | zero_one
//   segments         theta:n[:c];theta:n[:c];...   theta comma separated, c = common with previous
//   transition.kind  gaussian_around | hard_window; transition.c, transition.delta
//
// Matrices are given row-major with d*d entries, d entries (diagonal) or one
// entry (a multiple of the identity).

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "otl/error.hpp"
#include "otl/family.hpp"
#include "otl/prior.hpp"
#include "otl/scenario.hpp"

namespace otl {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

inline double parse_double(std::string_view text, const std::string& key) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(key, "expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

inline std::uint64_t parse_uint(std::string_view text, const std::string& key) {
  std::uint64_t v = 0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(key, "expected a nonnegative integer, got '" + std::string(text) + "'");
  }
  return v;
}

inline std::vector<double> parse_list(std::string_view text, const std::string& key) {
  std::vector<double> out;
  for (auto part : split(text, ',')) out.push_back(parse_double(part, key));
  return out;
}

inline std::vector<double> broadcast(std::vector<double> v, std::size_t d, const std::string& key) {
  if (v.size() == d) return v;
  if (v.size() == 1) return std::vector<double>(d, v[0]);
  throw ConfigError(key, "expected 1 or " + std::to_string(d) + " values, got " + std::to_string(v.size()));
}

inline Eigen::MatrixXd parse_matrix(std::string_view text, std::size_t d, const std::string& key) {
  const auto v = parse_list(text, key);
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  if (v.size() == d * d) {
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) m(r, c) = v[static_cast<std::size_t>(r * n + c)];
  } else if (v.size() == d) {
    for (Eigen::Index r = 0; r < n; ++r) m(r, r) = v[static_cast<std::size_t>(r)];
  } else if (v.size() == 1) {
    m = v[0] * Eigen::MatrixXd::Identity(n, n);
  } else {
    throw ConfigError(key, "expected 1, " + std::to_string(d) + " or " + std::to_string(d * d) + " values");
  }
  return m;
}

inline const std::map<std::string, std::string, std::less<>>& builtin_catalog() {
  static const std::map<std::string, std::string, std::less<>> catalog = {
      {"bernoulli_negative",
       "name = bernoulli_negative\n"
       "family = bernoulli\n"
       "theta_t = 0.6\n"
       "theta_s = 0.8\n"
       "m = 200000\n"
       "n = 2000\n"
       "prior.kind = hard_window\n"
       "prior.delta = 0.1\n"
       "reps = 200\n"
       "seed = 1\n"
       "grid = 2001\n"},
      {"logistic_positive",
       "name = logistic_positive\n"
       "family = logistic\n"
       "covariate.mean = 5, -5\n"
       "covariate.cov = 1\n"
       "theta_t = 0.3, 0.5\n"
       "theta_s = 0.2, 0.4\n"
       "m = 5000\n"
       "n = 200\n"
       "prior.kind = gaussian_around\n"
       "prior.c = 0.1\n"
       "reps = 200\n"
       "seed = 1\n"
       "grid = 61\n"},
      {"logistic_negative",
       "name = logistic_negative\n"
       "family = logistic\n"
       "covariate.mean = 5, -5\n"
       "covariate.cov = 1\n"
       "theta_t = 0.3, 0.5\n"
       "theta_s = 0.8, 0.2\n"
       "m = 5000\n"
       "n = 200\n"
       "prior.kind = gaussian_around\n"
       "prior.c = 0.1\n"
       "reps = 200\n"
       "seed = 1\n"
       "grid = 61\n"},
      {"logistic_negative_zero_one",
       "name = logistic_negative_zero_one\n"
       "family = logistic\n"
       "covariate.mean = 5, -5\n"
       "covariate.cov = 1\n"
       "theta_t = 0.3, 0.5\n"
       "theta_s = 0.8, 0.2\n"
       "m = 5000\n"
       "n = 200\n"
       "prior.kind = gaussian_around\n"
       "prior.c = 0.1\n"
       "loss = zero_one\n"
       "reps = 100\n"
       "seed = 1\n"
       "grid = 61\n"},
      {"logistic_positive_zero_one",
       "name = logistic_positive_zero_one\n"
       "family = logistic\n"
       "covariate.mean = 5, -5\n"
       "covariate.cov = 1\n"
       "theta_t = 0.3, 0.5\n"
       "theta_s = 0.2, 0.4\n"
       "m = 5000\n"
       "n = 200\n"
       "prior.kind = gaussian_around\n"
       "prior.c = 0.1\n"
       "loss = zero_one\n"
       "reps = 100\n"
       "seed = 1\n"
       "grid = 61\n"},
      {"logistic_prior_sweep",
       "name = logistic_prior_sweep\n"
       "family = logistic\n"
       "covariate.mean = 5, -5\n"
       "covariate.cov = 1\n"
       "theta_t = 0.3, 0.5\n"
       "theta_s = 0.2, 0.4\n"
       "m = 5000\n"
       "n = 200\n"
       "prior.kind = gaussian_around\n"
       "prior.c = 1\n"
       "reps = 200\n"
       "seed = 1\n"
       "grid = 61\n"},
      {"time_variant_demo",
       "name = time_variant_demo\n"
       "family = bernoulli\n"
       "theta_s = 0.6\n"
       "m = 1000\n"
       "segments = 0.6:300; 0.6:300\n"
       "prior.kind = gaussian_around\n"
       "prior.c = 0.1\n"
       "transition.kind = gaussian_around\n"
       "transition.c = 0.05\n"
       "reps = 100\n"
       "seed = 1\n"
       "grid = 401\n"},
  };
  return catalog;
}

}  // namespace detail

inline std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : detail::builtin_catalog()) out.push_back(k);
  return out;
}

inline std::string builtin_scenario_text(std::string_view name) {
  const auto& cat = detail::builtin_catalog();
  const auto it = cat.find(name);
  if (it == cat.end()) throw ConfigError("scenario", "no builtin named '" + std::string(name) + "'");
  return it->second;
}

inline ScenarioConfig parse_scenario(std::string_view text) {
  static const std::vector<std::string_view> known = {
      "name",          "family",          "theta_t",        "theta_s",     "n",
      "m",             "box.lo",          "box.hi",         "covariate.mean", "covariate.cov",
      "noise.cov",     "fisher.samples",  "shared",         "prior.kind",  "prior.c",
      "prior.delta",   "prior.marginal",  "prior.marginal.mean", "prior.marginal.sd", "baseline.kind",
      "reps",          "seed",            "grid",           "loss",        "segments",
      "transition.kind", "transition.c",  "transition.delta"};

  std::map<std::string, std::string, std::less<>> kv;
  std::size_t line_no = 0;
  for (auto raw : detail::split(text, '\n')) {
    ++line_no;
    const auto hash = raw.find('#');
    const auto line = detail::trim(raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
    }
    std::string key(detail::trim(line.substr(0, eq)));
    const auto value = detail::trim(line.substr(eq + 1));
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError(key, "unknown key");
    if (kv.contains(key)) throw ConfigError(key, "duplicate key");
    kv.emplace(std::move(key), std::string(value));
  }

  auto get = [&](std::string_view key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto require = [&](std::string_view key) -> const std::string& {
    const auto* v = get(key);
    if (!v) throw ConfigError(std::string(key), "missing required field");
    return *v;
  };
  auto number = [&](std::string_view key, double fallback) {
    const auto* v = get(key);
    return v ? detail::parse_double(*v, std::string(key)) : fallback;
  };
  auto count = [&](std::string_view key, std::uint64_t fallback) {
    const auto* v = get(key);
    return v ? detail::parse_uint(*v, std::string(key)) : fallback;
  };

  ScenarioConfig sc;
  if (const auto* v = get("name")) sc.name = *v;

  const std::string& family_name = require("family");
  if (family_name != "bernoulli" && family_name != "gaussian" && family_name != "logistic") {
    throw ConfigError("family", "expected bernoulli, gaussian or logistic, got '" + family_name + "'");
  }

  // Segments, when present, determine theta_t and n.
  std::optional<std::vector<std::tuple<std::vector<double>, std::size_t, std::size_t>>> segs;
  if (const auto* v = get("segments")) {
    segs.emplace();
    for (auto part : detail::split(*v, ';')) {
      if (part.empty()) continue;
      const auto fields = detail::split(part, ':');
      if (fields.size() < 2 || fields.size() > 3) throw ConfigError("segments", "expected theta:n[:c] per segment");
      segs->emplace_back(detail::parse_list(fields[0], "segments"),
                         static_cast<std::size_t>(detail::parse_uint(fields[1], "segments")),
                         fields.size() == 3 ? static_cast<std::size_t>(detail::parse_uint(fields[2], "segments")) : 0);
    }
    if (segs->empty()) throw ConfigError("segments", "no segments given");
  }

  std::vector<double> theta_t;
  if (segs) {
    theta_t = std::get<0>(segs->front());
    if (const auto* v = get("theta_t")) {
      if (detail::parse_list(*v, "theta_t") != theta_t) {
        throw ConfigError("theta_t", "disagrees with the first segment");
      }
    }
  } else {
    theta_t = detail::parse_list(require("theta_t"), "theta_t");
  }
  const std::vector<double> theta_s = detail::parse_list(require("theta_s"), "theta_s");
  const std::size_t d = theta_t.size();
  if (d < 1 || d > kMaxDim) throw ConfigError("theta_t", "dimension must be between 1 and 3");
  if (theta_s.size() != d) throw ConfigError("theta_s", "dimension differs from theta_t");
  if (family_name == "bernoulli" && d != 1) throw ConfigError("theta_t", "bernoulli has a scalar parameter");

  Box box = family_name == "bernoulli" ? Box::cube(1, 1e-4, 1.0 - 1e-4) : Box::cube(d, 0.0, 1.0);
  if (const auto* v = get("box.lo")) box.lo = detail::broadcast(detail::parse_list(*v, "box.lo"), d, "box.lo");
  if (const auto* v = get("box.hi")) box.hi = detail::broadcast(detail::parse_list(*v, "box.hi"), d, "box.hi");
  try {
    box.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError("box", e.what());
  }

  auto reject = [&](const char* key, std::string_view other_family) {
    if (get(key)) throw ConfigError(key, "only applies to the " + std::string(other_family) + " family");
  };
  try {
    if (family_name == "bernoulli") {
      reject("covariate.mean", "logistic");
      reject("covariate.cov", "logistic");
      reject("noise.cov", "gaussian");
      sc.family = FamilyModel::bernoulli(box);
    } else if (family_name == "gaussian") {
      reject("covariate.mean", "logistic");
      reject("covariate.cov", "logistic");
      const auto* v = get("noise.cov");
      const Eigen::MatrixXd cov = v ? detail::parse_matrix(*v, d, "noise.cov")
                                    : Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      sc.family = FamilyModel::gaussian_mean(cov, box);
    } else {
      reject("noise.cov", "gaussian");
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
      if (const auto* v = get("covariate.mean")) {
        const auto mv = detail::broadcast(detail::parse_list(*v, "covariate.mean"), d, "covariate.mean");
        for (std::size_t a = 0; a < d; ++a) mean[static_cast<Eigen::Index>(a)] = mv[a];
      }
      const auto* v = get("covariate.cov");
      const Eigen::MatrixXd cov = v ? detail::parse_matrix(*v, d, "covariate.cov")
                                    : Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      sc.family = FamilyModel::logistic(mean, cov, box);
    }
  } catch (const PreconditionError& e) {
    throw ConfigError(family_name == "gaussian" ? "noise.cov" : "covariate.cov", e.what());
  } catch (const NumericalError& e) {
    throw ConfigError(family_name == "gaussian" ? "noise.cov" : "covariate.cov", e.what());
  }
  if (const auto* v = get("fisher.samples")) {
    const auto s = detail::parse_uint(*v, "fisher.samples");
    if (s == 0) throw ConfigError("fisher.samples", "must be positive");
    sc.family = sc.family.with_fisher_samples(s, sc.family.fisher_seed());
  }

  const auto shared = static_cast<std::size_t>(count("shared", 0));
  if (shared > d) throw ConfigError("shared", "exceeds the parameter dimension");
  sc.theta_t = ParamPoint(theta_t, shared);
  sc.theta_s = ParamPoint(theta_s, shared);
  if (!box.contains(sc.theta_t.view())) throw ConfigError("theta_t", to_string(theta_t) + " lies outside the box");
  if (!box.contains(sc.theta_s.view())) throw ConfigError("theta_s", to_string(theta_s) + " lies outside the box");
  for (std::size_t a = 0; a < shared; ++a) {
    if (theta_t[a] != theta_s[a]) throw ConfigError("shared", "theta_t and theta_s differ on a shared coordinate");
  }

  sc.m = static_cast<std::size_t>(count("m", 0));
  sc.reps = static_cast<std::size_t>(count("reps", 200));
  if (sc.reps < 1) throw ConfigError("reps", "must be at least 1");
  sc.seed = count("seed", 1);
  sc.grid_resolution = static_cast<std::size_t>(count("grid", 61));
  if (sc.grid_resolution < 2) throw ConfigError("grid", "must be at least 2");
  try {
    (void)sc.grid();
  } catch (const PreconditionError& e) {
    throw ConfigError("grid", e.what());
  }

  const std::string kind = get("prior.kind") ? *get("prior.kind") : "gaussian_around";
  if (kind == "gaussian_around") {
    if (get("prior.delta")) throw ConfigError("prior.delta", "only applies to prior.kind = hard_window");
    const double c = number("prior.c", 0.1);
    if (!(c > 0.0)) throw ConfigError("prior.c", "must be positive");
    sc.prior = PriorSpec::uniform_gaussian_around(box, c, shared);
  } else if (kind == "hard_window") {
    if (get("prior.c")) throw ConfigError("prior.c", "only applies to prior.kind = gaussian_around");
    const double delta = number("prior.delta", 0.1);
    if (!(delta > 0.0)) throw ConfigError("prior.delta", "must be positive");
    sc.prior = PriorSpec::uniform_hard_window(box, delta, shared);
  } else if (kind == "uniform") {
    if (shared > 0) throw ConfigError("prior.kind", "a uniform prior cannot share coordinates with the source");
    sc.prior = PriorSpec::source_free_uniform(box);
  } else {
    throw ConfigError("prior.kind", "expected gaussian_around, hard_window or uniform, got '" + kind + "'");
  }

  const std::string marginal = get("prior.marginal") ? *get("prior.marginal") : "uniform";
  if (marginal == "gaussian") {
    const auto mean = detail::broadcast(detail::parse_list(require("prior.marginal.mean"), "prior.marginal.mean"), d,
                                        "prior.marginal.mean");
    const auto sd =
        detail::broadcast(detail::parse_list(require("prior.marginal.sd"), "prior.marginal.sd"), d, "prior.marginal.sd");
    for (double s : sd) {
      if (!(s > 0.0)) throw ConfigError("prior.marginal.sd", "must be positive");
    }
    sc.prior = sc.prior.with_gaussian_marginal(mean, sd);
  } else if (marginal == "uniform") {
    if (get("prior.marginal.mean")) throw ConfigError("prior.marginal.mean", "only applies to a gaussian marginal");
    if (get("prior.marginal.sd")) throw ConfigError("prior.marginal.sd", "only applies to a gaussian marginal");
  } else {
    throw ConfigError("prior.marginal", "expected uniform or gaussian, got '" + marginal + "'");
  }

  const std::string baseline = get("baseline.kind") ? *get("baseline.kind") : "uniform";
  if (baseline != "uniform") throw ConfigError("baseline.kind", "expected uniform, got '" + baseline + "'");
  sc.baseline_prior = PriorSpec::source_free_uniform(box);

  const std::string loss = get("loss") ? *get("loss") : "log";
  if (loss == "log") {
    sc.loss = LossKind::LogLoss;
  } else if (loss == "zero_one") {
    if (family_name != "logistic") throw ConfigError("loss", "zero_one loss needs the logistic family");
    sc.loss = LossKind::ZeroOne;
  } else {
    throw ConfigError("loss", "expected log or zero_one, got '" + loss + "'");
  }

  if (segs) {
    SegmentSchedule sched;
    sched.shared_with_source = shared;
    for (std::size_t l = 0; l < segs->size(); ++l) {
      const auto& [th, n_l, c_l] = (*segs)[l];
      if (th.size() != d) throw ConfigError("segments", "segment " + std::to_string(l) + " has the wrong dimension");
      if (!box.contains(th)) throw ConfigError("segments", "segment " + std::to_string(l) + " lies outside the box");
      sched.segments.push_back(Segment{ParamPoint(th, shared), n_l, c_l});
    }
    const std::string tkind = get("transition.kind") ? *get("transition.kind") : "gaussian_around";
    sched.transition.box = box;
    if (tkind == "gaussian_around") {
      sched.transition.kind = ConditionalKind::GaussianAround;
      sched.transition.c = number("transition.c", sc.prior.conditional.kind == ConditionalKind::GaussianAround
                                                      ? sc.prior.conditional.c
                                                      : 0.1);
      if (!(sched.transition.c > 0.0)) throw ConfigError("transition.c", "must be positive");
    } else if (tkind == "hard_window") {
      sched.transition.kind = ConditionalKind::HardWindow;
      sched.transition.delta = number("transition.delta", 0.1);
      if (!(sched.transition.delta > 0.0)) throw ConfigError("transition.delta", "must be positive");
    } else {
      throw ConfigError("transition.kind", "expected gaussian_around or hard_window, got '" + tkind + "'");
    }
    try {
      sched.validate(sc.theta_s);
    } catch (const PreconditionError& e) {
      throw ConfigError("segments", e.what());
    }
    if (get("n") && detail::parse_uint(*get("n"), "n") != sched.total_steps()) {
      throw ConfigError("n", "disagrees with the total segment length");
    }
    sc.n = sched.total_steps();
    sc.schedule = std::move(sched);
  } else {
    for (const char* key : {"transition.kind", "transition.c", "transition.delta"}) {
      if (get(key)) throw ConfigError(key, "only applies together with segments");
    }
    sc.n = static_cast<std::size_t>(detail::parse_uint(require("n"), "n"));
    if (sc.n < 1) throw ConfigError("n", "must be at least 1");
  }

  try {
    sc.validate();
  } catch (const PreconditionError& e) {
    throw ConfigError("", e.what());
  } catch (const DomainError& e) {
    throw ConfigError("", e.what());
  }
  return sc;
}

// A builtin name or a path to a scenario file.
inline ScenarioConfig load_scenario(const std::string& name_or_path) {
  const auto& cat = detail::builtin_catalog();
  if (const auto it = cat.find(name_or_path); it != cat.end()) return parse_scenario(it->second);
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) {
    throw ConfigError("scenario", "'" + name_or_path + "' is neither a builtin scenario nor a readable file");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

}  // namespace otl
