#pragma once

// Monte-Carlo replication driver, regret-curve CSV persistence and posterior
// snapshots.

#include <cinttypes>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "otl/asymptotics.hpp"
#include "otl/error.hpp"
#include "otl/family.hpp"
#include "otl/grid.hpp"
#include "otl/online.hpp"
#include "otl/parallel.hpp"
#include "otl/posterior.hpp"
#include "otl/prior.hpp"
#include "otl/random.hpp"
#include "otl/scenario.hpp"

namespace otl {

// One row per target step n = 1..N. Optional columns are written as NA.
struct RegretCurve {
  std::vector<std::size_t> n;
  std::vector<double> mean_regret;
  std::vector<double> std_error;
  std::vector<double> mean_regret_baseline;
  std::vector<double> std_error_baseline;
  std::vector<std::optional<double>> asymptote;
  std::vector<std::optional<double>> asymptote_baseline;
  std::vector<std::optional<double>> bound;

  std::size_t size() const { return n.size(); }

  void resize(std::size_t rows) {
    n.resize(rows);
    mean_regret.resize(rows);
    std_error.resize(rows);
    mean_regret_baseline.resize(rows);
    std_error_baseline.resize(rows);
    asymptote.resize(rows);
    asymptote_baseline.resize(rows);
    bound.resize(rows);
  }

  bool operator==(const RegretCurve&) const = default;
};

inline constexpr std::string_view kCurveHeader =
    "n,mean_regret,stderr,mean_regret_baseline,stderr_baseline,asymptote,asymptote_baseline,bound";

namespace detail {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string format_cell(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

inline std::optional<double> parse_cell(std::string_view s, std::size_t line, std::string_view column) {
  if (s == "NA") return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string str(s);
    const double v = std::stod(str, &used);
    if (used != str.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw PreconditionError("curve CSV line " + std::to_string(line) + ": bad value '" + std::string(s) +
                            "' in column " + std::string(column));
  }
}

// Writes `content` to `path` through a temporary sibling and a rename.
inline void write_atomically(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

}  // namespace detail

inline std::string format_curve_csv(const RegretCurve& c) {
  std::string out(kCurveHeader);
  out += '\n';
  for (std::size_t i = 0; i < c.size(); ++i) {
    out += std::to_string(c.n[i]);
    for (double v : {c.mean_regret[i], c.std_error[i], c.mean_regret_baseline[i], c.std_error_baseline[i]}) {
      out += ',';
      out += detail::format_number(v);
    }
    for (const auto* col : {&c.asymptote, &c.asymptote_baseline, &c.bound}) {
      out += ',';
      out += detail::format_cell((*col)[i]);
    }
    out += '\n';
  }
  return out;
}

inline RegretCurve parse_curve_csv(std::string_view text) {
  static constexpr std::string_view kColumns[] = {"n",         "mean_regret",        "stderr", "mean_regret_baseline",
                                                  "stderr_baseline", "asymptote", "asymptote_baseline", "bound"};
  RegretCurve c;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kCurveHeader) throw PreconditionError("curve CSV: unexpected header '" + std::string(line) + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> cells;
    std::size_t p = 0;
    while (true) {
      const auto q = line.find(',', p);
      cells.push_back(line.substr(p, q == std::string_view::npos ? std::string_view::npos : q - p));
      if (q == std::string_view::npos) break;
      p = q + 1;
    }
    if (cells.size() != 8) throw PreconditionError("curve CSV line " + std::to_string(line_no) + ": expected 8 cells");
    std::optional<double> v[8];
    for (std::size_t k = 0; k < 8; ++k) v[k] = detail::parse_cell(cells[k], line_no, kColumns[k]);
    for (std::size_t k = 0; k < 5; ++k) {
      if (!v[k]) {
        throw PreconditionError("curve CSV line " + std::to_string(line_no) + ": column " + std::string(kColumns[k]) +
                                " cannot be NA");
      }
    }
    c.n.push_back(static_cast<std::size_t>(*v[0]));
    c.mean_regret.push_back(*v[1]);
    c.std_error.push_back(*v[2]);
    c.mean_regret_baseline.push_back(*v[3]);
    c.std_error_baseline.push_back(*v[4]);
    c.asymptote.push_back(v[5]);
    c.asymptote_baseline.push_back(v[6]);
    c.bound.push_back(v[7]);
  }
  if (line_no == 0) throw PreconditionError("curve CSV: empty input");
  return c;
}

inline void write_curve_csv(const RegretCurve& c, const std::filesystem::path& path) {
  detail::write_atomically(path, format_curve_csv(c));
}

inline RegretCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_curve_csv(ss.str());
}

// Closed-form asymptote columns for n = 1..n_max. With-source values are
// absent when the prior density at the truth is zero, when there is no
// source data, or for a time-variant schedule; both are absent for the latter.
struct AsymptoteColumns {
  std::vector<std::optional<double>> with_source;
  std::vector<std::optional<double>> baseline;
};

inline AsymptoteColumns asymptote_columns(const ScenarioConfig& sc, std::size_t n_max) {
  AsymptoteColumns out;
  out.with_source.assign(n_max, std::nullopt);
  out.baseline.assign(n_max, std::nullopt);
  if (sc.schedule) return out;
  const std::size_t d = sc.family.dim();
  const std::size_t j = sc.shared();
  const FisherBlocks own = fisher_blocks(sc.family, sc.family, sc.theta_t, sc.theta_t, 0);
  const double log_w_hat = conditional_log_density(sc.baseline_prior, sc.theta_t, sc.theta_t);
  const bool baseline_ok = std::isfinite(log_w_hat);
  const double log_w = conditional_log_density(sc.prior, sc.theta_t, sc.theta_s);
  std::optional<FisherBlocks> blocks;
  if (std::isfinite(log_w) && (sc.m > 0 || !sc.prior.depends_on_source())) {
    blocks = sc.prior.depends_on_source() ? fisher_blocks(sc.family, sc.family, sc.theta_s, sc.theta_t, j) : own;
  }
  for (std::size_t k = 1; k <= n_max; ++k) {
    if (baseline_ok) out.baseline[k - 1] = asymptote_general(own, log_w_hat, k, 1, d, 0).value;
    if (blocks) out.with_source[k - 1] = asymptote_general(*blocks, log_w, k, std::max<std::size_t>(sc.m, 1), d, blocks->j).value;
  }
  return out;
}

struct TrialFailure {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentResult {
  RegretCurve curve;
  std::vector<std::uint64_t> target_checksums;  // per completed trial, in trial order
  std::vector<TrialFailure> failures;
  std::size_t completed = 0;
  bool cmi_clamped = false;  // a negative Monte-Carlo CMI below -3 stderr was clamped to 0 for the bound
};

struct ExperimentOptions {
  std::size_t threads = default_thread_count();
  double max_failure_fraction = 0.01;
};

namespace detail {

struct TrialRecord {
  bool ok = false;
  std::vector<double> with_source;
  std::vector<double> baseline;
  std::vector<double> log_loss_with_source;  // only for zero-one loss, feeds the bound column
  std::uint64_t checksum = 0;
  std::string error;
};

}  // namespace detail

// Runs sc.reps trials. Trial r draws its data from trial_stream(sc.seed, r) and
// evaluates both arms on it. Results are reduced in trial order, so the output
// does not depend on the thread count.
inline ExperimentResult run_experiment(const ScenarioConfig& sc, const ExperimentOptions& opt = {}) {
  sc.validate();
  const GridSpec grid = sc.grid();
  const std::size_t horizon = sc.horizon();
  const GridPosterior baseline_prior = source_free_prior(sc.baseline_prior, grid);
  if (sc.baseline_prior.depends_on_source()) throw PreconditionError("run_experiment: baseline prior must ignore the source");

  std::vector<detail::TrialRecord> records(sc.reps);
  parallel_for(sc.reps, opt.threads, [&](std::size_t r) {
    detail::TrialRecord& rec = records[r];
    const std::uint64_t seed = trial_seed(sc.seed, r);
    try {
      RandomStream rng = make_stream(seed);
      const TrialData data = draw_trial_data(sc, rng);
      rec.checksum = data.target_checksum();
      const GridPosterior pi = induced_target_prior(sc.prior, sc.family, data.source, grid);
      if (sc.schedule) {
        rec.with_source = time_variant_trace(pi, *sc.schedule, sc.family, data.target).per_step;
        rec.baseline = time_variant_trace(baseline_prior, *sc.schedule, sc.family, data.target).per_step;
      } else if (sc.loss == LossKind::ZeroOne) {
        rec.with_source = zero_one_trace(pi, sc.family, sc.theta_t.view(), data.target).per_step;
        rec.baseline = zero_one_trace(baseline_prior, sc.family, sc.theta_t.view(), data.target).per_step;
        rec.log_loss_with_source = log_loss_trace(pi, sc.family, sc.theta_t.view(), data.target).per_step;
      } else {
        rec.with_source = log_loss_trace(pi, sc.family, sc.theta_t.view(), data.target).per_step;
        rec.baseline = log_loss_trace(baseline_prior, sc.family, sc.theta_t.view(), data.target).per_step;
      }
      rec.ok = true;
    } catch (const NumericalError& e) {
      rec.error = e.what();
    }
  });

  ExperimentResult res;
  std::vector<std::vector<double>> with_rows;
  std::vector<std::vector<double>> base_rows;
  std::vector<std::vector<double>> cmi_rows;
  for (std::size_t r = 0; r < records.size(); ++r) {
    auto& rec = records[r];
    if (!rec.ok) {
      res.failures.push_back({r, trial_seed(sc.seed, r), rec.error});
      continue;
    }
    res.target_checksums.push_back(rec.checksum);
    with_rows.push_back(std::move(rec.with_source));
    base_rows.push_back(std::move(rec.baseline));
    if (!rec.log_loss_with_source.empty()) cmi_rows.push_back(std::move(rec.log_loss_with_source));
  }
  res.completed = with_rows.size();
  if (static_cast<double>(res.failures.size()) > opt.max_failure_fraction * static_cast<double>(sc.reps) ||
      with_rows.empty()) {
    std::string msg = "experiment " + sc.name + ": " + std::to_string(res.failures.size()) + " of " +
                      std::to_string(sc.reps) + " trials failed";
    if (!res.failures.empty()) msg += "; first failure: " + res.failures.front().message;
    throw NumericalError(msg);
  }

  const MeanCurve with = mean_curve(with_rows);
  const MeanCurve base = mean_curve(base_rows);
  const AsymptoteColumns asym = asymptote_columns(sc, horizon);
  RegretCurve& c = res.curve;
  c.resize(horizon);
  std::optional<MeanCurve> cmi;
  if (!cmi_rows.empty()) cmi = mean_curve(cmi_rows);
  for (std::size_t k = 0; k < horizon; ++k) {
    c.n[k] = k + 1;
    c.mean_regret[k] = with.mean[k];
    c.std_error[k] = with.std_error[k];
    c.mean_regret_baseline[k] = base.mean[k];
    c.std_error_baseline[k] = base.std_error[k];
    c.asymptote[k] = asym.with_source[k];
    c.asymptote_baseline[k] = asym.baseline[k];
    if (cmi) {
      double v = cmi->mean[k];
      if (v < 0.0) {
        if (v < -3.0 * cmi->std_error[k]) res.cmi_clamped = true;
        v = 0.0;
      }
      c.bound[k] = general_loss_bound(1.0, k + 1, v);
    }
  }
  return res;
}

// Posteriors after the first n target samples of trial 0.
struct PosteriorSnapshot {
  GridPosterior source_posterior;
  GridPosterior target_with_source;
  GridPosterior target_no_source;
};

inline PosteriorSnapshot posterior_snapshot(const ScenarioConfig& sc, std::size_t n) {
  sc.validate();
  if (n > sc.horizon()) throw PreconditionError("posterior_snapshot: n exceeds the scenario's target sample count");
  const GridSpec grid = sc.grid();
  RandomStream rng = trial_stream(sc.seed, 0);
  const TrialData data = draw_trial_data(sc, rng);
  SourceConditioning cond = condition_on_source(sc.prior, sc.family, data.source, grid);
  const NodeLikelihood lik(sc.family, grid);
  const auto prefix = std::span<const Sample>(data.target).first(n);
  auto condition = [&](GridPosterior post) {
    std::vector<double> acc(post.log_weights().begin(), post.log_weights().end());
    lik.accumulate(prefix, acc);
    GridPosterior out(grid, std::move(acc));
    out.normalize();
    return out;
  };
  GridPosterior with = condition(cond.induced_target_prior);
  GridPosterior without = condition(source_free_prior(sc.baseline_prior, grid));
  return PosteriorSnapshot{std::move(cond.source_posterior), std::move(with), std::move(without)};
}

inline std::string format_snapshot_csv(const PosteriorSnapshot& s) {
  const std::size_t d = s.source_posterior.grid().dim();
  std::string out;
  for (std::size_t a = 0; a < d; ++a) out += "theta_" + std::to_string(a + 1) + ",";
  out += "density,tag\n";
  const std::pair<const GridPosterior*, const char*> parts[] = {{&s.source_posterior, "source_posterior"},
                                                                {&s.target_with_source, "target_posterior_with_source"},
                                                                {&s.target_no_source, "target_posterior_no_source"}};
  for (const auto& [post, tag] : parts) {
    for (std::size_t i = 0; i < post->size(); ++i) {
      for (double v : post->node(i)) {
        out += detail::format_number(v);
        out += ',';
      }
      out += detail::format_number(post->density(i));
      out += ',';
      out += tag;
      out += '\n';
    }
  }
  return out;
}

inline void write_snapshot_csv(const PosteriorSnapshot& s, const std::filesystem::path& path) {
  detail::write_atomically(path, format_snapshot_csv(s));
}

inline std::string format_asymptote_csv(const AsymptoteColumns& cols) {
  std::string out = "n,asymptote,asymptote_baseline\n";
  for (std::size_t k = 0; k < cols.with_source.size(); ++k) {
    out += std::to_string(k + 1) + "," + detail::format_cell(cols.with_source[k]) + "," +
           detail::format_cell(cols.baseline[k]) + "\n";
  }
  return out;
}

}  // namespace otl
