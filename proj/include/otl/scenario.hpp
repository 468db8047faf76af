#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otl/error.hpp"
#include "otl/family.hpp"
#include "otl/grid.hpp"
#include "otl/prior.hpp"

namespace otl {

enum class LossKind { LogLoss, ZeroOne };

struct Segment {
  ParamPoint theta_t;
  std::size_t n = 0;
  std::size_t common_with_previous = 0;  // c_l; ignored for the first segment
};

// Piecewise-constant target parameter. Each segment's prior is the previous
// segment's posterior pushed through `transition` (its `shared` field is
// replaced by the segment's common_with_previous count).
struct SegmentSchedule {
  std::vector<Segment> segments;
  std::size_t shared_with_source = 0;  // j
  ConditionalSpec transition;

  std::size_t total_steps() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.n;
    return n;
  }

  // Offset of segment l's first step within the concatenated trace.
  std::size_t segment_start(std::size_t l) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < l; ++i) n += segments[i].n;
    return n;
  }

  ConditionalSpec transition_into(std::size_t l) const {
    ConditionalSpec k = transition;
    k.shared = segments.at(l).common_with_previous;
    return k;
  }

  void validate(const ParamPoint& theta_s) const {
    if (segments.empty()) throw PreconditionError("schedule: at least one segment required");
    for (std::size_t l = 0; l < segments.size(); ++l) {
      const Segment& seg = segments[l];
      if (seg.n < 1) throw PreconditionError("schedule: segment " + std::to_string(l) + " has n < 1");
      if (seg.theta_t.dim() != theta_s.dim()) throw PreconditionError("schedule: segment dimension mismatch");
      for (std::size_t a = 0; a < shared_with_source; ++a) {
        if (seg.theta_t[a] != theta_s[a]) {
          throw PreconditionError("schedule: segment " + std::to_string(l) +
                                  " disagrees with the source on a shared coordinate");
        }
      }
      if (l == 0) continue;
      if (seg.common_with_previous > seg.theta_t.dim()) {
        throw PreconditionError("schedule: common count exceeds dimension");
      }
      for (std::size_t a = 0; a < seg.common_with_previous; ++a) {
        if (seg.theta_t[a] != segments[l - 1].theta_t[a]) {
          throw PreconditionError("schedule: segment " + std::to_string(l) +
                                  " disagrees with the previous segment on a common coordinate");
        }
      }
    }
  }
};

// One simulation setting. Source and target share the family (and hence the
// covariate law); they differ only in the true parameter.
struct ScenarioConfig {
  std::string name = "custom";
  FamilyModel family;
  ParamPoint theta_s;
  ParamPoint theta_t;
  std::size_t m = 0;
  std::size_t n = 1;
  PriorSpec prior;
  PriorSpec baseline_prior;
  std::size_t reps = 200;
  std::uint64_t seed = 1;
  std::size_t grid_resolution = 61;
  LossKind loss = LossKind::LogLoss;
  std::optional<SegmentSchedule> schedule;

  GridSpec grid() const { return GridSpec(family.box(), grid_resolution); }

  // Number of target steps a trial produces.
  std::size_t horizon() const { return schedule ? schedule->total_steps() : n; }

  std::size_t shared() const { return prior.conditional.shared; }

  void validate() const {
    family.check_parameter(theta_s.view(), "theta_s");
    family.check_parameter(theta_t.view(), "theta_t");
    if (n < 1) throw PreconditionError("scenario: n must be at least 1");
    if (reps < 1) throw PreconditionError("scenario: reps must be at least 1");
    if (prior.dim() != family.dim() || baseline_prior.dim() != family.dim()) {
      throw PreconditionError("scenario: prior dimension differs from the family");
    }
    for (std::size_t a = 0; a < shared(); ++a) {
      if (theta_s[a] != theta_t[a]) {
        throw PreconditionError("scenario: theta_s and theta_t differ on shared coordinate " + std::to_string(a));
      }
    }
    if (loss == LossKind::ZeroOne && family.kind() != FamilyKind::LogisticRegression) {
      throw PreconditionError("scenario: zero-one loss needs the logistic family");
    }
    if (schedule) {
      schedule->validate(theta_s);
      if (schedule->shared_with_source != shared()) {
        throw PreconditionError("scenario: schedule and prior disagree on the shared count");
      }
    }
  }
};

}  // namespace otl
