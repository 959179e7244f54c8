#pragma once

// Central finite differences against analytic gradients, per parameter group.
//
//   numeric  = (L(theta + eps) - L(theta - eps)) / (2 eps)
//   rel_err  = |analytic - numeric| / max(|analytic|, |numeric|, floor)
//
// A coordinate where both values are exactly zero has rel_err 0.

#include "minivlm/model.hpp"

#include <string>
#include <vector>

namespace minivlm {

struct GradCheckOptions {
  double epsilon = 1e-5;
  int coords_per_group = 20;
  double tolerance = 1e-3;
  double denominator_floor = 1e-8;
  std::uint64_t seed = 0;
  std::vector<ParamGroup> groups{kAllGroups.begin(), kAllGroups.end()};
};

struct CoordinateCheck {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GroupCheck {
  ParamGroup group = ParamGroup::projector;
  std::vector<CoordinateCheck> coords;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
  /// Every analytic entry of the whole group (not just the sampled ones) is exactly zero.
  bool analytic_all_zero = false;
  bool passed = true;
};

struct GradCheckReport {
  double loss = 0.0;
  double epsilon = 0.0;
  double tolerance = 0.0;
  std::vector<GroupCheck> groups;

  bool passed() const;
  const GroupCheck* find(ParamGroup g) const;
};

double relative_error(double analytic, double numeric, double floor);

GradCheckReport grad_check(const ModelParams& params, const ModelConfig& cfg, const Example& ex,
                           const ForwardOptions& fwd, const GradCheckOptions& opt = {});

struct ProjectorCheck {
  double max_abs_diff = 0.0;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Projector alone under L = 0.5 * ||project(x) - target||^2, every coordinate.
ProjectorCheck grad_check_projector(const ProjectorParams& params, const Mat& features,
                                    const Mat& targets, double epsilon = 1e-5);

}  // namespace minivlm
