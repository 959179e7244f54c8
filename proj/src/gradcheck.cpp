#include "minivlm/gradcheck.hpp"

#include "minivlm/errors.hpp"
#include "minivlm/vlm_core.hpp"

#include <algorithm>
#include <cmath>

namespace minivlm {

double relative_error(double analytic, double numeric, double floor) {
  const double diff = std::abs(analytic - numeric);
  if (diff == 0.0) return 0.0;
  return diff / std::max({std::abs(analytic), std::abs(numeric), floor});
}

bool GradCheckReport::passed() const {
  return std::all_of(groups.begin(), groups.end(), [](const GroupCheck& g) { return g.passed; });
}

const GroupCheck* GradCheckReport::find(ParamGroup g) const {
  for (const auto& c : groups) {
    if (c.group == g) return &c;
  }
  return nullptr;
}

GradCheckReport grad_check(const ModelParams& params, const ModelConfig& cfg, const Example& ex,
                           const ForwardOptions& fwd, const GradCheckOptions& opt) {
  if (!(opt.epsilon > 0.0)) throw ContractError("grad_check: epsilon must be positive");
  if (opt.coords_per_group < 1) throw ContractError("grad_check: coords_per_group must be positive");

  GradCheckReport report;
  report.epsilon = opt.epsilon;
  report.tolerance = opt.tolerance;
  ModelParams grad = ModelParams::zeros_like(params);
  report.loss = model_loss(params, cfg, ex, fwd, &grad).loss;

  ModelParams work = params;
  auto work_tensors = tensors(work);
  const auto grad_tensors = tensors(grad);
  // Encoder outputs do not move when only non-encoder parameters are nudged.
  const EncodedViews encoded = encode_example(params, cfg, ex);
  Rng rng(opt.seed);

  for (ParamGroup group : opt.groups) {
    GroupCheck check;
    check.group = group;
    std::vector<std::size_t> members;
    Eigen::Index total = 0;
    check.analytic_all_zero = true;
    for (std::size_t i = 0; i < work_tensors.size(); ++i) {
      if (work_tensors[i].group != group) continue;
      members.push_back(i);
      total += work_tensors[i].value->size();
      if (grad_tensors[i].value->cwiseAbs().maxCoeff() != 0.0) check.analytic_all_zero = false;
    }
    if (total == 0) {
      report.groups.push_back(check);
      continue;
    }
    // Sample distinct flat coordinates across the group's tensors.
    const Eigen::Index want = std::min<Eigen::Index>(opt.coords_per_group, total);
    std::vector<Eigen::Index> flat;
    while (static_cast<Eigen::Index>(flat.size()) < want) {
      const auto c = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::uint64_t>(total)));
      if (std::find(flat.begin(), flat.end(), c) == flat.end()) flat.push_back(c);
    }
    const EncodedViews* reuse = group == ParamGroup::encoder ? nullptr : &encoded;
    for (Eigen::Index c : flat) {
      std::size_t ti = 0;
      for (std::size_t m : members) {
        const Eigen::Index size = work_tensors[m].value->size();
        if (c < size) {
          ti = m;
          break;
        }
        c -= size;
      }
      double& slot = work_tensors[ti].value->data()[c];
      const double saved = slot;
      slot = saved + opt.epsilon;
      const double up = model_loss(work, cfg, ex, fwd, nullptr, {}, reuse).loss;
      slot = saved - opt.epsilon;
      const double down = model_loss(work, cfg, ex, fwd, nullptr, {}, reuse).loss;
      slot = saved;

      CoordinateCheck cc;
      cc.tensor = work_tensors[ti].name;
      cc.index = c;
      cc.analytic = grad_tensors[ti].value->data()[c];
      cc.numeric = (up - down) / (2.0 * opt.epsilon);
      cc.rel_error = relative_error(cc.analytic, cc.numeric, opt.denominator_floor);
      check.max_rel_error = std::max(check.max_rel_error, cc.rel_error);
      check.max_abs_analytic = std::max(check.max_abs_analytic, std::abs(cc.analytic));
      check.max_abs_numeric = std::max(check.max_abs_numeric, std::abs(cc.numeric));
      if (!(cc.rel_error <= opt.tolerance)) check.passed = false;
      check.coords.push_back(std::move(cc));
    }
    report.groups.push_back(std::move(check));
  }
  return report;
}

ProjectorCheck grad_check_projector(const ProjectorParams& params, const Mat& features,
                                    const Mat& targets, double epsilon) {
  auto loss = [&](const ProjectorParams& p) {
    return 0.5 * (project(features, p) - targets).squaredNorm();
  };
  ProjectorParams grad = LinearParams::zeros_like(params);
  linear_backward(features, params, project(features, params) - targets, &grad);

  ProjectorCheck out;
  ProjectorParams work = params;
  for (auto [value, analytic] : {std::pair{&work.w, &grad.w}, std::pair{&work.b, &grad.b}}) {
    for (Eigen::Index i = 0; i < value->size(); ++i) {
      double& slot = value->data()[i];
      const double saved = slot;
      slot = saved + epsilon;
      const double up = loss(work);
      slot = saved - epsilon;
      const double down = loss(work);
      slot = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      out.max_abs_diff = std::max(out.max_abs_diff, std::abs(numeric - analytic->data()[i]));
      out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic->data()[i], numeric, 1e-8));
      ++out.checked;
    }
  }
  return out;
}

}  // namespace minivlm
