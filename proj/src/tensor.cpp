#include "minivlm/tensor.hpp"

#include <cmath>

namespace minivlm {

void init_uniform_fan_in(Mat& m, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -bound, bound);
}

}  // namespace minivlm
