#pragma once

#include <functional>
#include <string>

#include "tt/graph.hpp"
#include "tt/parameters.hpp"

namespace tt {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of a deterministic scalar function against
// central finite differences (f(θ+eps) - f(θ-eps)) / (2 eps), entry by entry
// over every parameter in the store. Relative error uses
// |a - n| / max(1, |a|, |n|) so near-zero gradients are judged absolutely.
GradCheckResult grad_check(ParameterStore& store, const std::function<Var(Graph&)>& f,
                           double eps = 1e-5);

}  // namespace tt
