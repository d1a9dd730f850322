#include "tt/grad_check.hpp"

#include <cmath>

namespace tt {

namespace {

double eval_scalar(const std::function<Var(Graph&)>& f) {
  Graph g;
  Var out = f(g);
  if (out.size() != 1) throw ShapeError("grad_check: function must produce a scalar");
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw ShapeError("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckResult grad_check(ParameterStore& store, const std::function<Var(Graph&)>& f, double eps) {
  if (eps <= 0.0) throw ConfigError("grad_check: eps must be positive");
  store.zero_grads();
  {
    Graph g;
    Var out = f(g);
    if (out.size() != 1) throw ShapeError("grad_check: function must produce a scalar");
    if (!std::isfinite(out.value()[0])) throw ShapeError("grad_check: non-finite function value");
    g.backward(out);
  }
  std::vector<Tensor> analytic;
  analytic.reserve(store.size());
  for (const auto& p : store.items()) analytic.push_back(p.grad);

  GradCheckResult res;
  for (size_t pi = 0; pi < store.size(); ++pi) {
    Parameter& p = store.items()[pi];
    for (Index i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double fp = eval_scalar(f);
      p.value[i] = saved - eps;
      const double fm = eval_scalar(f);
      p.value[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p.id;
        res.worst_index = i;
        res.analytic = a;
        res.numeric = numeric;
      }
    }
  }
  store.zero_grads();
  return res;
}

}  // namespace tt
