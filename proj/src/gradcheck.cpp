#include "skelcap/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace skelcap::nn {

template <typename T>
GradCheckReport grad_check(const std::function<Var(BasicGraph<T>&)>& loss_fn,
                           BasicParameterStore<T>& params, const GradCheckOptions& options) {
  params.clear_grad();
  {
    BasicGraph<T> g;
    Var loss = loss_fn(g);
    g.backward(loss);
  }
  auto eval = [&] {
    BasicGraph<T> g;
    return static_cast<double>(g.value(loss_fn(g))[0]);
  };

  GradCheckReport report;
  for (auto* p : params.all()) {
    std::vector<T> analytic = p->grad;
    if (analytic.empty()) analytic.assign(p->value.size(), T(0));
    std::size_t n = p->value.size();
    std::size_t stride = 1;
    if (options.max_per_parameter && n > options.max_per_parameter)
      stride = (n + options.max_per_parameter - 1) / options.max_per_parameter;
    for (std::size_t i = 0; i < n; i += stride) {
      T saved = p->value[i];
      p->value[i] = static_cast<T>(saved + options.step);
      double up = eval();
      p->value[i] = static_cast<T>(saved - options.step);
      double down = eval();
      p->value[i] = saved;
      double numeric = (up - down) / (2.0 * options.step);
      double a = analytic[i];
      double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
      double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_parameter.empty()) {
        if (rel >= report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_parameter = p->name;
          report.worst_index = i;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  params.clear_grad();
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

template GradCheckReport grad_check<float>(const std::function<Var(BasicGraph<float>&)>&,
                                           BasicParameterStore<float>&, const GradCheckOptions&);
template GradCheckReport grad_check<double>(const std::function<Var(BasicGraph<double>&)>&,
                                            BasicParameterStore<double>&, const GradCheckOptions&);

}  // namespace skelcap::nn
