#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "skelcap/graph.hpp"
#include "skelcap/params.hpp"

namespace skelcap::nn {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // |a - n| / max(|a|, |n|, floor); keeps tiny gradients from dividing by ~0.
  double floor = 1e-6;
  // Coordinates per parameter; 0 checks every element.
  std::size_t max_per_parameter = 0;
};

// Compares the analytic gradient of `loss_fn` with central differences for
// every parameter in `params`. The loss function must rebuild its graph from
// the current parameter values on each call and return a scalar.
template <typename T>
GradCheckReport grad_check(const std::function<Var(BasicGraph<T>&)>& loss_fn,
                           BasicParameterStore<T>& params, const GradCheckOptions& options = {});

}  // namespace skelcap::nn
