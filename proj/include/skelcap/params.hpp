#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "skelcap/tensor.hpp"

namespace skelcap::nn {

template <typename T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> value;
  std::vector<T> grad;   // empty until a graph touches the parameter
  std::vector<T> accum;  // Adagrad sum of squared gradients

  bool has_grad() const { return !grad.empty(); }
};

enum class Init {
  zeros,
  glorot,      // uniform in [-r, r], r = sqrt(6 / (fan_in + fan_out))
  forget_one,  // LSTM gate bias: zeros with +1 on the forget block
};

// Named parameters with stable addresses. Iteration order is by name, which
// keeps updates and serialization deterministic.
template <typename T>
class BasicParameterStore {
 public:
  BasicParameterStore() = default;
  BasicParameterStore(const BasicParameterStore& other);
  BasicParameterStore& operator=(const BasicParameterStore& other);
  BasicParameterStore(BasicParameterStore&&) noexcept = default;
  BasicParameterStore& operator=(BasicParameterStore&&) noexcept = default;

  BasicParameter<T>& add(const std::string& name, Shape shape, Init init, std::mt19937_64& rng);
  BasicParameter<T>& add(const std::string& name, BasicTensor<T> value);

  BasicParameter<T>& get(const std::string& name);
  const BasicParameter<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;

  std::vector<BasicParameter<T>*> all();
  std::vector<const BasicParameter<T>*> all() const;

  void zero_grad();
  void clear_grad();
  double grad_norm() const;
  // Scales gradients so their global L2 norm is at most max_norm. Returns
  // the norm before clipping.
  double clip_grad_norm(double max_norm);

  std::size_t step() const { return step_; }
  void set_step(std::size_t s) { step_ = s; }

  template <typename U>
  BasicParameterStore<U> cast() const {
    BasicParameterStore<U> out;
    for (const auto* p : all()) {
      auto& q = out.add(p->name, p->value.template cast<U>());
      q.accum.assign(p->accum.begin(), p->accum.end());
    }
    out.set_step(step_);
    return out;
  }

 private:
  std::map<std::string, std::unique_ptr<BasicParameter<T>>> params_;
  std::size_t step_ = 0;
};

using Parameter = BasicParameter<float>;
using ParameterStore = BasicParameterStore<float>;

// acc += g^2; w -= lr * g / (sqrt(acc) + eps). Every parameter must carry a
// gradient. Increments the store's step counter.
template <typename T>
void adagrad_step(BasicParameterStore<T>& store, double learning_rate, double epsilon = 1e-8);

}  // namespace skelcap::nn
