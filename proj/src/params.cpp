#include "skelcap/params.hpp"

#include <cmath>

namespace skelcap::nn {

template <typename T>
BasicParameterStore<T>::BasicParameterStore(const BasicParameterStore& other) : step_(other.step_) {
  for (const auto& [name, p] : other.params_)
    params_.emplace(name, std::make_unique<BasicParameter<T>>(*p));
}

template <typename T>
BasicParameterStore<T>& BasicParameterStore<T>::operator=(const BasicParameterStore& other) {
  if (this != &other) {
    BasicParameterStore tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

template <typename T>
BasicParameter<T>& BasicParameterStore<T>::add(const std::string& name, Shape shape, Init init,
                                               std::mt19937_64& rng) {
  BasicTensor<T> value(shape, T(0));
  switch (init) {
    case Init::zeros:
      break;
    case Init::glorot: {
      if (shape.size() != 2) throw ShapeError("glorot init needs a matrix, got " + shape_string(shape));
      double r = std::sqrt(6.0 / static_cast<double>(shape[0] + shape[1]));
      std::uniform_real_distribution<double> u(-r, r);
      for (auto& v : value.values()) v = static_cast<T>(u(rng));
      break;
    }
    case Init::forget_one: {
      std::size_t n = value.size();
      if (n % 4 != 0) throw ShapeError("LSTM bias length must be a multiple of 4");
      // Gate layout is [input, forget, output, candidate].
      for (std::size_t i = n / 4; i < n / 2; ++i) value[i] = T(1);
      break;
    }
  }
  return add(name, std::move(value));
}

template <typename T>
BasicParameter<T>& BasicParameterStore<T>::add(const std::string& name, BasicTensor<T> value) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
  auto p = std::make_unique<BasicParameter<T>>();
  p->name = name;
  p->accum.assign(value.size(), T(0));
  p->value = std::move(value);
  auto& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

template <typename T>
BasicParameter<T>& BasicParameterStore<T>::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *it->second;
}

template <typename T>
const BasicParameter<T>& BasicParameterStore<T>::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
  return *it->second;
}

template <typename T>
std::size_t BasicParameterStore<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p->value.size();
  return n;
}

template <typename T>
std::vector<BasicParameter<T>*> BasicParameterStore<T>::all() {
  std::vector<BasicParameter<T>*> out;
  for (auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

template <typename T>
std::vector<const BasicParameter<T>*> BasicParameterStore<T>::all() const {
  std::vector<const BasicParameter<T>*> out;
  for (const auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

template <typename T>
void BasicParameterStore<T>::zero_grad() {
  for (auto& [_, p] : params_) p->grad.assign(p->value.size(), T(0));
}

template <typename T>
void BasicParameterStore<T>::clear_grad() {
  for (auto& [_, p] : params_) p->grad.clear();
}

template <typename T>
double BasicParameterStore<T>::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : params_)
    for (T g : p->grad) s += static_cast<double>(g) * static_cast<double>(g);
  return std::sqrt(s);
}

template <typename T>
double BasicParameterStore<T>::clip_grad_norm(double max_norm) {
  double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    T scale = static_cast<T>(max_norm / norm);
    for (auto& [_, p] : params_)
      for (T& g : p->grad) g *= scale;
  }
  return norm;
}

template <typename T>
void adagrad_step(BasicParameterStore<T>& store, double learning_rate, double epsilon) {
  for (auto* p : store.all())
    if (!p->has_grad()) throw std::logic_error("adagrad_step: parameter " + p->name + " has no gradient");
  for (auto* p : store.all()) {
    T* w = p->value.data();
    for (std::size_t i = 0; i < p->grad.size(); ++i) {
      double g = p->grad[i];
      double acc = static_cast<double>(p->accum[i]) + g * g;
      p->accum[i] = static_cast<T>(acc);
      w[i] = static_cast<T>(w[i] - learning_rate * g / (std::sqrt(acc) + epsilon));
    }
    if (!p->value.all_finite()) throw NonFiniteError("non-finite weight in " + p->name);
  }
  store.set_step(store.step() + 1);
}

template class BasicParameterStore<float>;
template class BasicParameterStore<double>;
template void adagrad_step<float>(BasicParameterStore<float>&, double, double);
template void adagrad_step<double>(BasicParameterStore<double>&, double, double);

}  // namespace skelcap::nn
