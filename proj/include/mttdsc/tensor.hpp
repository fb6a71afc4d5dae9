#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mttdsc/errors.hpp"

namespace mttdsc {

// Dense row-major tensor of doubles. Double precision throughout so gradient
// checks can run at tight tolerances.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)),
        v_(std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                           std::multiplies<>{})) {}

  Tensor(std::initializer_list<std::size_t> shape)
      : Tensor(std::vector<std::size_t>(shape)) {}

  static Tensor of(std::vector<std::size_t> shape, std::vector<double> values) {
    Tensor t(std::move(shape));
    if (t.size() != values.size()) {
      throw DimensionError("tensor of shape " + t.shape_str() + " expects " +
                           std::to_string(t.size()) + " values, got " +
                           std::to_string(values.size()));
    }
    t.v_ = std::move(values);
    return t;
  }

  static Tensor vec(std::vector<double> values) {
    const std::size_t n = values.size();
    return of({n}, std::move(values));
  }

  std::size_t size() const { return v_.size(); }
  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }

  std::size_t rows() const {
    assert(ndim() == 2);
    return shape_[0];
  }
  std::size_t cols() const {
    assert(ndim() == 2);
    return shape_[1];
  }

  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }

  double& at(std::size_t r, std::size_t c) { return v_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return v_[r * shape_[1] + c]; }

  std::span<double> row(std::size_t r) {
    return {v_.data() + r * shape_[1], shape_[1]};
  }
  std::span<const double> row(std::size_t r) const {
    return {v_.data() + r * shape_[1], shape_[1]};
  }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  const std::vector<double>& values() const { return v_; }

  void fill(double x) { std::fill(v_.begin(), v_.end(), x); }

  bool all_finite() const {
    for (double x : v_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.v_ == b.v_;
  }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> v_;
};

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + a.shape_str() + " x " +
                         b.shape_str());
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a.at(i, p);
      if (aip == 0.0) continue;
      const double* brow = b.data() + p * m;
      double* orow = out.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aip * brow[j];
    }
  }
  return out;
}

// Stable logistic: never overflows on either tail.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
  return out;
}

inline Tensor tanh(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

// Distribution over the labels {-1, 0, +1}.
struct ProbabilityTriple {
  double p_neg = 0.0;
  double p_neu = 0.0;
  double p_pos = 0.0;

  // index 0 = negative, 1 = neutral, 2 = positive
  double p(std::size_t index) const {
    return index == 0 ? p_neg : index == 1 ? p_neu : p_pos;
  }
};

inline std::size_t label_to_index(int label) {
  if (label < -1 || label > 1) {
    throw LabelError("label must be in {-1,0,+1}, got " + std::to_string(label));
  }
  return static_cast<std::size_t>(label + 1);
}

inline int index_to_label(std::size_t index) {
  return static_cast<int>(index) - 1;
}

// Max-subtracted softmax over three logits.
inline ProbabilityTriple softmax3(double a, double b, double c) {
  const double m = std::max({a, b, c});
  const double ea = std::exp(a - m), eb = std::exp(b - m), ec = std::exp(c - m);
  const double s = ea + eb + ec;
  return {ea / s, eb / s, ec / s};
}

inline ProbabilityTriple softmax3(const Tensor& logits) {
  if (logits.size() != 3) {
    throw DimensionError("softmax3 expects 3 logits, got shape " +
                         logits.shape_str());
  }
  return softmax3(logits[0], logits[1], logits[2]);
}

inline double cross_entropy(const ProbabilityTriple& pred, int gold) {
  return -std::log(pred.p(label_to_index(gold)));
}

// Trainable tensor with its gradient accumulator and Adam moments.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  std::uint64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor init)
      : name(std::move(n)),
        value(std::move(init)),
        grad(Tensor(value.shape())),
        adam_m(Tensor(value.shape())),
        adam_v(Tensor(value.shape())) {}

  void zero_grad() { grad.fill(0.0); }
};

// One bias-corrected Adam update. Consumes the accumulated gradient and
// zeroes it afterwards.
inline void adam_step(Parameter& p, double lr, double beta1, double beta2,
                      double eps) {
  if (!p.grad.all_finite()) {
    throw NumericError("non-finite gradient in parameter '" + p.name + "' " +
                       p.grad.shape_str());
  }
  p.step_count += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.step_count));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.step_count));
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad[i];
    const double m = beta1 * p.adam_m[i] + (1.0 - beta1) * g;
    const double v = beta2 * p.adam_v[i] + (1.0 - beta2) * g * g;
    p.adam_m[i] = m;
    p.adam_v[i] = v;
    p.value[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
  }
  p.grad.fill(0.0);
}

}  // namespace mttdsc
