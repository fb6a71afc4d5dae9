#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mttdsc/errors.hpp"
#include "mttdsc/rng.hpp"
#include "mttdsc/tensor.hpp"

namespace mttdsc {

enum class Direction { LeftToRight, RightToLeft };

// Variational recurrent dropout: one mask per sequence, applied to the
// previous hidden state entering all three gates. Inverted scaling, so eval
// needs no rescale.
struct DropoutMask {
  std::vector<double> scale;  // each entry 0 or 1/p_keep
  double p_keep = 1.0;

  static DropoutMask sample(std::size_t dim, double p_keep, Rng& rng) {
    DropoutMask m;
    m.p_keep = p_keep;
    m.scale.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      m.scale[i] = rng.bernoulli(p_keep) ? 1.0 / p_keep : 0.0;
    }
    return m;
  }
};

// The nine weight/bias tensors of one GRU direction.
//
//   z = sigmoid(x W_z + h~ U_z + b_z)
//   r = sigmoid(x W_r + h~ U_r + b_r)
//   c = tanh(x W_h + (r . h~) U_h + b_h)
//   h = (1 - z) . h_prev + z . c
//
// where h~ is the mask-scaled previous state during training and h_prev
// itself otherwise. Reset is applied before the candidate's recurrent term.
struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter w_z, u_z, b_z;
  Parameter w_r, u_r, b_r;
  Parameter w_h, u_h, b_h;

  GruParams() = default;

  // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
  GruParams(std::size_t e, std::size_t d, const std::string& prefix, Rng& rng)
      : input_dim(e), hidden_dim(d) {
    auto init_mat = [&](std::size_t r, std::size_t c) {
      Tensor t({r, c});
      const double bound = std::sqrt(6.0 / static_cast<double>(r + c));
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] = rng.uniform(-bound, bound);
      }
      return t;
    };
    w_z = Parameter(prefix + ".w_z", init_mat(e, d));
    u_z = Parameter(prefix + ".u_z", init_mat(d, d));
    b_z = Parameter(prefix + ".b_z", Tensor({d}));
    w_r = Parameter(prefix + ".w_r", init_mat(e, d));
    u_r = Parameter(prefix + ".u_r", init_mat(d, d));
    b_r = Parameter(prefix + ".b_r", Tensor({d}));
    w_h = Parameter(prefix + ".w_h", init_mat(e, d));
    u_h = Parameter(prefix + ".u_h", init_mat(d, d));
    b_h = Parameter(prefix + ".b_h", Tensor({d}));
  }

  std::vector<Parameter*> parameters() {
    return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_h, &u_h, &b_h};
  }
  std::vector<const Parameter*> parameters() const {
    return {&w_z, &u_z, &b_z, &w_r, &u_r, &b_r, &w_h, &u_h, &b_h};
  }

  void zero_grads() {
    for (Parameter* p : parameters()) p->zero_grad();
  }
};

// Cached activations of one cell step, enough for exact backprop.
struct GruStepTrace {
  std::vector<double> x;        // input row, length E
  std::vector<double> h_prev;   // unmasked previous state
  std::vector<double> h_tilde;  // masked previous state (== h_prev in eval)
  std::vector<double> z, r, c;  // gate / candidate activations
};

struct GruTrace {
  Direction direction = Direction::LeftToRight;
  std::size_t seq_len = 0;
  std::vector<double> mask;  // empty when dropout is off
  std::vector<GruStepTrace> steps;  // consumption order
};

namespace detail {

// out += x (1xN) . W (NxM)
inline void add_vec_mat(std::span<const double> x, const Tensor& w,
                        std::span<double> out) {
  const std::size_t n = w.rows(), m = w.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* wrow = w.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) out[j] += xi * wrow[j];
  }
}

// out += g (1xM) . W^T, i.e. out[i] += dot(W row i, g)
inline void add_vec_matT(std::span<const double> g, const Tensor& w,
                         std::span<double> out) {
  const std::size_t n = w.rows(), m = w.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double* wrow = w.data() + i * m;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += wrow[j] * g[j];
    out[i] += acc;
  }
}

// grad += outer(x, g)
inline void add_outer(std::span<const double> x, std::span<const double> g,
                      Tensor& grad) {
  const std::size_t n = grad.rows(), m = grad.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    double* grow = grad.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) grow[j] += xi * g[j];
  }
}

}  // namespace detail

// One GRU step. Returns h_t and appends the step trace.
inline std::vector<double> gru_cell_forward(const GruParams& p,
                                            std::span<const double> x_t,
                                            std::span<const double> h_prev,
                                            std::span<const double> rec_mask,
                                            GruTrace* trace = nullptr) {
  const std::size_t e = p.input_dim, d = p.hidden_dim;
  if (x_t.size() != e || h_prev.size() != d) {
    throw DimensionError("gru_cell_forward: input length " +
                         std::to_string(x_t.size()) + " / state length " +
                         std::to_string(h_prev.size()) + " vs cell (E=" +
                         std::to_string(e) + ", D=" + std::to_string(d) + ")");
  }
  std::vector<double> h_tilde(h_prev.begin(), h_prev.end());
  if (!rec_mask.empty()) {
    for (std::size_t i = 0; i < d; ++i) h_tilde[i] *= rec_mask[i];
  }

  std::vector<double> z(p.b_z.value.values());
  std::vector<double> r(p.b_r.value.values());
  std::vector<double> c(p.b_h.value.values());
  detail::add_vec_mat(x_t, p.w_z.value, z);
  detail::add_vec_mat(h_tilde, p.u_z.value, z);
  detail::add_vec_mat(x_t, p.w_r.value, r);
  detail::add_vec_mat(h_tilde, p.u_r.value, r);
  for (std::size_t i = 0; i < d; ++i) {
    z[i] = sigmoid(z[i]);
    r[i] = sigmoid(r[i]);
  }

  std::vector<double> rh(d);
  for (std::size_t i = 0; i < d; ++i) rh[i] = r[i] * h_tilde[i];
  detail::add_vec_mat(x_t, p.w_h.value, c);
  detail::add_vec_mat(rh, p.u_h.value, c);
  for (std::size_t i = 0; i < d; ++i) c[i] = std::tanh(c[i]);

  std::vector<double> h_t(d);
  for (std::size_t i = 0; i < d; ++i) {
    h_t[i] = (1.0 - z[i]) * h_prev[i] + z[i] * c[i];
  }

  if (trace) {
    GruStepTrace st;
    st.x.assign(x_t.begin(), x_t.end());
    st.h_prev.assign(h_prev.begin(), h_prev.end());
    st.h_tilde = std::move(h_tilde);
    st.z = z;
    st.r = r;
    st.c = c;
    trace->steps.push_back(std::move(st));
  }
  return h_t;
}

struct DirectionalRun {
  Tensor states;                   // N x D, states[i] aligned to position i+1
  std::vector<double> final_state; // zero vector when N = 0
  GruTrace trace;
};

// Runs one direction over an N x E input. h_0 is the zero vector. States are
// returned position-aligned: for RL, states.row(i) is the state after
// consuming positions N..i+1, so an RL run equals an LR run on the reversed
// sequence with the state list mirrored.
inline DirectionalRun run_directional(const GruParams& p, const Tensor& inputs,
                                      Direction direction, bool train_mode,
                                      double rec_keep_prob, Rng* rng) {
  const std::size_t n = inputs.ndim() == 2 ? inputs.rows() : 0;
  const std::size_t d = p.hidden_dim;
  DirectionalRun run;
  run.trace.direction = direction;
  run.trace.seq_len = n;
  run.states = Tensor({n, d});
  run.final_state.assign(d, 0.0);
  if (train_mode && rec_keep_prob < 1.0) {
    if (!rng) throw UsageError("run_directional: train mode requires an rng");
    run.trace.mask = DropoutMask::sample(d, rec_keep_prob, *rng).scale;
  }
  std::span<const double> mask(run.trace.mask);

  std::vector<double> h(d, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t pos =
        direction == Direction::LeftToRight ? t : n - 1 - t;
    h = gru_cell_forward(p, inputs.row(pos), h, mask, &run.trace);
    auto dst = run.states.row(pos);
    for (std::size_t i = 0; i < d; ++i) dst[i] = h[i];
  }
  run.final_state = std::move(h);
  return run;
}

// Exact backprop through time for one directional run. `upstream` holds
// dL/dstate for each position (N x D, aligned like DirectionalRun::states).
// Parameter gradients accumulate into p; returns dL/dinput (N x E).
inline Tensor gru_backward(GruParams& p, const GruTrace& trace,
                           const Tensor& upstream) {
  const std::size_t n = trace.seq_len, d = p.hidden_dim, e = p.input_dim;
  if (trace.steps.size() != n) {
    throw UsageError("gru_backward: trace does not match its forward run");
  }
  if (upstream.ndim() != 2 || upstream.rows() != n ||
      (n > 0 && upstream.cols() != d)) {
    throw DimensionError("gru_backward: upstream shape " +
                         upstream.shape_str() + " vs expected (" +
                         std::to_string(n) + "x" + std::to_string(d) + ")");
  }
  Tensor input_grads({n, e});
  std::span<const double> mask(trace.mask);

  std::vector<double> dh(d, 0.0);  // dL/dh_t carried backwards
  std::vector<double> da_z(d), da_r(d), da_c(d), dh_tilde(d), drh(d);
  for (std::size_t t = n; t-- > 0;) {
    const std::size_t pos =
        trace.direction == Direction::LeftToRight ? t : n - 1 - t;
    const GruStepTrace& st = trace.steps[t];
    auto up = upstream.row(pos);
    for (std::size_t i = 0; i < d; ++i) dh[i] += up[i];

    // h = (1-z) . h_prev + z . c
    std::fill(dh_tilde.begin(), dh_tilde.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double dz = dh[i] * (st.c[i] - st.h_prev[i]);
      da_z[i] = dz * st.z[i] * (1.0 - st.z[i]);
      da_c[i] = dh[i] * st.z[i] * (1.0 - st.c[i] * st.c[i]);
    }
    // candidate: c = tanh(x W_h + (r . h~) U_h + b_h)
    std::fill(drh.begin(), drh.end(), 0.0);
    detail::add_vec_matT(da_c, p.u_h.value, drh);
    for (std::size_t i = 0; i < d; ++i) {
      const double dr = drh[i] * st.h_tilde[i];
      da_r[i] = dr * st.r[i] * (1.0 - st.r[i]);
      dh_tilde[i] += drh[i] * st.r[i];
    }
    detail::add_vec_matT(da_z, p.u_z.value, dh_tilde);
    detail::add_vec_matT(da_r, p.u_r.value, dh_tilde);

    std::vector<double> rh(d);
    for (std::size_t i = 0; i < d; ++i) rh[i] = st.r[i] * st.h_tilde[i];
    detail::add_outer(st.x, da_z, p.w_z.grad);
    detail::add_outer(st.h_tilde, da_z, p.u_z.grad);
    detail::add_outer(st.x, da_r, p.w_r.grad);
    detail::add_outer(st.h_tilde, da_r, p.u_r.grad);
    detail::add_outer(st.x, da_c, p.w_h.grad);
    detail::add_outer(rh, da_c, p.u_h.grad);
    for (std::size_t i = 0; i < d; ++i) {
      p.b_z.grad[i] += da_z[i];
      p.b_r.grad[i] += da_r[i];
      p.b_h.grad[i] += da_c[i];
    }

    auto dx = input_grads.row(pos);
    detail::add_vec_matT(da_z, p.w_z.value, dx);
    detail::add_vec_matT(da_r, p.w_r.value, dx);
    detail::add_vec_matT(da_c, p.w_h.value, dx);

    // carry into h_{t-1}: direct (1-z) path plus the masked h~ paths
    for (std::size_t i = 0; i < d; ++i) {
      const double m = mask.empty() ? 1.0 : mask[i];
      dh[i] = dh[i] * (1.0 - st.z[i]) + dh_tilde[i] * m;
    }
  }
  return input_grads;
}

}  // namespace mttdsc
