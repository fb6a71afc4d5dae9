#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mttdsc/errors.hpp"
#include "mttdsc/gru.hpp"
#include "mttdsc/rng.hpp"
#include "mttdsc/tensor.hpp"

namespace mttdsc {

struct ForwardOptions {
  bool train = false;
  double rec_keep = 1.0;   // 1 - recurrent dropout probability
  double head_keep = 1.0;  // 1 - pre-head dropout probability
  Rng* rng = nullptr;
};

namespace detail {

inline Tensor glorot(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t({r, c});
  const double bound = std::sqrt(6.0 / static_cast<double>(r + c));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace detail

// Fully-connected 3-way head with optional pre-head dropout on its input.
struct HeadTrace {
  std::vector<double> dropped;  // feature vector after dropout scaling
  std::vector<double> mask;     // empty in eval mode
  std::array<double, 3> logits{};
  ProbabilityTriple prob;
};

inline HeadTrace head_forward(const Parameter& w, const Parameter& b,
                              std::span<const double> features,
                              const ForwardOptions& opts) {
  const std::size_t k = w.value.rows();
  if (features.size() != k || w.value.cols() != 3 || b.value.size() != 3) {
    throw DimensionError("head_forward: features length " +
                         std::to_string(features.size()) + " vs head " +
                         w.value.shape_str());
  }
  HeadTrace t;
  t.dropped.assign(features.begin(), features.end());
  if (opts.train && opts.head_keep < 1.0) {
    if (!opts.rng) throw UsageError("head_forward: train mode requires an rng");
    t.mask = DropoutMask::sample(k, opts.head_keep, *opts.rng).scale;
    for (std::size_t i = 0; i < k; ++i) t.dropped[i] *= t.mask[i];
  }
  t.logits = {b.value[0], b.value[1], b.value[2]};
  for (std::size_t i = 0; i < k; ++i) {
    const double f = t.dropped[i];
    if (f == 0.0) continue;
    const double* wrow = w.value.data() + i * 3;
    t.logits[0] += f * wrow[0];
    t.logits[1] += f * wrow[1];
    t.logits[2] += f * wrow[2];
  }
  t.prob = softmax3(t.logits[0], t.logits[1], t.logits[2]);
  return t;
}

// Accumulates head gradients; returns dL/dfeatures.
inline std::vector<double> head_backward(Parameter& w, Parameter& b,
                                         const HeadTrace& trace,
                                         const std::array<double, 3>& dlogits) {
  const std::size_t k = w.value.rows();
  std::vector<double> dfeat(k, 0.0);
  for (std::size_t j = 0; j < 3; ++j) b.grad[j] += dlogits[j];
  for (std::size_t i = 0; i < k; ++i) {
    const double f = trace.dropped[i];
    double* grow = w.grad.data() + i * 3;
    const double* wrow = w.value.data() + i * 3;
    double acc = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      grow[j] += f * dlogits[j];
      acc += wrow[j] * dlogits[j];
    }
    dfeat[i] = trace.mask.empty() ? acc : acc * trace.mask[i];
  }
  return dfeat;
}

// Gradient of cross-entropy(softmax(logits), gold), scaled.
inline std::array<double, 3> ce_softmax_dlogits(const ProbabilityTriple& prob,
                                                int gold, double scale) {
  std::array<double, 3> d = {prob.p_neg, prob.p_neu, prob.p_pos};
  d[label_to_index(gold)] -= 1.0;
  for (double& x : d) x *= scale;
  return d;
}

// ---------------------------------------------------------------------------
// Auxiliary whole-passage model: bidirectional GRUs whose per-position
// concatenations [lr[i-1], rl[i+1]] are averaged into a pooled vector, then a
// 2Dx3 head. Out-of-range offsets contribute the zero initial state.
// ---------------------------------------------------------------------------

struct AuxModel {
  GruParams gru_lr, gru_rl;
  Parameter w_aux, b_aux;

  AuxModel() = default;
  AuxModel(std::size_t e, std::size_t d, Rng& rng)
      : gru_lr(e, d, "aux.lr", rng),
        gru_rl(e, d, "aux.rl", rng),
        w_aux("aux.w", detail::glorot(2 * d, 3, rng)),
        b_aux("aux.b", Tensor({3})) {}

  std::size_t input_dim() const { return gru_lr.input_dim; }
  std::size_t hidden_dim() const { return gru_lr.hidden_dim; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out = gru_lr.parameters();
    auto rl = gru_rl.parameters();
    out.insert(out.end(), rl.begin(), rl.end());
    out.push_back(&w_aux);
    out.push_back(&b_aux);
    return out;
  }
};

struct AuxTrace {
  GruTrace lr, rl;
  std::size_t n = 0;
  HeadTrace head;
};

inline std::pair<ProbabilityTriple, AuxTrace> aux_forward(
    const AuxModel& model, const Tensor& passage, const ForwardOptions& opts) {
  const std::size_t n = passage.ndim() == 2 ? passage.rows() : 0;
  if (n == 0) throw InputError("aux_forward: empty passage");
  const std::size_t d = model.hidden_dim();

  AuxTrace trace;
  trace.n = n;
  auto lr = run_directional(model.gru_lr, passage, Direction::LeftToRight,
                            opts.train, opts.rec_keep, opts.rng);
  auto rl = run_directional(model.gru_rl, passage, Direction::RightToLeft,
                            opts.train, opts.rec_keep, opts.rng);

  // pooled = (1/N) sum_i [lr[i-1], rl[i+1]]; lr[0] and rl[N+1] are zero,
  // so the left half sums positions 1..N-1 and the right half 2..N.
  std::vector<double> pooled(2 * d, 0.0);
  for (std::size_t pos = 1; pos < n; ++pos) {
    auto s = lr.states.row(pos - 1);
    for (std::size_t i = 0; i < d; ++i) pooled[i] += s[i];
  }
  for (std::size_t pos = 2; pos <= n; ++pos) {
    auto s = rl.states.row(pos - 1);
    for (std::size_t i = 0; i < d; ++i) pooled[d + i] += s[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& x : pooled) x *= inv_n;

  trace.lr = std::move(lr.trace);
  trace.rl = std::move(rl.trace);
  trace.head = head_forward(model.w_aux, model.b_aux, pooled, opts);
  return {trace.head.prob, std::move(trace)};
}

inline void aux_backward(AuxModel& model, const AuxTrace& trace, int gold,
                         double scale = 1.0) {
  const std::size_t n = trace.n, d = model.hidden_dim();
  const auto dlogits = ce_softmax_dlogits(trace.head.prob, gold, scale);
  const auto dpooled =
      head_backward(model.w_aux, model.b_aux, trace.head, dlogits);
  const double inv_n = 1.0 / static_cast<double>(n);

  Tensor up_lr({n, d});
  for (std::size_t pos = 1; pos < n; ++pos) {
    auto dst = up_lr.row(pos - 1);
    for (std::size_t i = 0; i < d; ++i) dst[i] = dpooled[i] * inv_n;
  }
  Tensor up_rl({n, d});
  for (std::size_t pos = 2; pos <= n; ++pos) {
    auto dst = up_rl.row(pos - 1);
    for (std::size_t i = 0; i < d; ++i) dst[i] = dpooled[d + i] * inv_n;
  }
  gru_backward(model.gru_lr, trace.lr, up_lr);
  gru_backward(model.gru_rl, trace.rl, up_rl);
}

// ---------------------------------------------------------------------------
// Main target-dependent model. Aux and main GRUs run over the two contexts
// around the target span; their four final states feed a 4Dx3 head. With
// shared GRUs (the naive-MTL ablation) the main runs reuse the aux cells.
// ---------------------------------------------------------------------------

struct GruPair {
  GruParams lr, rl;
};

struct MttdscModel {
  AuxModel aux;
  std::optional<GruPair> main_grus;  // nullopt -> shared with aux
  Parameter w_main, b_main;
  bool aux_pretrained = false;

  bool shared_grus() const { return !main_grus.has_value(); }
  GruParams& main_lr() { return main_grus ? main_grus->lr : aux.gru_lr; }
  GruParams& main_rl() { return main_grus ? main_grus->rl : aux.gru_rl; }
  const GruParams& main_lr() const {
    return main_grus ? main_grus->lr : aux.gru_lr;
  }
  const GruParams& main_rl() const {
    return main_grus ? main_grus->rl : aux.gru_rl;
  }

  std::size_t input_dim() const { return aux.input_dim(); }
  std::size_t hidden_dim() const { return aux.hidden_dim(); }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out = aux.parameters();
    if (main_grus) {
      for (Parameter* p : main_grus->lr.parameters()) out.push_back(p);
      for (Parameter* p : main_grus->rl.parameters()) out.push_back(p);
    }
    out.push_back(&w_main);
    out.push_back(&b_main);
    return out;
  }

  // Parameters reached by the main-task loss: everything except the aux head.
  std::vector<Parameter*> main_graph_parameters() {
    std::vector<Parameter*> out = gru_lr_list();
    out.push_back(&w_main);
    out.push_back(&b_main);
    return out;
  }

 private:
  std::vector<Parameter*> gru_lr_list() {
    std::vector<Parameter*> out = aux.gru_lr.parameters();
    auto add = [&](GruParams& g) {
      for (Parameter* p : g.parameters()) out.push_back(p);
    };
    add(aux.gru_rl);
    if (main_grus) {
      add(main_grus->lr);
      add(main_grus->rl);
    }
    return out;
  }
};

inline MttdscModel make_mttdsc(std::size_t e, std::size_t d, bool shared_grus,
                               Rng& rng) {
  MttdscModel m;
  m.aux = AuxModel(e, d, rng);
  if (!shared_grus) {
    m.main_grus.emplace();
    m.main_grus->lr = GruParams(e, d, "main.lr", rng);
    m.main_grus->rl = GruParams(e, d, "main.rl", rng);
  }
  m.w_main = Parameter("main.w", detail::glorot(4 * d, 3, rng));
  m.b_main = Parameter("main.b", Tensor({3}));
  return m;
}

struct MainTrace {
  GruTrace aux_lr, main_lr, aux_rl, main_rl;
  std::size_t left_len = 0, right_len = 0;
  HeadTrace head;
};

namespace detail {

inline Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  const std::size_t cols = t.cols();
  Tensor out({end - begin, cols});
  for (std::size_t r = begin; r < end; ++r) {
    auto src = t.row(r);
    auto dst = out.row(r - begin);
    for (std::size_t c = 0; c < cols; ++c) dst[c] = src[c];
  }
  return out;
}

inline void check_span(std::size_t n, std::size_t target_start,
                       std::size_t target_end) {
  if (target_start < 1 || target_start > target_end || target_end > n) {
    throw InputError("target span [" + std::to_string(target_start) + "," +
                     std::to_string(target_end) + "] out of range for " +
                     std::to_string(n) + " tokens");
  }
}

// Upstream tensor that feeds gradient only into the run's final state.
inline Tensor final_state_upstream(const GruTrace& trace,
                                   std::span<const double> dfinal,
                                   Direction dir) {
  const std::size_t n = trace.seq_len, d = dfinal.size();
  Tensor up({n, d});
  if (n == 0) return up;
  const std::size_t pos = dir == Direction::LeftToRight ? n - 1 : 0;
  auto dst = up.row(pos);
  for (std::size_t i = 0; i < d; ++i) dst[i] = dfinal[i];
  return up;
}

}  // namespace detail

// Contexts exclude the target span entirely: LR runs over 1..start-1 and RL
// over end+1..N, so the prediction cannot depend on the target's identity.
inline std::pair<ProbabilityTriple, MainTrace> main_forward(
    const MttdscModel& model, const Tensor& tokens, std::size_t target_start,
    std::size_t target_end, const ForwardOptions& opts) {
  const std::size_t n = tokens.rows();
  detail::check_span(n, target_start, target_end);
  const std::size_t d = model.hidden_dim();

  const Tensor left = detail::slice_rows(tokens, 0, target_start - 1);
  const Tensor right = detail::slice_rows(tokens, target_end, n);

  MainTrace trace;
  trace.left_len = left.rows();
  trace.right_len = right.rows();

  auto aux_lr = run_directional(model.aux.gru_lr, left, Direction::LeftToRight,
                                opts.train, opts.rec_keep, opts.rng);
  auto main_lr = run_directional(model.main_lr(), left, Direction::LeftToRight,
                                 opts.train, opts.rec_keep, opts.rng);
  auto aux_rl = run_directional(model.aux.gru_rl, right,
                                Direction::RightToLeft, opts.train,
                                opts.rec_keep, opts.rng);
  auto main_rl = run_directional(model.main_rl(), right,
                                 Direction::RightToLeft, opts.train,
                                 opts.rec_keep, opts.rng);

  std::vector<double> feat;
  feat.reserve(4 * d);
  feat.insert(feat.end(), aux_lr.final_state.begin(), aux_lr.final_state.end());
  feat.insert(feat.end(), main_lr.final_state.begin(),
              main_lr.final_state.end());
  feat.insert(feat.end(), aux_rl.final_state.begin(), aux_rl.final_state.end());
  feat.insert(feat.end(), main_rl.final_state.begin(),
              main_rl.final_state.end());

  trace.aux_lr = std::move(aux_lr.trace);
  trace.main_lr = std::move(main_lr.trace);
  trace.aux_rl = std::move(aux_rl.trace);
  trace.main_rl = std::move(main_rl.trace);
  trace.head = head_forward(model.w_main, model.b_main, feat, opts);
  return {trace.head.prob, std::move(trace)};
}

inline std::pair<ProbabilityTriple, MainTrace> main_forward(
    const MttdscModel& model, const Tensor& tokens, std::size_t target_pos,
    const ForwardOptions& opts) {
  return main_forward(model, tokens, target_pos, target_pos, opts);
}

// Main-task gradients reach the main head, the main GRUs, and the aux GRUs
// (never the aux head). With shared GRUs the aux and main context runs
// accumulate into the same cells.
inline void main_backward(MttdscModel& model, const MainTrace& trace, int gold,
                          double scale = 1.0) {
  const std::size_t d = model.hidden_dim();
  const auto dlogits = ce_softmax_dlogits(trace.head.prob, gold, scale);
  const auto dfeat =
      head_backward(model.w_main, model.b_main, trace.head, dlogits);
  std::span<const double> df(dfeat);

  gru_backward(model.aux.gru_lr, trace.aux_lr,
               detail::final_state_upstream(trace.aux_lr, df.subspan(0, d),
                                            Direction::LeftToRight));
  gru_backward(model.main_lr(), trace.main_lr,
               detail::final_state_upstream(trace.main_lr, df.subspan(d, d),
                                            Direction::LeftToRight));
  gru_backward(model.aux.gru_rl, trace.aux_rl,
               detail::final_state_upstream(trace.aux_rl, df.subspan(2 * d, d),
                                            Direction::RightToLeft));
  gru_backward(model.main_rl(), trace.main_rl,
               detail::final_state_upstream(trace.main_rl, df.subspan(3 * d, d),
                                            Direction::RightToLeft));
}

// ---------------------------------------------------------------------------
// Target-dependent bidirectional GRU baseline: LR over 1..target_end, RL over
// target_start..N (the target is consumed by both runs), 2Dx3 head.
// ---------------------------------------------------------------------------

struct TdgruModel {
  GruParams gru_lr, gru_rl;
  Parameter w_td, b_td;

  TdgruModel() = default;
  TdgruModel(std::size_t e, std::size_t d, Rng& rng)
      : gru_lr(e, d, "td.lr", rng),
        gru_rl(e, d, "td.rl", rng),
        w_td("td.w", detail::glorot(2 * d, 3, rng)),
        b_td("td.b", Tensor({3})) {}

  std::size_t input_dim() const { return gru_lr.input_dim; }
  std::size_t hidden_dim() const { return gru_lr.hidden_dim; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out = gru_lr.parameters();
    auto rl = gru_rl.parameters();
    out.insert(out.end(), rl.begin(), rl.end());
    out.push_back(&w_td);
    out.push_back(&b_td);
    return out;
  }
};

struct TdgruTrace {
  GruTrace lr, rl;
  HeadTrace head;
};

inline std::pair<ProbabilityTriple, TdgruTrace> tdgru_forward(
    const TdgruModel& model, const Tensor& tokens, std::size_t target_start,
    std::size_t target_end, const ForwardOptions& opts) {
  const std::size_t n = tokens.rows();
  detail::check_span(n, target_start, target_end);
  const std::size_t d = model.hidden_dim();

  const Tensor left = detail::slice_rows(tokens, 0, target_end);
  const Tensor right = detail::slice_rows(tokens, target_start - 1, n);

  TdgruTrace trace;
  auto lr = run_directional(model.gru_lr, left, Direction::LeftToRight,
                            opts.train, opts.rec_keep, opts.rng);
  auto rl = run_directional(model.gru_rl, right, Direction::RightToLeft,
                            opts.train, opts.rec_keep, opts.rng);

  std::vector<double> feat;
  feat.reserve(2 * d);
  feat.insert(feat.end(), lr.final_state.begin(), lr.final_state.end());
  feat.insert(feat.end(), rl.final_state.begin(), rl.final_state.end());

  trace.lr = std::move(lr.trace);
  trace.rl = std::move(rl.trace);
  trace.head = head_forward(model.w_td, model.b_td, feat, opts);
  return {trace.head.prob, std::move(trace)};
}

inline std::pair<ProbabilityTriple, TdgruTrace> tdgru_forward(
    const TdgruModel& model, const Tensor& tokens, std::size_t target_pos,
    const ForwardOptions& opts) {
  return tdgru_forward(model, tokens, target_pos, target_pos, opts);
}

inline void tdgru_backward(TdgruModel& model, const TdgruTrace& trace, int gold,
                           double scale = 1.0) {
  const std::size_t d = model.hidden_dim();
  const auto dlogits = ce_softmax_dlogits(trace.head.prob, gold, scale);
  const auto dfeat = head_backward(model.w_td, model.b_td, trace.head, dlogits);
  std::span<const double> df(dfeat);

  gru_backward(model.gru_lr, trace.lr,
               detail::final_state_upstream(trace.lr, df.subspan(0, d),
                                            Direction::LeftToRight));
  gru_backward(model.gru_rl, trace.rl,
               detail::final_state_upstream(trace.rl, df.subspan(d, d),
                                            Direction::RightToLeft));
}

// Fine-tuning variant: GRU weights copied from a trained auxiliary model,
// optimizer state reset, fresh head.
inline TdgruModel tdft_init(const AuxModel& aux, Rng& rng,
                            std::size_t expected_hidden = 0) {
  if (expected_hidden != 0 && expected_hidden != aux.hidden_dim()) {
    throw ConfigError("tdft_init: auxiliary model hidden size " +
                      std::to_string(aux.hidden_dim()) +
                      " does not match configured " +
                      std::to_string(expected_hidden));
  }
  TdgruModel m(aux.input_dim(), aux.hidden_dim(), rng);
  auto copy_weights = [](const GruParams& src, GruParams& dst) {
    auto sp = src.parameters();
    auto dp = dst.parameters();
    for (std::size_t i = 0; i < sp.size(); ++i) {
      dp[i]->value = sp[i]->value;
      dp[i]->grad.fill(0.0);
      dp[i]->adam_m.fill(0.0);
      dp[i]->adam_v.fill(0.0);
      dp[i]->step_count = 0;
    }
  };
  copy_weights(aux.gru_lr, m.gru_lr);
  copy_weights(aux.gru_rl, m.gru_rl);
  return m;
}

// ---------------------------------------------------------------------------
// Variant bundle
// ---------------------------------------------------------------------------

enum class Variant { Aux, Tdgru, Tdft, NaiveMtl, Mttdsc };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Aux: return "aux";
    case Variant::Tdgru: return "tdgru";
    case Variant::Tdft: return "tdft";
    case Variant::NaiveMtl: return "naive-mtl";
    case Variant::Mttdsc: return "mttdsc";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "aux") return Variant::Aux;
  if (s == "tdgru") return Variant::Tdgru;
  if (s == "tdft") return Variant::Tdft;
  if (s == "naive-mtl") return Variant::NaiveMtl;
  if (s == "mttdsc") return Variant::Mttdsc;
  throw ConfigError("unknown variant '" + s +
                    "' (expected aux|tdgru|tdft|naive-mtl|mttdsc)");
}

// All trainable tensors for one variant plus its head matrices.
struct ModelBundle {
  Variant variant = Variant::Tdgru;
  std::variant<AuxModel, TdgruModel, MttdscModel> model;

  AuxModel& as_aux() { return std::get<AuxModel>(model); }
  TdgruModel& as_tdgru() { return std::get<TdgruModel>(model); }
  MttdscModel& as_mttdsc() { return std::get<MttdscModel>(model); }
  const AuxModel& as_aux() const { return std::get<AuxModel>(model); }
  const TdgruModel& as_tdgru() const { return std::get<TdgruModel>(model); }
  const MttdscModel& as_mttdsc() const { return std::get<MttdscModel>(model); }

  bool targeted() const { return variant != Variant::Aux; }

  std::vector<Parameter*> parameters() {
    return std::visit([](auto& m) { return m.parameters(); }, model);
  }

  std::size_t input_dim() const {
    return std::visit([](const auto& m) { return m.input_dim(); }, model);
  }
  std::size_t hidden_dim() const {
    return std::visit([](const auto& m) { return m.hidden_dim(); }, model);
  }
};

// Scalar entries over distinct Parameter objects; aliased tensors count once.
inline std::size_t count_parameters(ModelBundle& bundle) {
  std::set<const Parameter*> seen;
  std::size_t total = 0;
  for (Parameter* p : bundle.parameters()) {
    if (seen.insert(p).second) total += p->value.size();
  }
  return total;
}

inline std::size_t count_parameters(GruParams& gru) {
  std::size_t total = 0;
  for (Parameter* p : gru.parameters()) total += p->value.size();
  return total;
}

}  // namespace mttdsc
