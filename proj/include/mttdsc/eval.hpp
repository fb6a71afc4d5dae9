#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mttdsc/datasets.hpp"
#include "mttdsc/embeddings.hpp"
#include "mttdsc/errors.hpp"
#include "mttdsc/models.hpp"
#include "mttdsc/tensor.hpp"

namespace mttdsc {

// Fixed tie-break: neutral, then negative, then positive.
inline int argmax_label(const ProbabilityTriple& p) {
  if (p.p_neu >= p.p_neg && p.p_neu >= p.p_pos) return 0;
  if (p.p_neg >= p.p_pos) return -1;
  return 1;
}

struct EvalPair {
  int gold = 0;
  int pred_label = 0;
  ProbabilityTriple pred_dist;
};

inline EvalPair make_eval_pair(int gold, const ProbabilityTriple& dist) {
  return {gold, argmax_label(dist), dist};
}

// Expected-value reading of a distribution: sum_k k * p_k in [-1, 1].
inline double expected_label(const ProbabilityTriple& p) {
  return p.p_pos - p.p_neg;
}

inline double accuracy(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw InputError("accuracy: no pairs");
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += p.gold == p.pred_label;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

namespace detail {

// counts[gold+1][pred+1]
inline std::array<std::array<std::size_t, 3>, 3> confusion(
    std::span<const EvalPair> pairs) {
  std::array<std::array<std::size_t, 3>, 3> c{};
  for (const auto& p : pairs) {
    c[static_cast<std::size_t>(p.gold + 1)]
     [static_cast<std::size_t>(p.pred_label + 1)] += 1;
  }
  return c;
}

inline double safe_div(double num, double den) {
  return den == 0.0 ? 0.0 : num / den;
}

struct Prf {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

inline Prf prf_from_confusion(const std::array<std::array<std::size_t, 3>, 3>& c,
                              std::size_t k) {
  double tp = static_cast<double>(c[k][k]);
  double gold_total = 0.0, pred_total = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    gold_total += static_cast<double>(c[k][j]);
    pred_total += static_cast<double>(c[j][k]);
  }
  Prf out;
  out.precision = safe_div(tp, pred_total);
  out.recall = safe_div(tp, gold_total);
  out.f1 = safe_div(2.0 * out.precision * out.recall,
                    out.precision + out.recall);
  return out;
}

}  // namespace detail

// Standard confusion-matrix precision/recall/F1; 0/0 reported as 0.
inline std::array<double, 3> class_prf(std::span<const EvalPair> pairs,
                                       int cls) {
  if (pairs.empty()) throw InputError("class_prf: no pairs");
  const auto c = detail::confusion(pairs);
  const auto prf = detail::prf_from_confusion(c, label_to_index(cls));
  return {prf.precision, prf.recall, prf.f1};
}

// Unweighted mean over the three classes.
inline std::array<double, 3> macro_prf(std::span<const EvalPair> pairs) {
  if (pairs.empty()) throw InputError("macro_prf: no pairs");
  const auto c = detail::confusion(pairs);
  std::array<double, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) {
    const auto prf = detail::prf_from_confusion(c, k);
    out[0] += prf.precision / 3.0;
    out[1] += prf.recall / 3.0;
    out[2] += prf.f1 / 3.0;
  }
  return out;
}

// Macro F1 over {-1,+1} on the polar-gold subset, keeping the 3-way
// predictions (a neutral prediction misses both polar classes). Absent when
// the subset is empty.
inline std::optional<double> two_class_f1(std::span<const EvalPair> pairs) {
  std::vector<EvalPair> subset;
  for (const auto& p : pairs) {
    if (p.gold != 0) subset.push_back(p);
  }
  if (subset.empty()) return std::nullopt;
  const auto c = detail::confusion(subset);
  const auto neg = detail::prf_from_confusion(c, 0);
  const auto pos = detail::prf_from_confusion(c, 2);
  return (neg.f1 + pos.f1) / 2.0;
}

inline double mae(std::span<const EvalPair> pairs,
                  bool use_expected_value = false) {
  if (pairs.empty()) throw InputError("mae: no pairs");
  double total = 0.0;
  for (const auto& p : pairs) {
    const double pred = use_expected_value
                            ? expected_label(p.pred_dist)
                            : static_cast<double>(p.pred_label);
    total += std::abs(static_cast<double>(p.gold) - pred);
  }
  return total / static_cast<double>(pairs.size());
}

// Pair inversion rate over unordered pairs: fraction with
// (y_i - y_j)(yhat_i - yhat_j) < 0. Ties on either side are not inversions.
inline double pir(std::span<const EvalPair> pairs,
                  bool use_expected_value = false) {
  if (pairs.size() < 2) throw InputError("pir: needs at least 2 pairs");
  const double n = static_cast<double>(pairs.size());
  const double total_pairs = n * (n - 1.0) / 2.0;
  if (use_expected_value) {
    std::size_t inversions = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      for (std::size_t j = i + 1; j < pairs.size(); ++j) {
        const double dg = static_cast<double>(pairs[i].gold - pairs[j].gold);
        const double dp = expected_label(pairs[i].pred_dist) -
                          expected_label(pairs[j].pred_dist);
        inversions += dg * dp < 0.0;
      }
    }
    return static_cast<double>(inversions) / total_pairs;
  }
  // Count via the 3x3 (gold, pred) cell counts rather than an O(I^2) scan.
  const auto c = detail::confusion(pairs);
  double inversions = 0.0;
  for (int g1 = 0; g1 < 3; ++g1) {
    for (int p1 = 0; p1 < 3; ++p1) {
      for (int g2 = 0; g2 < 3; ++g2) {
        for (int p2 = 0; p2 < 3; ++p2) {
          if ((g1 - g2) * (p1 - p2) < 0) {
            inversions += static_cast<double>(c[g1][p1]) *
                          static_cast<double>(c[g2][p2]);
          }
        }
      }
    }
  }
  return (inversions / 2.0) / total_pairs;
}

struct ClassReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;

  friend bool operator==(const ClassReport&, const ClassReport&) = default;
};

struct EvaluationReport {
  std::size_t count = 0;
  double accuracy = 0.0;
  std::array<ClassReport, 3> per_class;  // negative, neutral, positive
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> two_class_f1;
  double mae = 0.0;
  std::optional<double> pir;  // absent for single-instance sets

  friend bool operator==(const EvaluationReport&,
                         const EvaluationReport&) = default;
};

inline EvaluationReport build_report(std::span<const EvalPair> pairs,
                                     bool use_expected_value = false) {
  if (pairs.empty()) throw InputError("build_report: no pairs");
  EvaluationReport r;
  r.count = pairs.size();
  r.accuracy = accuracy(pairs);
  const auto c = detail::confusion(pairs);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto prf = detail::prf_from_confusion(c, k);
    r.per_class[k].precision = prf.precision;
    r.per_class[k].recall = prf.recall;
    r.per_class[k].f1 = prf.f1;
    r.per_class[k].support = c[k][0] + c[k][1] + c[k][2];
    r.macro_precision += prf.precision / 3.0;
    r.macro_recall += prf.recall / 3.0;
    r.macro_f1 += prf.f1 / 3.0;
  }
  r.two_class_f1 = two_class_f1(pairs);
  r.mae = mae(pairs, use_expected_value);
  if (pairs.size() >= 2) r.pir = pir(pairs, use_expected_value);
  return r;
}

// ---------------------------------------------------------------------------
// Model-driven evaluation (eval mode, deterministic)
// ---------------------------------------------------------------------------

template <class Predict, class Instance>
EvaluationReport evaluate_with(Predict&& predict,
                               const std::vector<Instance>& data,
                               bool use_expected_value = false) {
  if (data.empty()) throw InputError("evaluate: empty dataset");
  std::vector<EvalPair> pairs;
  pairs.reserve(data.size());
  for (const auto& inst : data) {
    pairs.push_back(make_eval_pair(inst.label, predict(inst)));
  }
  return build_report(pairs, use_expected_value);
}

inline ProbabilityTriple predict_tdsc(const ModelBundle& bundle,
                                      const EmbeddingTable& table,
                                      const TargetedInstance& inst) {
  const Tensor tokens = embed_sequence(table, inst.tokens);
  const ForwardOptions opts;  // eval mode
  switch (bundle.variant) {
    case Variant::Tdgru:
    case Variant::Tdft:
      return tdgru_forward(bundle.as_tdgru(), tokens, inst.target_start,
                           inst.target_end, opts)
          .first;
    case Variant::NaiveMtl:
    case Variant::Mttdsc:
      return main_forward(bundle.as_mttdsc(), tokens, inst.target_start,
                          inst.target_end, opts)
          .first;
    case Variant::Aux:
      break;
  }
  throw UsageError("cannot run a whole-passage model on targeted data");
}

inline ProbabilityTriple predict_sc(const ModelBundle& bundle,
                                    const EmbeddingTable& table,
                                    const ScInstance& inst) {
  if (bundle.variant != Variant::Aux) {
    throw UsageError("cannot run a targeted model on whole-passage data");
  }
  const Tensor tokens = embed_sequence(table, inst.tokens);
  return aux_forward(bundle.as_aux(), tokens, ForwardOptions{}).first;
}

// Arithmetic mean of member distributions. Members must share one variant.
inline ProbabilityTriple average_distributions(
    const std::vector<ProbabilityTriple>& dists) {
  if (dists.empty()) throw UsageError("ensemble has no members");
  ProbabilityTriple mean;
  for (const auto& d : dists) {
    mean.p_neg += d.p_neg;
    mean.p_neu += d.p_neu;
    mean.p_pos += d.p_pos;
  }
  const double inv = 1.0 / static_cast<double>(dists.size());
  mean.p_neg *= inv;
  mean.p_neu *= inv;
  mean.p_pos *= inv;
  return mean;
}

inline void check_same_variant(const std::vector<ModelBundle>& members) {
  if (members.empty()) throw UsageError("ensemble has no members");
  for (const auto& m : members) {
    if (m.variant != members[0].variant) {
      throw UsageError("ensemble mixes variants: " +
                       std::string(variant_name(members[0].variant)) + " and " +
                       std::string(variant_name(m.variant)));
    }
  }
}

inline ProbabilityTriple ensemble_predict(const std::vector<ModelBundle>& members,
                                          const EmbeddingTable& table,
                                          const TargetedInstance& inst) {
  check_same_variant(members);
  std::vector<ProbabilityTriple> dists;
  dists.reserve(members.size());
  for (const auto& m : members) dists.push_back(predict_tdsc(m, table, inst));
  return average_distributions(dists);
}

inline ProbabilityTriple ensemble_predict(const std::vector<ModelBundle>& members,
                                          const EmbeddingTable& table,
                                          const ScInstance& inst) {
  check_same_variant(members);
  std::vector<ProbabilityTriple> dists;
  dists.reserve(members.size());
  for (const auto& m : members) dists.push_back(predict_sc(m, table, inst));
  return average_distributions(dists);
}

inline EvaluationReport evaluate_tdsc(const std::vector<ModelBundle>& members,
                                      const EmbeddingTable& table,
                                      const std::vector<TargetedInstance>& data,
                                      bool use_expected_value = false) {
  if (data.empty()) throw InputError("evaluate: empty dataset");
  std::vector<EvalPair> pairs;
  pairs.reserve(data.size());
  for (const auto& inst : data) {
    pairs.push_back(
        make_eval_pair(inst.label, ensemble_predict(members, table, inst)));
  }
  return build_report(pairs, use_expected_value);
}

inline EvaluationReport evaluate_sc(const std::vector<ModelBundle>& members,
                                    const EmbeddingTable& table,
                                    const std::vector<ScInstance>& data,
                                    bool use_expected_value = false) {
  if (data.empty()) throw InputError("evaluate: empty dataset");
  std::vector<EvalPair> pairs;
  pairs.reserve(data.size());
  for (const auto& inst : data) {
    pairs.push_back(
        make_eval_pair(inst.label, ensemble_predict(members, table, inst)));
  }
  return build_report(pairs, use_expected_value);
}

inline EvaluationReport evaluate_tdsc(const ModelBundle& bundle,
                                      const EmbeddingTable& table,
                                      const std::vector<TargetedInstance>& data,
                                      bool use_expected_value = false) {
  if (data.empty()) throw InputError("evaluate: empty dataset");
  std::vector<EvalPair> pairs;
  pairs.reserve(data.size());
  for (const auto& inst : data) {
    pairs.push_back(
        make_eval_pair(inst.label, predict_tdsc(bundle, table, inst)));
  }
  return build_report(pairs, use_expected_value);
}

inline EvaluationReport evaluate_sc(const ModelBundle& bundle,
                                    const EmbeddingTable& table,
                                    const std::vector<ScInstance>& data,
                                    bool use_expected_value = false) {
  if (data.empty()) throw InputError("evaluate: empty dataset");
  std::vector<EvalPair> pairs;
  pairs.reserve(data.size());
  for (const auto& inst : data) {
    pairs.push_back(
        make_eval_pair(inst.label, predict_sc(bundle, table, inst)));
  }
  return build_report(pairs, use_expected_value);
}

}  // namespace mttdsc
