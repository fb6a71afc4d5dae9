#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mttdsc/config.hpp"
#include "mttdsc/datasets.hpp"
#include "mttdsc/embeddings.hpp"
#include "mttdsc/errors.hpp"
#include "mttdsc/eval.hpp"
#include "mttdsc/models.hpp"
#include "mttdsc/rng.hpp"

namespace mttdsc {

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double aux_loss_sum = 0.0;   // sum of auxiliary cross-entropies
  std::size_t aux_count = 0;   // auxiliary instances processed
  double main_loss_sum = 0.0;  // sum of main cross-entropies, unweighted
  std::size_t main_count = 0;
  double objective = 0.0;  // aux_loss_sum + alpha * main_loss_sum
  std::optional<EvaluationReport> validation;

  friend bool operator==(const EpochStats&, const EpochStats&) = default;
};

struct TrainHistory {
  double alpha = 1.0;
  std::vector<EpochStats> epochs;
  std::optional<std::size_t> best_epoch;  // by validation 3-class macro F1

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

namespace detail {

inline std::vector<std::vector<std::size_t>> make_batches(std::size_t count,
                                                          std::size_t batch,
                                                          Rng& rng) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  rng.shuffle(idx);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch) {
    const std::size_t end = std::min(count, start + batch);
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

inline ForwardOptions train_opts(const TrainConfig& cfg, Rng& rng) {
  return {true, 1.0 - cfg.recurrent_dropout, 1.0 - cfg.head_dropout, &rng};
}

// Mean-gradient Adam step over one batch's accumulated gradients.
inline void step_params(std::span<Parameter*> params, std::size_t batch_size,
                        const TrainConfig& cfg) {
  const double inv = 1.0 / static_cast<double>(batch_size);
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= inv;
    adam_step(*p, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  }
}

inline void check_loss(double loss, const char* task) {
  if (!std::isfinite(loss)) {
    throw NumericError(std::string("non-finite ") + task +
                       " loss; aborting training");
  }
}

}  // namespace detail

// One auxiliary mini-batch: per-instance forward/backward, then a single
// mean-gradient Adam step over the aux graph. Returns the batch's CE sum.
inline double aux_batch_step(AuxModel& model,
                             const std::vector<ScInstance>& data,
                             std::span<const std::size_t> idx,
                             const EmbeddingTable& table,
                             const TrainConfig& cfg, Rng& rng) {
  double ce_sum = 0.0;
  const ForwardOptions opts = detail::train_opts(cfg, rng);
  for (std::size_t i : idx) {
    const Tensor x = embed_sequence(table, data[i].tokens);
    auto [prob, trace] = aux_forward(model, x, opts);
    ce_sum += cross_entropy(prob, data[i].label);
    aux_backward(model, trace, data[i].label);
  }
  detail::check_loss(ce_sum, "auxiliary");
  auto params = model.parameters();
  detail::step_params(params, idx.size(), cfg);
  return ce_sum;
}

// One main-task mini-batch through the joint model. Gradients are those of
// alpha * cross-entropy and reach the main head, main GRUs, and aux GRUs; the
// returned CE sum is unweighted. Steps exactly the main-graph parameter set.
inline double main_batch_step(MttdscModel& model,
                              const std::vector<TargetedInstance>& data,
                              std::span<const std::size_t> idx,
                              const EmbeddingTable& table,
                              const TrainConfig& cfg, Rng& rng) {
  double ce_sum = 0.0;
  const ForwardOptions opts = detail::train_opts(cfg, rng);
  for (std::size_t i : idx) {
    const Tensor x = embed_sequence(table, data[i].tokens);
    auto [prob, trace] = main_forward(model, x, data[i].target_start,
                                      data[i].target_end, opts);
    ce_sum += cross_entropy(prob, data[i].label);
    main_backward(model, trace, data[i].label, cfg.alpha);
  }
  detail::check_loss(ce_sum, "main");
  auto params = model.main_graph_parameters();
  detail::step_params(params, idx.size(), cfg);
  return ce_sum;
}

inline double tdgru_batch_step(TdgruModel& model,
                               const std::vector<TargetedInstance>& data,
                               std::span<const std::size_t> idx,
                               const EmbeddingTable& table,
                               const TrainConfig& cfg, Rng& rng) {
  double ce_sum = 0.0;
  const ForwardOptions opts = detail::train_opts(cfg, rng);
  for (std::size_t i : idx) {
    const Tensor x = embed_sequence(table, data[i].tokens);
    auto [prob, trace] = tdgru_forward(model, x, data[i].target_start,
                                       data[i].target_end, opts);
    ce_sum += cross_entropy(prob, data[i].label);
    tdgru_backward(model, trace, data[i].label);
  }
  detail::check_loss(ce_sum, "main");
  auto params = model.parameters();
  detail::step_params(params, idx.size(), cfg);
  return ce_sum;
}

// Effective aux-batches-per-main-batch for one epoch.
inline std::size_t resolve_aux_ratio(const TrainConfig& cfg,
                                     std::size_t aux_batches,
                                     std::size_t main_batches) {
  if (cfg.aux_batch_ratio > 0) return cfg.aux_batch_ratio;
  if (main_batches == 0) return aux_batches;
  const std::size_t proportional =
      (aux_batches + main_batches - 1) / main_batches;
  return std::min<std::size_t>(8, std::max<std::size_t>(1, proportional));
}

// One epoch of the joint schedule: before each main batch, up to `ratio` aux
// batches run (round-robin until the epoch's aux batches are exhausted). With
// no main batches this degenerates to a plain auxiliary epoch. When the cap
// bites, the epoch simply leaves the remaining aux batches unvisited; the
// next epoch reshuffles.
inline EpochStats run_joint_epoch(MttdscModel& model,
                                  const std::vector<ScInstance>& aux_data,
                                  const std::vector<TargetedInstance>& main_data,
                                  const EmbeddingTable& table,
                                  const TrainConfig& cfg, Rng& rng) {
  EpochStats stats;
  const auto aux_batches = detail::make_batches(aux_data.size(), cfg.batch, rng);
  const auto main_batches =
      detail::make_batches(main_data.size(), cfg.batch, rng);
  const std::size_t ratio =
      resolve_aux_ratio(cfg, aux_batches.size(), main_batches.size());

  std::size_t aux_cursor = 0;
  auto run_aux = [&](const std::vector<std::size_t>& idx) {
    stats.aux_loss_sum += aux_batch_step(model.aux, aux_data, idx, table, cfg, rng);
    stats.aux_count += idx.size();
  };
  if (main_batches.empty()) {
    for (const auto& b : aux_batches) run_aux(b);
  } else {
    for (const auto& mb : main_batches) {
      for (std::size_t k = 0; k < ratio && aux_cursor < aux_batches.size(); ++k) {
        run_aux(aux_batches[aux_cursor++]);
      }
      stats.main_loss_sum +=
          main_batch_step(model, main_data, mb, table, cfg, rng);
      stats.main_count += mb.size();
    }
  }
  stats.objective = stats.aux_loss_sum + cfg.alpha * stats.main_loss_sum;
  return stats;
}

// Auxiliary pre-training: exactly cfg.pretrain_epochs aux-only epochs. Main
// parameters are untouched; the model is marked ready for joint training
// either way.
inline TrainHistory pretrain_aux(MttdscModel& model,
                                 const std::vector<ScInstance>& aux_data,
                                 const EmbeddingTable& table,
                                 const TrainConfig& cfg, Rng& rng) {
  if (aux_data.empty()) throw InputError("pretrain_aux: empty auxiliary data");
  TrainHistory history;
  history.alpha = cfg.alpha;
  static const std::vector<TargetedInstance> kNoMain;
  for (std::size_t e = 1; e <= cfg.pretrain_epochs; ++e) {
    EpochStats stats = run_joint_epoch(model, aux_data, kNoMain, table, cfg, rng);
    stats.epoch = e;
    history.epochs.push_back(std::move(stats));
  }
  model.aux_pretrained = true;
  return history;
}

namespace detail {

// Tracks the best-validation-epoch snapshot of a model.
template <class Model>
struct BestTracker {
  std::optional<Model> snapshot;
  double best_f1 = -1.0;
  std::size_t best_epoch = 0;

  void consider(const Model& model, const EvaluationReport& report,
                std::size_t epoch) {
    if (report.macro_f1 > best_f1) {
      best_f1 = report.macro_f1;
      best_epoch = epoch;
      snapshot = model;
    }
  }

  void finish(Model& model, TrainHistory& history) {
    if (snapshot) {
      model = std::move(*snapshot);
      history.best_epoch = best_epoch;
    }
  }
};

}  // namespace detail

// Joint multi-task training: per epoch, shuffled aux and main batches are
// interleaved per the aux ratio. An aux batch steps aux-graph parameters
// only; a main batch steps the main graph, which includes the aux GRUs.
inline TrainHistory joint_train(MttdscModel& model,
                                const std::vector<ScInstance>& aux_data,
                                const std::vector<TargetedInstance>& main_data,
                                const std::vector<TargetedInstance>& validation,
                                const EmbeddingTable& table,
                                const TrainConfig& cfg, Rng& rng) {
  if (aux_data.empty() || main_data.empty()) {
    throw InputError("joint_train: auxiliary and main data must be non-empty");
  }
  if (!model.aux_pretrained) {
    throw UsageError("joint_train: run pretrain_aux first");
  }
  TrainHistory history;
  history.alpha = cfg.alpha;
  detail::BestTracker<MttdscModel> best;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    EpochStats stats = run_joint_epoch(model, aux_data, main_data, table, cfg, rng);
    stats.epoch = e;
    if (!validation.empty()) {
      stats.validation = evaluate_with(
          [&](const TargetedInstance& inst) {
            const Tensor x = embed_sequence(table, inst.tokens);
            return main_forward(model, x, inst.target_start, inst.target_end,
                                ForwardOptions{})
                .first;
          },
          validation);
      best.consider(model, *stats.validation, e);
    }
    history.epochs.push_back(std::move(stats));
  }
  best.finish(model, history);
  return history;
}

// Single-task training for the TDGRU baseline and its fine-tuned variant.
inline TrainHistory train_single(TdgruModel& model,
                                 const std::vector<TargetedInstance>& main_data,
                                 const std::vector<TargetedInstance>& validation,
                                 const EmbeddingTable& table,
                                 const TrainConfig& cfg, Rng& rng) {
  if (main_data.empty()) throw InputError("train_single: empty main data");
  TrainHistory history;
  history.alpha = cfg.alpha;
  detail::BestTracker<TdgruModel> best;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    EpochStats stats;
    stats.epoch = e;
    const auto batches = detail::make_batches(main_data.size(), cfg.batch, rng);
    for (const auto& b : batches) {
      stats.main_loss_sum += tdgru_batch_step(model, main_data, b, table, cfg, rng);
      stats.main_count += b.size();
    }
    stats.objective = cfg.alpha * stats.main_loss_sum;
    if (!validation.empty()) {
      stats.validation = evaluate_with(
          [&](const TargetedInstance& inst) {
            const Tensor x = embed_sequence(table, inst.tokens);
            return tdgru_forward(model, x, inst.target_start, inst.target_end,
                                 ForwardOptions{})
                .first;
          },
          validation);
      best.consider(model, *stats.validation, e);
    }
    history.epochs.push_back(std::move(stats));
  }
  best.finish(model, history);
  return history;
}

// Whole-passage training for the standalone auxiliary variant (also the
// first phase of the fine-tuning variant).
inline TrainHistory train_aux_standalone(AuxModel& model,
                                         const std::vector<ScInstance>& aux_data,
                                         const EmbeddingTable& table,
                                         const TrainConfig& cfg, Rng& rng,
                                         std::vector<double>* batch_losses = nullptr) {
  if (aux_data.empty()) throw InputError("train_aux: empty auxiliary data");
  TrainHistory history;
  history.alpha = cfg.alpha;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    EpochStats stats;
    stats.epoch = e;
    const auto batches = detail::make_batches(aux_data.size(), cfg.batch, rng);
    for (const auto& b : batches) {
      const double ce = aux_batch_step(model, aux_data, b, table, cfg, rng);
      stats.aux_loss_sum += ce;
      stats.aux_count += b.size();
      if (batch_losses) {
        batch_losses->push_back(ce / static_cast<double>(b.size()));
      }
    }
    stats.objective = stats.aux_loss_sum;
    history.epochs.push_back(std::move(stats));
  }
  return history;
}

// ---------------------------------------------------------------------------
// Variant pipelines and ensembling
// ---------------------------------------------------------------------------

struct TrainResult {
  ModelBundle bundle;
  TrainHistory pretrain_history;  // empty for single-task variants
  TrainHistory history;
  std::uint64_t seed = 0;
  std::string rng_state;  // trainer rng state at completion
};

inline TrainResult train_variant(Variant variant, const EmbeddingTable& table,
                                 const std::vector<ScInstance>& aux_data,
                                 const std::vector<TargetedInstance>& main_data,
                                 const std::vector<TargetedInstance>& validation,
                                 const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  TrainResult result;
  result.seed = seed;
  result.bundle.variant = variant;
  const std::size_t e = table.dim, d = cfg.hidden_dim;

  switch (variant) {
    case Variant::Aux: {
      AuxModel model(e, d, rng);
      result.history = train_aux_standalone(model, aux_data, table, cfg, rng);
      result.bundle.model = std::move(model);
      break;
    }
    case Variant::Tdgru: {
      TdgruModel model(e, d, rng);
      result.history = train_single(model, main_data, validation, table, cfg, rng);
      result.bundle.model = std::move(model);
      break;
    }
    case Variant::Tdft: {
      AuxModel aux(e, d, rng);
      result.pretrain_history =
          train_aux_standalone(aux, aux_data, table, cfg, rng);
      TdgruModel model = tdft_init(aux, rng, cfg.hidden_dim);
      result.history = train_single(model, main_data, validation, table, cfg, rng);
      result.bundle.model = std::move(model);
      break;
    }
    case Variant::NaiveMtl:
    case Variant::Mttdsc: {
      MttdscModel model =
          make_mttdsc(e, d, variant == Variant::NaiveMtl, rng);
      result.pretrain_history = pretrain_aux(model, aux_data, table, cfg, rng);
      result.history =
          joint_train(model, aux_data, main_data, validation, table, cfg, rng);
      result.bundle.model = std::move(model);
      break;
    }
  }
  result.rng_state = rng.state();
  return result;
}

// Member k trains independently with seed cfg.seed + k on identical data.
// Members are independent, so extra workers only change wall time, never
// results.
inline std::vector<TrainResult> ensemble_train(
    Variant variant, const EmbeddingTable& table,
    const std::vector<ScInstance>& aux_data,
    const std::vector<TargetedInstance>& main_data,
    const std::vector<TargetedInstance>& validation, const TrainConfig& cfg,
    std::size_t workers = 1) {
  cfg.validate();
  std::vector<TrainResult> members;
  members.resize(cfg.ensemble_size);
  auto run_member = [&](std::size_t k) {
    members[k] = train_variant(variant, table, aux_data, main_data, validation,
                               cfg, cfg.seed + k);
  };
  if (workers <= 1) {
    for (std::size_t k = 0; k < cfg.ensemble_size; ++k) run_member(k);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t k = 0; k < cfg.ensemble_size; ++k) {
      pending.push_back(std::async(std::launch::async, run_member, k));
      if (pending.size() == workers) {
        for (auto& f : pending) f.get();
        pending.clear();
      }
    }
    for (auto& f : pending) f.get();
  }
  return members;
}

}  // namespace mttdsc
