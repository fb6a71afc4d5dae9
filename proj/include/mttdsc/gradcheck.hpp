#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mttdsc/datasets.hpp"
#include "mttdsc/embeddings.hpp"
#include "mttdsc/errors.hpp"
#include "mttdsc/models.hpp"
#include "mttdsc/rng.hpp"
#include "mttdsc/tensor.hpp"

namespace mttdsc {

// Central differences (f(t+e) - f(t-e)) / 2e for every scalar of the given
// parameters. The loss closure must be deterministic (dropout off); values
// are restored exactly after probing.
inline std::vector<Tensor> finite_diff_gradients(
    const std::function<double()>& loss, std::span<Parameter*> params,
    double epsilon) {
  if (!(epsilon > 0.0)) throw InputError("finite_diff_gradients: epsilon must be > 0");
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (Parameter* p : params) {
    Tensor g(p->value.shape());
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + epsilon;
      const double up = loss();
      p->value[i] = saved - epsilon;
      const double down = loss();
      p->value[i] = saved;
      g[i] = (up - down) / (2.0 * epsilon);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

struct GradCheckReport {
  std::string graph;  // which loss was differentiated
  double max_rel_err = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t scalars_checked = 0;
};

// Compares analytic gradients (accumulated by `backward`) against central
// differences of `loss` for every scalar in `params`.
inline GradCheckReport check_gradients(const std::function<double()>& loss,
                                       const std::function<void()>& backward,
                                       std::span<Parameter*> params,
                                       double epsilon, std::string graph_name) {
  for (Parameter* p : params) p->zero_grad();
  backward();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params) analytic.push_back(p->grad);
  for (Parameter* p : params) p->zero_grad();

  const auto numeric = finite_diff_gradients(loss, params, epsilon);

  GradCheckReport report;
  report.graph = std::move(graph_name);
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      ++report.scalars_checked;
      const double err = relative_error(analytic[k][i], numeric[k][i]);
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_param = params[k]->name;
        report.worst_index = i;
        report.analytic = analytic[k][i];
        report.numeric = numeric[k][i];
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Standard check profile: D=4, E=8, 30-word vocabulary, 10 targeted
// instances (lengths 3..8, targets covering both edges) and 5 passages.
// ---------------------------------------------------------------------------

struct GradCheckFixture {
  EmbeddingTable table;
  std::vector<TargetedInstance> instances;
  std::vector<ScInstance> passages;
};

inline GradCheckFixture gradcheck_fixture(std::uint64_t seed) {
  Rng rng(seed);
  GradCheckFixture fx;

  const std::size_t vocab = 30, dim = 8;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  for (std::size_t i = 0; i < vocab; ++i) {
    std::vector<double> v(dim);
    for (double& x : v) x = 0.5 * rng.normal();
    rows.emplace_back("w" + std::to_string(i), std::move(v));
  }
  fx.table = make_embedding_table(std::move(rows), dim);

  auto random_tokens = [&](std::size_t n) {
    std::vector<std::string> tokens(n);
    for (auto& t : tokens) t = "w" + std::to_string(rng.uniform_index(vocab));
    return tokens;
  };
  auto random_label = [&] { return static_cast<int>(rng.uniform_index(3)) - 1; };

  for (std::size_t k = 0; k < 10; ++k) {
    const std::size_t n = 3 + rng.uniform_index(6);  // 3..8
    TargetedInstance inst;
    inst.tokens = random_tokens(n);
    // first two instances pin the target to the edges
    const std::size_t target =
        k == 0 ? 1 : k == 1 ? n : 1 + rng.uniform_index(n);
    inst.target_start = inst.target_end = target;
    inst.label = random_label();
    fx.instances.push_back(std::move(inst));
  }
  for (std::size_t k = 0; k < 5; ++k) {
    ScInstance inst;
    inst.tokens = random_tokens(3 + rng.uniform_index(6));
    inst.label = random_label();
    fx.passages.push_back(std::move(inst));
  }
  return fx;
}

// Runs the profile for one variant; multi-task variants yield one report per
// loss graph.
inline std::vector<GradCheckReport> gradcheck_variant(Variant variant,
                                                      std::uint64_t seed,
                                                      double epsilon = 1e-4) {
  GradCheckFixture fx = gradcheck_fixture(seed);
  Rng rng(seed + 1);
  const std::size_t e = fx.table.dim, d = 4;
  std::vector<GradCheckReport> reports;
  const ForwardOptions eval_opts;  // dropout off

  switch (variant) {
    case Variant::Aux: {
      AuxModel model(e, d, rng);
      auto loss = [&] {
        double total = 0.0;
        for (const auto& p : fx.passages) {
          const Tensor x = embed_sequence(fx.table, p.tokens);
          total += cross_entropy(aux_forward(model, x, eval_opts).first, p.label);
        }
        return total;
      };
      auto backward = [&] {
        for (const auto& p : fx.passages) {
          const Tensor x = embed_sequence(fx.table, p.tokens);
          auto [prob, trace] = aux_forward(model, x, eval_opts);
          aux_backward(model, trace, p.label);
        }
      };
      auto params = model.parameters();
      reports.push_back(check_gradients(loss, backward, params, epsilon, "aux"));
      break;
    }
    case Variant::Tdgru:
    case Variant::Tdft: {
      TdgruModel model(e, d, rng);
      auto loss = [&] {
        double total = 0.0;
        for (const auto& inst : fx.instances) {
          const Tensor x = embed_sequence(fx.table, inst.tokens);
          total += cross_entropy(
              tdgru_forward(model, x, inst.target_start, inst.target_end,
                            eval_opts)
                  .first,
              inst.label);
        }
        return total;
      };
      auto backward = [&] {
        for (const auto& inst : fx.instances) {
          const Tensor x = embed_sequence(fx.table, inst.tokens);
          auto [prob, trace] = tdgru_forward(model, x, inst.target_start,
                                             inst.target_end, eval_opts);
          tdgru_backward(model, trace, inst.label);
        }
      };
      auto params = model.parameters();
      reports.push_back(check_gradients(loss, backward, params, epsilon, "main"));
      break;
    }
    case Variant::NaiveMtl:
    case Variant::Mttdsc: {
      MttdscModel model =
          make_mttdsc(e, d, variant == Variant::NaiveMtl, rng);
      auto aux_loss = [&] {
        double total = 0.0;
        for (const auto& p : fx.passages) {
          const Tensor x = embed_sequence(fx.table, p.tokens);
          total +=
              cross_entropy(aux_forward(model.aux, x, eval_opts).first, p.label);
        }
        return total;
      };
      auto aux_bwd = [&] {
        for (const auto& p : fx.passages) {
          const Tensor x = embed_sequence(fx.table, p.tokens);
          auto [prob, trace] = aux_forward(model.aux, x, eval_opts);
          aux_backward(model.aux, trace, p.label);
        }
      };
      auto aux_params = model.aux.parameters();
      reports.push_back(
          check_gradients(aux_loss, aux_bwd, aux_params, epsilon, "aux"));

      auto main_loss = [&] {
        double total = 0.0;
        for (const auto& inst : fx.instances) {
          const Tensor x = embed_sequence(fx.table, inst.tokens);
          total += cross_entropy(
              main_forward(model, x, inst.target_start, inst.target_end,
                           eval_opts)
                  .first,
              inst.label);
        }
        return total;
      };
      auto main_bwd = [&] {
        for (const auto& inst : fx.instances) {
          const Tensor x = embed_sequence(fx.table, inst.tokens);
          auto [prob, trace] = main_forward(model, x, inst.target_start,
                                            inst.target_end, eval_opts);
          main_backward(model, trace, inst.label);
        }
      };
      auto main_params = model.main_graph_parameters();
      reports.push_back(
          check_gradients(main_loss, main_bwd, main_params, epsilon, "main"));
      break;
    }
  }
  return reports;
}

}  // namespace mttdsc
