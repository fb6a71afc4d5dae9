#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "mttdsc/embeddings.hpp"
#include "mttdsc/gradcheck.hpp"
#include "mttdsc/models.hpp"
#include "mttdsc/rng.hpp"

using namespace mttdsc;

namespace {

double sgm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// scalar transcription of one cell step (D = E = 1)
double scalar_step(const GruParams& p, double x, double h) {
  const double z = sgm(x * p.w_z.value[0] + h * p.u_z.value[0] + p.b_z.value[0]);
  const double r = sgm(x * p.w_r.value[0] + h * p.u_r.value[0] + p.b_r.value[0]);
  const double c =
      std::tanh(x * p.w_h.value[0] + r * h * p.u_h.value[0] + p.b_h.value[0]);
  return (1.0 - z) * h + z * c;
}

void zero_all(std::vector<Parameter*> params) {
  for (Parameter* p : params) p->value.fill(0.0);
}

Tensor random_inputs(std::size_t n, std::size_t e, std::uint64_t seed) {
  Rng rng(seed);
  Tensor x({n, e});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1, 1);
  return x;
}

bool triple_valid(const ProbabilityTriple& p) {
  return p.p_neg > 0 && p.p_neg < 1 && p.p_neu > 0 && p.p_neu < 1 &&
         p.p_pos > 0 && p.p_pos < 1 &&
         std::abs(p.p_neg + p.p_neu + p.p_pos - 1.0) < 1e-9;
}

bool triple_bitwise_equal(const ProbabilityTriple& a, const ProbabilityTriple& b) {
  return a.p_neg == b.p_neg && a.p_neu == b.p_neu && a.p_pos == b.p_pos;
}

}  // namespace

TEST_CASE("aux_forward") {
  SECTION("N=1 is uniform for any GRU weights when the head bias is zero") {
    Rng rng(1);
    AuxModel model(3, 4, rng);  // random GRUs and head, zero bias
    Tensor passage = random_inputs(1, 3, 2);
    auto [prob, trace] = aux_forward(model, passage, ForwardOptions{});
    CHECK(prob.p_neg == Catch::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(prob.p_neu == Catch::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(prob.p_pos == Catch::Approx(1.0 / 3).epsilon(1e-12));
  }

  SECTION("all-zero parameters give the uniform output") {
    Rng rng(3);
    AuxModel model(2, 3, rng);
    zero_all(model.parameters());
    Tensor passage = random_inputs(5, 2, 4);
    auto [prob, trace] = aux_forward(model, passage, ForwardOptions{});
    CHECK(prob.p_neg == Catch::Approx(1.0 / 3).epsilon(1e-12));
  }

  SECTION("N=2 scalar model matches the pooled hand trace") {
    Rng rng(5);
    AuxModel model(1, 1, rng);
    const double x1 = 0.7, x2 = -0.4;
    Tensor passage = Tensor::of({2, 1}, {x1, x2});

    // pooled = [ (lr[0] + lr[1]) / 2, (rl[2] + rl[3]) / 2 ]
    //        = [ lr_state_after_x1 / 2, rl_state_after_x2 / 2 ]
    const double hl1 = scalar_step(model.gru_lr, x1, 0.0);
    const double hr2 = scalar_step(model.gru_rl, x2, 0.0);
    const double pooled_l = hl1 / 2.0, pooled_r = hr2 / 2.0;
    double logits[3];
    for (int j = 0; j < 3; ++j) {
      logits[j] = model.b_aux.value[j] +
                  pooled_l * model.w_aux.value.at(0, j) +
                  pooled_r * model.w_aux.value.at(1, j);
    }
    const auto expect = softmax3(logits[0], logits[1], logits[2]);

    auto [prob, trace] = aux_forward(model, passage, ForwardOptions{});
    CHECK(prob.p_neg == Catch::Approx(expect.p_neg).margin(1e-12));
    CHECK(prob.p_neu == Catch::Approx(expect.p_neu).margin(1e-12));
    CHECK(prob.p_pos == Catch::Approx(expect.p_pos).margin(1e-12));
  }

  SECTION("empty passage is an input error") {
    Rng rng(6);
    AuxModel model(2, 2, rng);
    CHECK_THROWS_AS(aux_forward(model, Tensor({0, 2}), ForwardOptions{}),
                    InputError);
  }
}

TEST_CASE("main_forward") {
  SECTION("single-token instance has four empty contexts") {
    Rng rng(7);
    MttdscModel model = make_mttdsc(3, 4, false, rng);
    Tensor tokens = random_inputs(1, 3, 8);
    auto [prob, trace] = main_forward(model, tokens, 1, ForwardOptions{});
    CHECK(prob.p_neg == Catch::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(trace.left_len == 0);
    CHECK(trace.right_len == 0);
  }

  SECTION("output is bitwise invariant to the target token's identity") {
    Rng rng(9);
    MttdscModel model = make_mttdsc(4, 5, false, rng);
    for (int k = 0; k < 20; ++k) {
      Tensor tokens = random_inputs(6, 4, 100 + k);
      auto base = main_forward(model, tokens, 3, ForwardOptions{}).first;
      Tensor swapped = tokens;
      for (std::size_t c = 0; c < 4; ++c) {
        swapped.at(2, c) = rng.uniform(-10, 10);  // replace token 3
      }
      auto changed = main_forward(model, swapped, 3, ForwardOptions{}).first;
      CHECK(triple_bitwise_equal(base, changed));
    }
  }

  SECTION("scalar model matches the concatenated hand trace") {
    Rng rng(10);
    MttdscModel model = make_mttdsc(1, 1, false, rng);
    const double x1 = 0.9, x2 = -0.2, x3 = 0.5;
    Tensor tokens = Tensor::of({3, 1}, {x1, x2, x3});

    const double a_lr = scalar_step(model.aux.gru_lr, x1, 0.0);
    const double m_lr = scalar_step(model.main_lr(), x1, 0.0);
    const double a_rl = scalar_step(model.aux.gru_rl, x3, 0.0);
    const double m_rl = scalar_step(model.main_rl(), x3, 0.0);
    const double feat[4] = {a_lr, m_lr, a_rl, m_rl};
    double logits[3];
    for (int j = 0; j < 3; ++j) {
      logits[j] = model.b_main.value[j];
      for (int i = 0; i < 4; ++i) {
        logits[j] += feat[i] * model.w_main.value.at(i, j);
      }
    }
    const auto expect = softmax3(logits[0], logits[1], logits[2]);
    auto [prob, trace] = main_forward(model, tokens, 2, ForwardOptions{});
    CHECK(prob.p_neg == Catch::Approx(expect.p_neg).margin(1e-12));
    CHECK(prob.p_pos == Catch::Approx(expect.p_pos).margin(1e-12));
  }

  SECTION("target span out of range") {
    Rng rng(11);
    MttdscModel model = make_mttdsc(2, 2, false, rng);
    Tensor tokens = random_inputs(3, 2, 12);
    CHECK_THROWS_AS(main_forward(model, tokens, 0, ForwardOptions{}), InputError);
    CHECK_THROWS_AS(main_forward(model, tokens, 4, ForwardOptions{}), InputError);
  }

  SECTION("eval-mode forward is bitwise repeatable") {
    Rng rng(13);
    MttdscModel model = make_mttdsc(3, 4, false, rng);
    Tensor tokens = random_inputs(5, 3, 14);
    auto a = main_forward(model, tokens, 2, ForwardOptions{}).first;
    auto b = main_forward(model, tokens, 2, ForwardOptions{}).first;
    CHECK(triple_bitwise_equal(a, b));
  }

  SECTION("outputs are valid probability triples") {
    Rng rng(15);
    MttdscModel model = make_mttdsc(3, 4, false, rng);
    for (int k = 0; k < 30; ++k) {
      const std::size_t n = 1 + k % 7;
      Tensor tokens = random_inputs(n, 3, 200 + k);
      const std::size_t target = 1 + k % n;
      auto prob = main_forward(model, tokens, target, ForwardOptions{}).first;
      CHECK(triple_valid(prob));
    }
  }
}

TEST_CASE("tdgru_forward") {
  SECTION("all-zero parameters give the uniform output") {
    Rng rng(16);
    TdgruModel model(2, 3, rng);
    zero_all(model.parameters());
    Tensor tokens = random_inputs(4, 2, 17);
    auto prob = tdgru_forward(model, tokens, 2, ForwardOptions{}).first;
    CHECK(prob.p_neg == Catch::Approx(1.0 / 3).epsilon(1e-12));
  }

  SECTION("changing the target token can change the output") {
    // one-hot embeddings on dim 0 vs dim 1; only w_h of the LR cell and the
    // positive-logit head row are nonzero, so the positive logit follows the
    // LR state driven by the target token's first dimension
    Rng rng(18);
    TdgruModel model(2, 1, rng);
    zero_all(model.parameters());
    model.gru_lr.w_h.value[0] = 1.0;  // row for embedding dim 0
    model.w_td.value.at(0, 2) = 4.0;

    Tensor with_t1 = Tensor::of({2, 2}, {0.0, 0.0, 1.0, 0.0});
    Tensor with_t2 = Tensor::of({2, 2}, {0.0, 0.0, 0.0, 1.0});
    auto p1 = tdgru_forward(model, with_t1, 2, ForwardOptions{}).first;
    auto p2 = tdgru_forward(model, with_t2, 2, ForwardOptions{}).first;
    CHECK(std::abs(p1.p_pos - p2.p_pos) > 0.05);
  }

  SECTION("N=1 consumes the single token in both directions") {
    Rng rng(19);
    TdgruModel model(1, 1, rng);
    const double x = 0.6;
    Tensor tokens = Tensor::of({1, 1}, {x});
    const double hl = scalar_step(model.gru_lr, x, 0.0);
    const double hr = scalar_step(model.gru_rl, x, 0.0);
    double logits[3];
    for (int j = 0; j < 3; ++j) {
      logits[j] = model.b_td.value[j] + hl * model.w_td.value.at(0, j) +
                  hr * model.w_td.value.at(1, j);
    }
    const auto expect = softmax3(logits[0], logits[1], logits[2]);
    auto prob = tdgru_forward(model, tokens, 1, ForwardOptions{}).first;
    CHECK(prob.p_pos == Catch::Approx(expect.p_pos).margin(1e-12));
  }
}

TEST_CASE("backward passes") {
  SECTION("a near-one-hot prediction on gold yields near-zero gradients") {
    Rng rng(20);
    AuxModel model(2, 3, rng);
    model.b_aux.value[0] = 60.0;  // forces p_neg ~ 1
    Tensor passage = random_inputs(3, 2, 21);
    auto [prob, trace] = aux_forward(model, passage, ForwardOptions{});
    CHECK(prob.p_neg >= 1.0 - 1e-12);
    aux_backward(model, trace, -1);
    for (Parameter* p : model.parameters()) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) {
        CHECK(std::abs(p->grad[i]) < 1e-12);
      }
    }
  }

  SECTION("aux_backward never touches main-only parameters") {
    Rng rng(22);
    MttdscModel model = make_mttdsc(3, 4, false, rng);
    Tensor passage = random_inputs(4, 3, 23);
    auto [prob, trace] = aux_forward(model.aux, passage, ForwardOptions{});
    aux_backward(model.aux, trace, 1);

    double aux_grad_mass = 0.0;
    for (Parameter* p : model.aux.parameters()) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) {
        aux_grad_mass += std::abs(p->grad[i]);
      }
    }
    CHECK(aux_grad_mass > 0.0);

    for (const Parameter* p :
         {&model.main_lr().w_z, &model.main_lr().u_h, &model.main_rl().b_r,
          &model.w_main, &model.b_main}) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) {
        CHECK(p->grad[i] == 0.0);
      }
    }
  }

  SECTION("main_backward reaches aux GRUs but not the aux head") {
    Rng rng(24);
    MttdscModel model = make_mttdsc(3, 4, false, rng);
    Tensor tokens = random_inputs(5, 3, 25);
    auto [prob, trace] = main_forward(model, tokens, 3, ForwardOptions{});
    main_backward(model, trace, 0);

    double aux_gru_mass = 0.0;
    for (Parameter* p : model.aux.gru_lr.parameters()) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) {
        aux_gru_mass += std::abs(p->grad[i]);
      }
    }
    CHECK(aux_gru_mass > 0.0);
    for (std::size_t i = 0; i < model.aux.w_aux.grad.size(); ++i) {
      CHECK(model.aux.w_aux.grad[i] == 0.0);
    }
  }
}

TEST_CASE("gradient checks per variant") {
  for (Variant v : {Variant::Mttdsc, Variant::NaiveMtl, Variant::Tdgru,
                    Variant::Aux}) {
    auto reports = gradcheck_variant(v, 77);
    for (const auto& r : reports) {
      INFO(variant_name(v) << " graph " << r.graph << " worst "
                           << r.worst_param << " analytic " << r.analytic
                           << " numeric " << r.numeric);
      CHECK(r.max_rel_err < 1e-3);
      CHECK(r.scalars_checked > 0);
    }
  }
}

TEST_CASE("tdft_init") {
  Rng rng(26);
  AuxModel aux(3, 4, rng);
  for (Parameter* p : aux.parameters()) p->adam_m.fill(0.5);

  Rng init_rng(27);
  TdgruModel td = tdft_init(aux, init_rng);

  SECTION("GRU weights copied bitwise, optimizer state reset") {
    auto src = aux.gru_lr.parameters();
    auto dst = td.gru_lr.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
      CHECK(dst[i]->value == src[i]->value);
      for (std::size_t k = 0; k < dst[i]->adam_m.size(); ++k) {
        CHECK(dst[i]->adam_m[k] == 0.0);
      }
      CHECK(dst[i]->step_count == 0);
    }
  }

  SECTION("head is fresh, not copied") {
    bool any_diff = false;
    for (std::size_t i = 0; i < td.w_td.value.size(); ++i) {
      if (td.w_td.value[i] != aux.w_aux.value[i]) any_diff = true;
    }
    CHECK(any_diff);
  }

  SECTION("fine-tuning the copy does not mutate the source") {
    const Tensor before = aux.gru_lr.w_z.value;
    td.gru_lr.w_z.value.fill(9.0);
    CHECK(aux.gru_lr.w_z.value == before);
  }

  SECTION("hidden-size mismatch is a config error") {
    CHECK_THROWS_AS(tdft_init(aux, init_rng, 8), ConfigError);
  }
}

TEST_CASE("count_parameters") {
  Rng rng(28);

  SECTION("one GRU with E=1, D=1 has nine scalars") {
    GruParams g(1, 1, "g", rng);
    CHECK(count_parameters(g) == 9);
  }

  SECTION("shared-GRU model is exactly two GRUs smaller") {
    ModelBundle full{Variant::Mttdsc, make_mttdsc(5, 3, false, rng)};
    ModelBundle shared{Variant::NaiveMtl, make_mttdsc(5, 3, true, rng)};
    GruParams g(5, 3, "g", rng);
    CHECK(count_parameters(full) - count_parameters(shared) ==
          2 * count_parameters(g));
  }

  SECTION("aux head at D=64 has 387 scalars") {
    AuxModel model(100, 64, rng);
    CHECK(model.w_aux.value.size() + model.b_aux.value.size() == 387);
  }

  SECTION("shared GRUs alias the same parameter objects") {
    MttdscModel m = make_mttdsc(4, 3, true, rng);
    CHECK(&m.main_lr() == &m.aux.gru_lr);
    CHECK(&m.main_rl() == &m.aux.gru_rl);
  }
}
