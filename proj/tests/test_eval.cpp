#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mttdsc/eval.hpp"
#include "mttdsc/rng.hpp"

using namespace mttdsc;

namespace {

ProbabilityTriple dist_for(int label) {
  switch (label) {
    case -1: return {0.8, 0.1, 0.1};
    case 0: return {0.1, 0.8, 0.1};
    default: return {0.1, 0.1, 0.8};
  }
}

std::vector<EvalPair> pairs_from(const std::vector<int>& gold,
                                 const std::vector<int>& pred) {
  std::vector<EvalPair> out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    out.push_back(make_eval_pair(gold[i], dist_for(pred[i])));
  }
  return out;
}

// brute-force unordered pair enumeration
double pir_oracle(const std::vector<EvalPair>& pairs) {
  std::size_t inversions = 0, total = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      ++total;
      inversions += (pairs[i].gold - pairs[j].gold) *
                        (pairs[i].pred_label - pairs[j].pred_label) <
                    0;
    }
  }
  return static_cast<double>(inversions) / static_cast<double>(total);
}

double mae_oracle(const std::vector<EvalPair>& pairs) {
  double s = 0.0;
  for (const auto& p : pairs) s += std::abs(p.gold - p.pred_label);
  return s / static_cast<double>(pairs.size());
}

// independent confusion-matrix recomputation of class and macro F1
struct PrfOracle {
  double p[3], r[3], f1[3];
  explicit PrfOracle(const std::vector<EvalPair>& pairs) {
    for (int cls = -1; cls <= 1; ++cls) {
      double tp = 0, fp = 0, fn = 0;
      for (const auto& e : pairs) {
        if (e.gold == cls && e.pred_label == cls) ++tp;
        if (e.gold != cls && e.pred_label == cls) ++fp;
        if (e.gold == cls && e.pred_label != cls) ++fn;
      }
      const int k = cls + 1;
      p[k] = tp + fp > 0 ? tp / (tp + fp) : 0.0;
      r[k] = tp + fn > 0 ? tp / (tp + fn) : 0.0;
      f1[k] = p[k] + r[k] > 0 ? 2 * p[k] * r[k] / (p[k] + r[k]) : 0.0;
    }
  }
};

}  // namespace

TEST_CASE("argmax tie-break prefers neutral then negative") {
  CHECK(argmax_label({0.4, 0.4, 0.2}) == 0);
  CHECK(argmax_label({0.4, 0.2, 0.4}) == -1);
  CHECK(argmax_label({0.2, 0.4, 0.4}) == 0);
  CHECK(argmax_label({1.0 / 3, 1.0 / 3, 1.0 / 3}) == 0);
  CHECK(argmax_label({0.5, 0.2, 0.3}) == -1);
  CHECK(argmax_label({0.1, 0.2, 0.7}) == 1);
}

TEST_CASE("accuracy") {
  CHECK(accuracy(pairs_from({-1, 0, 1}, {-1, 0, 1})) == 1.0);
  CHECK(accuracy(pairs_from({-1, 0, 1}, {1, -1, 0})) == 0.0);
  CHECK(accuracy(pairs_from({-1, 0, 1, 1}, {-1, 0, 1, 0})) == 0.75);
  CHECK_THROWS_AS(accuracy({}), InputError);
}

TEST_CASE("class and macro PRF") {
  SECTION("perfect predictions") {
    auto pairs = pairs_from({-1, 0, 1}, {-1, 0, 1});
    auto m = macro_prf(pairs);
    CHECK(m[0] == 1.0);
    CHECK(m[1] == 1.0);
    CHECK(m[2] == 1.0);
  }

  SECTION("class absent from gold and predictions scores zero") {
    auto pairs = pairs_from({-1, 1}, {-1, 1});
    auto prf = class_prf(pairs, 0);
    CHECK(prf[0] == 0.0);
    CHECK(prf[1] == 0.0);
    CHECK(prf[2] == 0.0);
  }

  SECTION("hand-computed confusion") {
    // gold [-1,-1,0,1], pred [-1,0,0,1]: class -1 has P=1, R=0.5, F1=2/3
    auto pairs = pairs_from({-1, -1, 0, 1}, {-1, 0, 0, 1});
    auto prf = class_prf(pairs, -1);
    CHECK(prf[0] == 1.0);
    CHECK(prf[1] == 0.5);
    CHECK(prf[2] == Catch::Approx(2.0 / 3).epsilon(1e-12));
  }
}

TEST_CASE("two_class_f1") {
  SECTION("perfect polar predictions") {
    auto pairs = pairs_from({-1, 1, -1}, {-1, 1, -1});
    CHECK(two_class_f1(pairs).value() == 1.0);
  }
  SECTION("all-neutral predictions miss both polar classes") {
    auto pairs = pairs_from({-1, 1}, {0, 0});
    CHECK(two_class_f1(pairs).value() == 0.0);
  }
  SECTION("hand-computed subset case") {
    // subset {-1 hit, +1 predicted neutral}: macro of {1.0, 0.0} = 0.5
    auto pairs = pairs_from({-1, 1, 0}, {-1, 0, 0});
    CHECK(two_class_f1(pairs).value() == 0.5);
  }
  SECTION("no polar gold reports absent") {
    auto pairs = pairs_from({0, 0}, {1, -1});
    CHECK(!two_class_f1(pairs).has_value());
  }
}

TEST_CASE("mae") {
  CHECK(mae(pairs_from({-1, 0, 1}, {-1, 0, 1})) == 0.0);
  CHECK(mae(pairs_from({-1}, {1})) == 2.0);
  CHECK(mae(pairs_from({-1, 0, 1}, {1, 0, 1})) == Catch::Approx(2.0 / 3).epsilon(1e-12));
  CHECK_THROWS_AS(mae({}), InputError);
}

TEST_CASE("pir") {
  CHECK(pir(pairs_from({-1, 0, 1}, {-1, 0, 1})) == 0.0);
  CHECK(pir(pairs_from({-1, 0, 1}, {1, 0, -1})) == 1.0);
  // gold tie means the pair cannot invert
  CHECK(pir(pairs_from({1, 1}, {1, -1})) == 0.0);
  std::vector<EvalPair> one = pairs_from({0}, {0});
  CHECK_THROWS_AS(pir(one), InputError);
}

TEST_CASE("metric oracles on 200 random evaluation sets") {
  Rng rng(12345);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(39);  // 2..40
    std::vector<int> gold(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      gold[i] = static_cast<int>(rng.uniform_index(3)) - 1;
      pred[i] = static_cast<int>(rng.uniform_index(3)) - 1;
    }
    auto pairs = pairs_from(gold, pred);

    CHECK(pir(pairs) == pir_oracle(pairs));  // exact
    CHECK(mae(pairs) == Catch::Approx(mae_oracle(pairs)).margin(1e-12));

    PrfOracle oracle(pairs);
    double macro_f1_oracle = (oracle.f1[0] + oracle.f1[1] + oracle.f1[2]) / 3.0;
    auto m = macro_prf(pairs);
    CHECK(m[2] == Catch::Approx(macro_f1_oracle).margin(1e-12));
    for (int cls = -1; cls <= 1; ++cls) {
      auto prf = class_prf(pairs, cls);
      CHECK(prf[0] == Catch::Approx(oracle.p[cls + 1]).margin(1e-12));
      CHECK(prf[1] == Catch::Approx(oracle.r[cls + 1]).margin(1e-12));
      CHECK(prf[2] == Catch::Approx(oracle.f1[cls + 1]).margin(1e-12));
    }

    // subset-protocol oracle for the 2-class F1
    std::vector<EvalPair> subset;
    for (const auto& p : pairs) {
      if (p.gold != 0) subset.push_back(p);
    }
    auto tc = two_class_f1(pairs);
    if (subset.empty()) {
      CHECK(!tc.has_value());
    } else {
      PrfOracle sub(subset);
      CHECK(tc.value() ==
            Catch::Approx((sub.f1[0] + sub.f1[2]) / 2.0).margin(1e-12));
    }

    // ranges
    CHECK(pir(pairs) >= 0.0);
    CHECK(pir(pairs) <= 1.0);
    CHECK(mae(pairs) >= 0.0);
    CHECK(mae(pairs) <= 2.0);
    CHECK(m[2] >= 0.0);
    CHECK(m[2] <= 1.0);

    // permutation invariance
    std::vector<EvalPair> shuffled = pairs;
    rng.shuffle(shuffled);
    CHECK(pir(shuffled) == pir(pairs));
    CHECK(accuracy(shuffled) == accuracy(pairs));
  }
}

TEST_CASE("expected-value readings") {
  CHECK(expected_label({1.0, 0.0, 0.0}) == -1.0);
  CHECK(expected_label({0.0, 1.0, 0.0}) == 0.0);
  CHECK(expected_label({0.25, 0.25, 0.5}) == 0.25);

  auto pairs = pairs_from({1, -1}, {1, -1});
  CHECK(mae(pairs, true) < mae(pairs) + 1.0);  // sane magnitude
  CHECK(pir(pairs, true) == 0.0);
}

TEST_CASE("average_distributions") {
  std::vector<ProbabilityTriple> members = {{0.2, 0.3, 0.5}, {0.4, 0.3, 0.3}};
  auto mean = average_distributions(members);
  CHECK(mean.p_neg == Catch::Approx(0.3).margin(1e-15));
  CHECK(mean.p_neu == Catch::Approx(0.3).margin(1e-15));
  CHECK(mean.p_pos == Catch::Approx(0.4).margin(1e-15));

  auto solo = average_distributions({{0.6, 0.3, 0.1}});
  CHECK(solo.p_neg == 0.6);

  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    std::vector<ProbabilityTriple> ds;
    for (int m = 0; m < 3; ++m) {
      ds.push_back(softmax3(rng.uniform(-3, 3), rng.uniform(-3, 3),
                            rng.uniform(-3, 3)));
    }
    auto avg = average_distributions(ds);
    CHECK(avg.p_neg + avg.p_neu + avg.p_pos == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("build_report") {
  SECTION("constant-neutral predictor on balanced data") {
    std::vector<TargetedInstance> data;
    for (int k = 0; k < 30; ++k) {
      TargetedInstance inst;
      inst.tokens = {"x"};
      inst.target_start = inst.target_end = 1;
      inst.label = k % 3 - 1;
      data.push_back(inst);
    }
    auto report = evaluate_with(
        [](const TargetedInstance&) {
          return ProbabilityTriple{0.1, 0.8, 0.1};
        },
        data);
    CHECK(report.accuracy == Catch::Approx(1.0 / 3).margin(1e-12));
    CHECK(report.count == 30);
  }

  SECTION("fields stay in range and evaluation is deterministic") {
    Rng rng(6);
    std::vector<int> gold, pred;
    for (int k = 0; k < 25; ++k) {
      gold.push_back(static_cast<int>(rng.uniform_index(3)) - 1);
      pred.push_back(static_cast<int>(rng.uniform_index(3)) - 1);
    }
    auto pairs = pairs_from(gold, pred);
    auto a = build_report(pairs);
    auto b = build_report(pairs);
    CHECK(a == b);
    CHECK(a.accuracy >= 0.0);
    CHECK(a.accuracy <= 1.0);
    CHECK(a.mae >= 0.0);
    CHECK(a.mae <= 2.0);
    CHECK(a.pir.value() >= 0.0);
    CHECK(a.pir.value() <= 1.0);
    for (const auto& c : a.per_class) {
      CHECK(c.precision >= 0.0);
      CHECK(c.precision <= 1.0);
      CHECK(c.f1 >= 0.0);
      CHECK(c.f1 <= 1.0);
    }
  }
}
