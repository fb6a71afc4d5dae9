#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "mttdsc/datasets.hpp"

using namespace mttdsc;

namespace {

// Independent re-labeler: polarity of the nearest polar word left of the
// target, neutral when there is none.
int relabel_tdsc(const SynthCorpus& corpus, const TargetedInstance& inst) {
  for (std::size_t p = inst.target_start - 1; p-- > 0;) {
    const int pol = corpus.word_polarity(inst.tokens[p]);
    if (pol != 0) return pol;
  }
  return 0;
}

// Independent re-labeler: majority polarity over the passage, ties neutral.
int relabel_sc(const SynthCorpus& corpus, const ScInstance& inst) {
  int pos = 0, neg = 0;
  for (const auto& t : inst.tokens) {
    const int pol = corpus.word_polarity(t);
    pos += pol > 0;
    neg += pol < 0;
  }
  return pos > neg ? 1 : neg > pos ? -1 : 0;
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("I love NY!") ==
        std::vector<std::string>{"i", "love", "ny", "!"});
  CHECK(tokenize("#GE2017 rocks") == std::vector<std::string>{"#ge2017", "rocks"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("   ") == std::vector<std::string>{});
  CHECK(tokenize("@User, hi!?") ==
        std::vector<std::string>{"@user", ",", "hi", "!", "?"});
  CHECK(tokenize("(hello)") == std::vector<std::string>{"(", "hello", ")"});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don't", "stop"});
  CHECK(tokenize("new_york") == std::vector<std::string>{"new_york"});
  CHECK(tokenize("!!!") == std::vector<std::string>{"!", "!", "!"});
}

TEST_CASE("import_tdsc_jsonl") {
  SECTION("valid line") {
    std::istringstream in(
        R"({"tokens":["good"],"target_start":1,"target_end":1,"label":1})"
        "\n");
    auto items = import_tdsc_jsonl(in);
    REQUIRE(items.size() == 1);
    CHECK(items[0].tokens == std::vector<std::string>{"good"});
    CHECK(items[0].label == 1);
  }
  SECTION("span out of range") {
    std::istringstream in(
        R"({"tokens":["x"],"target_start":2,"target_end":2,"label":0})" "\n");
    CHECK_THROWS_WITH(import_tdsc_jsonl(in),
                      Catch::Matchers::ContainsSubstring("line 1"));
  }
  SECTION("bad label") {
    std::istringstream in(
        R"({"tokens":["x"],"target_start":1,"target_end":1,"label":2})" "\n");
    CHECK_THROWS_AS(import_tdsc_jsonl(in), ParseError);
  }
  SECTION("malformed JSON names the line") {
    std::istringstream in(
        R"({"tokens":["x"],"target_start":1,"target_end":1,"label":0})"
        "\nnot json\n");
    CHECK_THROWS_WITH(import_tdsc_jsonl(in),
                      Catch::Matchers::ContainsSubstring("line 2"));
  }
}

TEST_CASE("import_sc_jsonl") {
  std::istringstream in(R"({"tokens":["a","b"],"label":-1})" "\n");
  auto items = import_sc_jsonl(in);
  REQUIRE(items.size() == 1);
  CHECK(items[0].label == -1);

  std::istringstream bad(R"({"tokens":[],"label":0})" "\n");
  CHECK_THROWS_AS(import_sc_jsonl(bad), ParseError);
}

TEST_CASE("jsonl round-trip") {
  std::istringstream in(
      R"({"tokens":["i","love","new_york","!"],"target_start":3,"target_end":3,"label":1})"
      "\n"
      R"({"tokens":["\"odd\"","\\token"],"target_start":1,"target_end":1,"label":-1})"
      "\n");
  auto items = import_tdsc_jsonl(in);
  std::ostringstream out;
  export_tdsc_jsonl(items, out);
  std::istringstream again(out.str());
  auto items2 = import_tdsc_jsonl(again);
  CHECK(items == items2);

  // byte-stable re-export
  std::ostringstream out2;
  export_tdsc_jsonl(items2, out2);
  CHECK(out.str() == out2.str());
}

TEST_CASE("import_dong_triplets") {
  SECTION("substitute, fuse, locate") {
    std::istringstream in("i love $T$ !\nnew york\n1\n");
    auto items = import_dong_triplets(in);
    REQUIRE(items.size() == 1);
    CHECK(items[0].tokens ==
          std::vector<std::string>{"i", "love", "new_york", "!"});
    CHECK(items[0].target_start == 3);
    CHECK(items[0].target_end == 3);
    CHECK(items[0].label == 1);
  }
  SECTION("missing placeholder") {
    std::istringstream in("no placeholder here\ntarget\n0\n");
    CHECK_THROWS_WITH(import_dong_triplets(in),
                      Catch::Matchers::ContainsSubstring("record 1"));
  }
  SECTION("bad label") {
    std::istringstream in("a $T$ b\nx\n5\n");
    CHECK_THROWS_AS(import_dong_triplets(in), ParseError);
  }
  SECTION("truncated file") {
    std::istringstream in("a $T$ b\nx\n");
    CHECK_THROWS_AS(import_dong_triplets(in), ParseError);
  }
  SECTION("round-trip through canonical jsonl") {
    std::istringstream in(
        "i love $T$ !\nnew york\n1\nThe $T$ was fine.\nhotel\n0\n");
    auto items = import_dong_triplets(in);
    std::ostringstream out;
    export_tdsc_jsonl(items, out);
    std::istringstream again(out.str());
    CHECK(import_tdsc_jsonl(again) == items);
  }
}

TEST_CASE("stratified_split") {
  SECTION("90/10 on 100 balanced 2-class items") {
    std::vector<ScInstance> items;
    for (int i = 0; i < 50; ++i) items.push_back({{"a"}, -1});
    for (int i = 0; i < 50; ++i) items.push_back({{"b"}, 1});
    auto split = stratified_split(items, {0.9, 0.0, 0.1}, 42);
    CHECK(split.train.size() == 90);
    CHECK(split.validation.empty());
    CHECK(split.test.size() == 10);
    std::size_t train_neg = 0, test_neg = 0;
    for (const auto& s : split.train) train_neg += s.label == -1;
    for (const auto& s : split.test) test_neg += s.label == -1;
    CHECK(train_neg == 45);
    CHECK(test_neg == 5);
  }

  SECTION("all-to-train fractions") {
    std::vector<ScInstance> items = {{{"a"}, -1}, {{"b"}, 0}, {{"c"}, 1}};
    auto split = stratified_split(items, {1.0, 0.0, 0.0}, 1);
    CHECK(split.train.size() == 3);
    CHECK(split.test.empty());
  }

  SECTION("same seed gives the same split") {
    std::vector<ScInstance> items;
    for (int i = 0; i < 30; ++i) {
      items.push_back({{"w" + std::to_string(i)}, i % 3 - 1});
    }
    auto a = stratified_split(items, {0.6, 0.2, 0.2}, 9);
    auto b = stratified_split(items, {0.6, 0.2, 0.2}, 9);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
  }

  SECTION("fractions must sum to 1") {
    std::vector<ScInstance> items = {{{"a"}, 0}};
    CHECK_THROWS_AS(stratified_split(items, {0.5, 0.0, 0.0}, 1), ConfigError);
  }
}

TEST_CASE("synth_corpus") {
  SECTION("seed determinism") {
    auto a = synth_corpus(123, 50, 60);
    auto b = synth_corpus(123, 50, 60);
    CHECK(a.tdsc == b.tdsc);
    CHECK(a.sc == b.sc);
    CHECK(a.table.matrix == b.table.matrix);

    auto c = synth_corpus(124, 50, 60);
    CHECK(a.tdsc != c.tdsc);
  }

  SECTION("every generated label matches the independent re-labelers") {
    auto corpus = synth_corpus(7, 400, 400);
    for (const auto& inst : corpus.tdsc) {
      REQUIRE(inst.target_start >= 1);
      REQUIRE(inst.target_end <= inst.tokens.size());
      CHECK(relabel_tdsc(corpus, inst) == inst.label);
    }
    for (const auto& inst : corpus.sc) {
      CHECK(relabel_sc(corpus, inst) == inst.label);
    }
  }

  SECTION("instances with no polar word left of the target are neutral") {
    auto corpus = synth_corpus(8, 300, 1);
    for (const auto& inst : corpus.tdsc) {
      bool polar_left = false;
      for (std::size_t p = 0; p + 1 < inst.target_start; ++p) {
        polar_left |= corpus.word_polarity(inst.tokens[p]) != 0;
      }
      if (!polar_left) CHECK(inst.label == 0);
    }
  }

  SECTION("label distribution tracks the configured class mix within 3%") {
    auto corpus = synth_corpus(9, 10000, 10000);
    std::array<std::size_t, 3> tdsc_counts{}, sc_counts{};
    for (const auto& i : corpus.tdsc) tdsc_counts[i.label + 1] += 1;
    for (const auto& i : corpus.sc) sc_counts[i.label + 1] += 1;
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(std::abs(tdsc_counts[k] / 10000.0 - 1.0 / 3) < 0.03);
      CHECK(std::abs(sc_counts[k] / 10000.0 - 1.0 / 3) < 0.03);
    }
  }

  SECTION("embeddings are orthonormal when the vocabulary fits the dimension") {
    auto corpus = synth_corpus(10, 2, 2);
    const Tensor& m = corpus.table.matrix;
    const std::size_t v = corpus.table.vocab.size() - 1;  // excluding UNK
    REQUIRE(v <= corpus.table.dim);
    for (std::size_t a = 0; a < v; ++a) {
      for (std::size_t b = 0; b < v; ++b) {
        double dot = 0.0;
        for (std::size_t c = 0; c < corpus.table.dim; ++c) {
          dot += m.at(a, c) * m.at(b, c);
        }
        CHECK(dot == Catch::Approx(a == b ? 1.0 : 0.0).margin(1e-9));
      }
    }
  }

  SECTION("size validation") {
    CHECK_THROWS_AS(synth_corpus(1, 0, 5), InputError);
  }
}
