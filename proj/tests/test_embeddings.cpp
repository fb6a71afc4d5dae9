#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "mttdsc/embeddings.hpp"

using namespace mttdsc;

TEST_CASE("load_embeddings_text basic format") {
  std::istringstream in("a 1 0\nb 0 1\n");
  auto table = load_embeddings_text(in);
  CHECK(table.dim == 2);
  CHECK(table.vocab.size() == 3);  // a, b, <unk>
  CHECK(table.vocab.unk_index == 2);

  auto a = lookup(table, "a");
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 0.0);
  auto unk = lookup(table, kUnkToken);
  CHECK(unk[0] == 0.0);
  CHECK(unk[1] == 0.0);
}

TEST_CASE("load_embeddings_text errors") {
  SECTION("column mismatch against expected_dim") {
    std::istringstream in("a 1 0 2\n");
    CHECK_THROWS_WITH(load_embeddings_text(in, 2),
                      Catch::Matchers::ContainsSubstring("line 1"));
  }
  SECTION("inconsistent columns across lines") {
    std::istringstream in("a 1 0\nb 1\n");
    CHECK_THROWS_WITH(load_embeddings_text(in),
                      Catch::Matchers::ContainsSubstring("line 2"));
  }
  SECTION("empty stream") {
    std::istringstream in("");
    CHECK_THROWS_AS(load_embeddings_text(in), InputError);
  }
  SECTION("bad float") {
    std::istringstream in("a 1 zebra\n");
    CHECK_THROWS_AS(load_embeddings_text(in), ParseError);
  }
}

TEST_CASE("duplicate tokens keep the first occurrence") {
  std::istringstream in("a 1 0\na 9 9\nb 0 1\n");
  auto table = load_embeddings_text(in);
  CHECK(table.duplicate_count == 1);
  CHECK(table.vocab.size() == 3);
  auto a = lookup(table, "a");
  CHECK(a[0] == 1.0);
  auto b = lookup(table, "b");
  CHECK(b[1] == 1.0);
}

TEST_CASE("a literal <unk> row stays pinned to zero") {
  std::istringstream in("a 1 0\n<unk> 7 7\nb 0 1\n");
  auto table = load_embeddings_text(in);
  CHECK(table.duplicate_count == 1);
  auto unk = lookup(table, kUnkToken);
  CHECK(unk[0] == 0.0);
  CHECK(unk[1] == 0.0);
  auto b = lookup(table, "b");
  CHECK(b[1] == 1.0);
}

TEST_CASE("lookup") {
  std::istringstream in("cat 1 2\nCat 3 4\n");
  auto table = load_embeddings_text(in);

  SECTION("unknown tokens fall back to the zero UNK row") {
    auto v = lookup(table, "dog");
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
  }
  SECTION("case sensitive") {
    CHECK(lookup(table, "cat")[0] == 1.0);
    CHECK(lookup(table, "Cat")[0] == 3.0);
  }
}

TEST_CASE("embed_sequence") {
  std::istringstream in("a 1 0\nb 0 1\n");
  auto table = load_embeddings_text(in);

  SECTION("empty sequence") {
    Tensor t = embed_sequence(table, {});
    CHECK(t.shape() == std::vector<std::size_t>{0, 2});
  }
  SECTION("repeated token gives identical rows") {
    Tensor t = embed_sequence(table, {"a", "a"});
    CHECK(t.at(0, 0) == t.at(1, 0));
    CHECK(t.at(0, 1) == t.at(1, 1));
  }
  SECTION("unseen token embeds as zeros") {
    Tensor t = embed_sequence(table, {"a", "zzz"});
    CHECK(t.at(0, 0) == 1.0);
    CHECK(t.at(1, 0) == 0.0);
    CHECK(t.at(1, 1) == 0.0);
  }
}
