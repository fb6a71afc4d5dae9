#pragma once

#include <cstddef>
#include <cstdlib>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mttdsc/errors.hpp"
#include "mttdsc/tensor.hpp"

namespace mttdsc {

inline constexpr const char* kUnkToken = "<unk>";

struct Vocabulary {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> tokens;  // index -> token; last entry is <unk>
  std::size_t unk_index = 0;

  std::size_t size() const { return tokens.size(); }

  std::size_t lookup(const std::string& token) const {
    auto it = index.find(token);
    return it == index.end() ? unk_index : it->second;
  }
};

// Frozen token -> vector map. Never mutated by training; the UNK row is the
// all-zero vector, which makes occlusion equivalent to zeroing a position.
struct EmbeddingTable {
  std::size_t dim = 0;
  Tensor matrix;  // V x E
  Vocabulary vocab;
  std::size_t duplicate_count = 0;  // duplicate tokens skipped during load

  std::span<const double> row(std::size_t i) const { return matrix.row(i); }
};

inline std::span<const double> lookup(const EmbeddingTable& table,
                                      const std::string& token) {
  return table.row(table.vocab.lookup(token));
}

// Builds a table from already-parsed rows. Duplicate tokens keep their first
// occurrence; a literal <unk> entry is ignored so the appended UNK row stays
// pinned to zero.
inline EmbeddingTable make_embedding_table(
    std::vector<std::pair<std::string, std::vector<double>>> rows,
    std::size_t dim) {
  EmbeddingTable table;
  table.dim = dim;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string& token = rows[i].first;
    if (token == kUnkToken || table.vocab.index.contains(token)) {
      ++table.duplicate_count;
      continue;
    }
    table.vocab.index.emplace(token, kept.size());
    table.vocab.tokens.push_back(token);
    kept.push_back(i);
  }
  table.vocab.unk_index = table.vocab.tokens.size();
  table.vocab.index.emplace(kUnkToken, table.vocab.unk_index);
  table.vocab.tokens.emplace_back(kUnkToken);

  table.matrix = Tensor({table.vocab.tokens.size(), dim});
  for (std::size_t r = 0; r < kept.size(); ++r) {
    const auto& values = rows[kept[r]].second;
    auto dst = table.matrix.row(r);
    for (std::size_t c = 0; c < dim; ++c) dst[c] = values[c];
  }
  return table;
}

// One entry per line: token then E decimal floats, single-space separated,
// no header. Dimension comes from the first line unless expected_dim is set.
inline EmbeddingTable load_embeddings_text(
    std::istream& in, std::optional<std::size_t> expected_dim = std::nullopt) {
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::size_t dim = expected_dim.value_or(0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t pos = line.find(' ');
    if (pos == std::string::npos || pos == 0) {
      throw ParseError("embeddings line " + std::to_string(line_no) +
                       ": expected 'token v1 v2 ...'");
    }
    std::string token = line.substr(0, pos);
    std::vector<double> values;
    const char* p = line.c_str() + pos;
    const char* end = line.c_str() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p >= end) break;
      char* next = nullptr;
      const double x = std::strtod(p, &next);
      if (next == p || (next < end && *next != ' ')) {
        throw ParseError("embeddings line " + std::to_string(line_no) +
                         ": bad float near '" + std::string(p) + "'");
      }
      values.push_back(x);
      p = next;
    }
    if (dim == 0) {
      if (values.empty()) {
        throw ParseError("embeddings line " + std::to_string(line_no) +
                         ": no vector components");
      }
      dim = values.size();
    }
    if (values.size() != dim) {
      throw ParseError("embeddings line " + std::to_string(line_no) + ": got " +
                       std::to_string(values.size()) + " columns, expected " +
                       std::to_string(dim));
    }
    rows.emplace_back(std::move(token), std::move(values));
  }
  if (rows.empty()) {
    throw InputError("embeddings stream is empty");
  }
  return make_embedding_table(std::move(rows), dim);
}

// Row i = lookup(tokens[i]); an empty sequence yields a 0 x E tensor.
inline Tensor embed_sequence(const EmbeddingTable& table,
                             const std::vector<std::string>& tokens) {
  Tensor out({tokens.size(), table.dim});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto src = lookup(table, tokens[i]);
    auto dst = out.row(i);
    for (std::size_t c = 0; c < table.dim; ++c) dst[c] = src[c];
  }
  return out;
}

}  // namespace mttdsc
