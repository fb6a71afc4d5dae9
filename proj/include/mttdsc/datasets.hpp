#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <istream>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mttdsc/embeddings.hpp"
#include "mttdsc/errors.hpp"
#include "mttdsc/rng.hpp"
#include "mttdsc/tensor.hpp"

namespace mttdsc {

// Whole-passage sentiment instance (auxiliary task).
struct ScInstance {
  std::vector<std::string> tokens;
  int label = 0;  // -1, 0, +1

  friend bool operator==(const ScInstance&, const ScInstance&) = default;
};

// Targeted instance: 1-based inclusive span. Importers fuse multi-word
// targets, so target_end == target_start for all shipped data.
struct TargetedInstance {
  std::vector<std::string> tokens;
  std::size_t target_start = 1;
  std::size_t target_end = 1;
  int label = 0;

  friend bool operator==(const TargetedInstance&,
                         const TargetedInstance&) = default;
};

template <class Instance>
struct DatasetSplit {
  std::vector<Instance> train;
  std::vector<Instance> validation;
  std::vector<Instance> test;
};

// ---------------------------------------------------------------------------
// Tokenization: lowercase, whitespace split, leading/trailing punctuation
// peeled off as their own tokens, #hashtags and @mentions kept whole.
// Lowercasing is ASCII-only; multi-byte UTF-8 passes through untouched.
// ---------------------------------------------------------------------------

inline std::vector<std::string> tokenize(const std::string& raw) {
  auto is_space = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  };
  auto is_punct = [](char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
  };

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && is_space(raw[i])) ++i;
    std::size_t j = i;
    while (j < raw.size() && !is_space(raw[j])) ++j;
    if (j == i) break;

    std::string chunk = raw.substr(i, j - i);
    for (char& c : chunk) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    i = j;

    while (chunk.size() > 1 && is_punct(chunk.front()) &&
           chunk.front() != '#' && chunk.front() != '@') {
      out.push_back(std::string(1, chunk.front()));
      chunk.erase(chunk.begin());
    }
    std::string trailing;
    while (chunk.size() > 1 && is_punct(chunk.back())) {
      trailing.insert(trailing.begin(), chunk.back());
      chunk.pop_back();
    }
    out.push_back(chunk);
    for (char c : trailing) out.push_back(std::string(1, c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical JSONL formats
//   TDSC: {"tokens":[...], "target_start":int, "target_end":int, "label":-1|0|1}
//   SC:   {"tokens":[...], "label":-1|0|1}
// ---------------------------------------------------------------------------

namespace detail {

inline int parse_label(const nlohmann::json& j, std::size_t line_no) {
  if (!j.is_number_integer()) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": label must be an integer");
  }
  const int label = j.get<int>();
  if (label < -1 || label > 1) {
    throw ParseError("line " + std::to_string(line_no) + ": label " +
                     std::to_string(label) + " not in {-1,0,1}");
  }
  return label;
}

inline std::vector<std::string> parse_tokens(const nlohmann::json& j,
                                             std::size_t line_no) {
  if (!j.is_array() || j.empty()) {
    throw ParseError("line " + std::to_string(line_no) +
                     ": tokens must be a non-empty array");
  }
  std::vector<std::string> tokens;
  tokens.reserve(j.size());
  for (const auto& t : j) {
    if (!t.is_string()) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": tokens must be strings");
    }
    tokens.push_back(t.get<std::string>());
  }
  return tokens;
}

inline nlohmann::json parse_object_line(const std::string& line,
                                        std::size_t line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ParseError("line " + std::to_string(line_no) + ": malformed JSON");
  }
  return j;
}

}  // namespace detail

inline std::vector<TargetedInstance> import_tdsc_jsonl(std::istream& in) {
  std::vector<TargetedInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = detail::parse_object_line(line, line_no);
    if (!j.contains("tokens") || !j.contains("target_start") ||
        !j.contains("target_end") || !j.contains("label")) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": missing tokens/target_start/target_end/label");
    }
    TargetedInstance inst;
    inst.tokens = detail::parse_tokens(j["tokens"], line_no);
    if (!j["target_start"].is_number_integer() ||
        !j["target_end"].is_number_integer()) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": target span must be integers");
    }
    const auto s = j["target_start"].get<long long>();
    const auto e = j["target_end"].get<long long>();
    if (s < 1 || e < s || static_cast<std::size_t>(e) > inst.tokens.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": target span [" +
                       std::to_string(s) + "," + std::to_string(e) +
                       "] out of range for " +
                       std::to_string(inst.tokens.size()) + " tokens");
    }
    inst.target_start = static_cast<std::size_t>(s);
    inst.target_end = static_cast<std::size_t>(e);
    inst.label = detail::parse_label(j["label"], line_no);
    out.push_back(std::move(inst));
  }
  return out;
}

inline std::vector<ScInstance> import_sc_jsonl(std::istream& in) {
  std::vector<ScInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = detail::parse_object_line(line, line_no);
    if (!j.contains("tokens") || !j.contains("label")) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": missing tokens/label");
    }
    ScInstance inst;
    inst.tokens = detail::parse_tokens(j["tokens"], line_no);
    inst.label = detail::parse_label(j["label"], line_no);
    out.push_back(std::move(inst));
  }
  return out;
}

namespace detail {

inline std::string json_token_array(const std::vector<std::string>& tokens) {
  std::string s = "[";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ",";
    s += nlohmann::json(tokens[i]).dump();
  }
  return s + "]";
}

}  // namespace detail

// Byte-stable export: fixed key order, one object per line.
inline void export_tdsc_jsonl(const std::vector<TargetedInstance>& items,
                              std::ostream& out) {
  for (const auto& inst : items) {
    out << "{\"tokens\":" << detail::json_token_array(inst.tokens)
        << ",\"target_start\":" << inst.target_start
        << ",\"target_end\":" << inst.target_end << ",\"label\":" << inst.label
        << "}\n";
  }
}

inline void export_sc_jsonl(const std::vector<ScInstance>& items,
                            std::ostream& out) {
  for (const auto& inst : items) {
    out << "{\"tokens\":" << detail::json_token_array(inst.tokens)
        << ",\"label\":" << inst.label << "}\n";
  }
}

// ---------------------------------------------------------------------------
// Dong-style triplet records: template line containing $T$, target string
// line, integer label line. Multi-word targets are fused with underscores.
// ---------------------------------------------------------------------------

inline std::vector<TargetedInstance> import_dong_triplets(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  // ignore trailing blank lines
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.size() % 3 != 0) {
    throw ParseError("triplet file truncated: " +
                     std::to_string(lines.size()) +
                     " lines is not a multiple of 3");
  }

  std::vector<TargetedInstance> out;
  for (std::size_t r = 0; r < lines.size() / 3; ++r) {
    const std::string& tmpl = lines[3 * r];
    const std::string& target_raw = lines[3 * r + 1];
    const std::string& label_raw = lines[3 * r + 2];
    const std::string rec = "record " + std::to_string(r + 1);

    auto target_tokens = tokenize(target_raw);
    if (target_tokens.empty()) {
      throw ParseError(rec + ": empty target string");
    }
    std::string fused = target_tokens[0];
    for (std::size_t i = 1; i < target_tokens.size(); ++i) {
      fused += "_" + target_tokens[i];
    }

    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(label_raw, &used);
      while (used < label_raw.size() &&
             std::isspace(static_cast<unsigned char>(label_raw[used]))) {
        ++used;
      }
      if (used != label_raw.size()) throw std::invalid_argument(label_raw);
    } catch (const std::exception&) {
      throw ParseError(rec + ": bad label line '" + label_raw + "'");
    }
    if (label < -1 || label > 1) {
      throw ParseError(rec + ": label " + std::to_string(label) +
                       " not in {-1,0,1}");
    }

    // Substitute every $T$ occurrence; the first one is the target position.
    TargetedInstance inst;
    inst.label = label;
    std::size_t target_pos = 0;
    std::size_t start = 0;
    while (true) {
      const std::size_t at = tmpl.find("$T$", start);
      const std::string segment =
          tmpl.substr(start, at == std::string::npos ? std::string::npos
                                                     : at - start);
      for (auto& t : tokenize(segment)) inst.tokens.push_back(std::move(t));
      if (at == std::string::npos) break;
      if (target_pos == 0) target_pos = inst.tokens.size() + 1;
      inst.tokens.push_back(fused);
      start = at + 3;
    }
    if (target_pos == 0) {
      throw ParseError(rec + ": template has no $T$ placeholder");
    }
    inst.target_start = inst.target_end = target_pos;
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stratified split: per-class proportional allocation by largest remainder,
// seed-deterministic.
// ---------------------------------------------------------------------------

template <class Instance>
DatasetSplit<Instance> stratified_split(const std::vector<Instance>& items,
                                        const std::array<double, 3>& fractions,
                                        std::uint64_t seed) {
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  Rng rng(seed);
  DatasetSplit<Instance> split;
  for (int label = -1; label <= 1; ++label) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].label == label) idx.push_back(i);
    }
    if (idx.empty()) {
      std::cerr << "[split] warning: no instances with label " << label
                << "\n";
      continue;
    }
    rng.shuffle(idx);

    const std::size_t n = idx.size();
    std::array<std::size_t, 3> counts;
    std::array<double, 3> remainder;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double quota = static_cast<double>(n) * fractions[k];
      counts[k] = static_cast<std::size_t>(std::floor(quota));
      remainder[k] = quota - std::floor(quota);
      assigned += counts[k];
    }
    while (assigned < n) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < 3; ++k) {
        if (remainder[k] > remainder[best]) best = k;
      }
      ++counts[best];
      remainder[best] = -1.0;
      ++assigned;
    }

    std::size_t cursor = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      auto& dst = k == 0 ? split.train : k == 1 ? split.validation : split.test;
      for (std::size_t c = 0; c < counts[k]; ++c) {
        dst.push_back(items[idx[cursor++]]);
      }
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// Synthetic verification corpus. Vocabulary has designated positive, negative,
// neutral, and entity words with (near-)orthogonal embeddings. The targeted
// label is the polarity of the nearest polar word left of the target (neutral
// if there is none); the passage label is the majority polarity. Both are
// drawn label-first from the configured class mix, and polar words right of
// the target act as distractors.
// ---------------------------------------------------------------------------

struct SynthSpec {
  std::size_t n_pos_words = 8;
  std::size_t n_neg_words = 8;
  std::size_t n_neutral_words = 10;
  std::size_t n_entity_words = 4;
  std::size_t embedding_dim = 32;
  std::size_t min_len = 5;
  std::size_t max_len = 10;
  std::array<double, 3> class_mix = {1.0 / 3, 1.0 / 3, 1.0 / 3};  // neg,neu,pos
  double polar_density = 0.3;  // polar chance for unconstrained filler slots
  // chance that a filler left of the cue word carries the OPPOSITE polarity,
  // making the passage majority misleading for the targeted label
  double left_opposite_bias = 0.0;
  // chance that a passage label is replaced by a uniformly random different
  // one, mimicking distant supervision; 0 keeps the majority rule exact
  double aux_label_noise = 0.0;
};

struct SynthCorpus {
  std::vector<TargetedInstance> tdsc;
  std::vector<ScInstance> sc;
  EmbeddingTable table;
  std::unordered_map<std::string, int> polarity;  // word -> -1/0/+1
  SynthSpec spec;

  int word_polarity(const std::string& token) const {
    auto it = polarity.find(token);
    return it == polarity.end() ? 0 : it->second;
  }
};

namespace detail {

// Orthonormalizes the first min(V, E) rows; any further rows are independent
// unit vectors.
inline Tensor random_orthogonal_rows(std::size_t v, std::size_t e, Rng& rng) {
  Tensor m({v, e});
  for (std::size_t r = 0; r < v; ++r) {
    auto row = m.row(r);
    double norm = 0.0;
    while (true) {
      for (std::size_t c = 0; c < e; ++c) row[c] = rng.normal();
      if (r < e) {
        for (std::size_t p = 0; p < r; ++p) {
          auto prev = m.row(p);
          double dot = 0.0;
          for (std::size_t c = 0; c < e; ++c) dot += row[c] * prev[c];
          for (std::size_t c = 0; c < e; ++c) row[c] -= dot * prev[c];
        }
      }
      norm = 0.0;
      for (std::size_t c = 0; c < e; ++c) norm += row[c] * row[c];
      if (norm > 1e-12) break;
    }
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < e; ++c) row[c] /= norm;
  }
  return m;
}

inline int draw_label(const std::array<double, 3>& mix, Rng& rng) {
  const double u = rng.uniform() * (mix[0] + mix[1] + mix[2]);
  if (u < mix[0]) return -1;
  if (u < mix[0] + mix[1]) return 0;
  return 1;
}

}  // namespace detail

inline SynthCorpus synth_corpus(std::uint64_t seed, std::size_t n_main,
                                std::size_t n_aux,
                                const SynthSpec& spec = SynthSpec{}) {
  if (n_main < 1 || n_aux < 1) {
    throw InputError("synth_corpus: sizes must be >= 1");
  }
  if (spec.min_len < 2 || spec.max_len < spec.min_len) {
    throw ConfigError("synth_corpus: need max_len >= min_len >= 2");
  }
  if (spec.n_pos_words < 1 || spec.n_neg_words < 1 ||
      spec.n_neutral_words < 1 || spec.n_entity_words < 1) {
    throw ConfigError("synth_corpus: each word class needs >= 1 word");
  }

  Rng rng(seed);
  SynthCorpus corpus;
  corpus.spec = spec;

  std::vector<std::string> pos_words, neg_words, neu_words, ent_words;
  std::vector<std::string> all;
  auto add_words = [&](const char* prefix, std::size_t count, int polarity,
                       std::vector<std::string>& bucket) {
    for (std::size_t i = 0; i < count; ++i) {
      std::string w = prefix + std::to_string(i);
      bucket.push_back(w);
      corpus.polarity[w] = polarity;
      all.push_back(std::move(w));
    }
  };
  add_words("pos", spec.n_pos_words, 1, pos_words);
  add_words("neg", spec.n_neg_words, -1, neg_words);
  add_words("neu", spec.n_neutral_words, 0, neu_words);
  add_words("ent", spec.n_entity_words, 0, ent_words);

  const Tensor vectors =
      detail::random_orthogonal_rows(all.size(), spec.embedding_dim, rng);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  rows.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    auto row = vectors.row(i);
    rows.emplace_back(all[i],
                      std::vector<double>(row.begin(), row.end()));
  }
  corpus.table = make_embedding_table(std::move(rows), spec.embedding_dim);

  auto pick = [&](const std::vector<std::string>& bucket) {
    return bucket[rng.uniform_index(bucket.size())];
  };
  auto pick_polar = [&](int sign) {
    return sign > 0 ? pick(pos_words) : pick(neg_words);
  };
  auto filler = [&](bool allow_polar) {
    if (allow_polar && rng.bernoulli(spec.polar_density)) {
      return pick_polar(rng.bernoulli(0.5) ? 1 : -1);
    }
    return pick(neu_words);
  };
  auto draw_len = [&] {
    return spec.min_len + rng.uniform_index(spec.max_len - spec.min_len + 1);
  };

  corpus.tdsc.reserve(n_main);
  for (std::size_t k = 0; k < n_main; ++k) {
    const int label = detail::draw_label(spec.class_mix, rng);
    const std::size_t n = draw_len();
    // Polar labels need a left context to hold the cue word.
    const std::size_t t =
        label == 0 ? 1 + rng.uniform_index(n) : 2 + rng.uniform_index(n - 1);
    TargetedInstance inst;
    inst.tokens.resize(n);
    inst.target_start = inst.target_end = t;
    inst.label = label;
    inst.tokens[t - 1] = pick(ent_words);
    if (label == 0) {
      for (std::size_t p = 1; p < t; ++p) inst.tokens[p - 1] = pick(neu_words);
    } else {
      const std::size_t cue = 1 + rng.uniform_index(t - 1);
      inst.tokens[cue - 1] = pick_polar(label);
      // between the cue and the target: strictly neutral, so the cue stays
      // the nearest polar word
      for (std::size_t p = cue + 1; p < t; ++p) {
        inst.tokens[p - 1] = pick(neu_words);
      }
      for (std::size_t p = 1; p < cue; ++p) {
        inst.tokens[p - 1] = rng.bernoulli(spec.left_opposite_bias)
                                 ? pick_polar(-label)
                                 : filler(true);
      }
    }
    for (std::size_t p = t + 1; p <= n; ++p) {
      inst.tokens[p - 1] = filler(true);
    }
    corpus.tdsc.push_back(std::move(inst));
  }

  corpus.sc.reserve(n_aux);
  for (std::size_t k = 0; k < n_aux; ++k) {
    const int label = detail::draw_label(spec.class_mix, rng);
    const std::size_t n = draw_len();
    std::size_t n_major = 0, n_minor = 0;
    if (label != 0) {
      n_major = 1 + rng.uniform_index(std::min<std::size_t>(3, n));
      n_minor = rng.uniform_index(std::min(n_major, n - n_major + 1));
    } else {
      n_major = n_minor = rng.uniform_index(std::min<std::size_t>(3, n / 2 + 1));
    }
    ScInstance inst;
    inst.label = label;
    inst.tokens.resize(n);
    std::vector<std::size_t> slots(n);
    for (std::size_t i = 0; i < n; ++i) slots[i] = i;
    rng.shuffle(slots);
    std::size_t cursor = 0;
    const int major_sign = label != 0 ? label : 1;
    for (std::size_t i = 0; i < n_major; ++i) {
      inst.tokens[slots[cursor++]] = pick_polar(major_sign);
    }
    for (std::size_t i = 0; i < n_minor; ++i) {
      inst.tokens[slots[cursor++]] = pick_polar(-major_sign);
    }
    while (cursor < n) inst.tokens[slots[cursor++]] = pick(neu_words);
    if (spec.aux_label_noise > 0.0 && rng.bernoulli(spec.aux_label_noise)) {
      const int other[2] = {label == -1 ? 0 : -1, label == 1 ? 0 : 1};
      inst.label = other[rng.bernoulli(0.5)];
    }
    corpus.sc.push_back(std::move(inst));
  }
  return corpus;
}

}  // namespace mttdsc
