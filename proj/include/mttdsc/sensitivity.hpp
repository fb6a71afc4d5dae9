#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mttdsc/datasets.hpp"
#include "mttdsc/embeddings.hpp"
#include "mttdsc/errors.hpp"
#include "mttdsc/eval.hpp"
#include "mttdsc/jsonio.hpp"
#include "mttdsc/models.hpp"

namespace mttdsc {

// Probability drops caused by replacing one context token with UNK.
struct SensitivityRecord {
  std::size_t position = 0;  // 1-based
  std::string token;
  double drop_pos = 0.0;  // baseline p_pos - occluded p_pos
  double drop_neg = 0.0;
};

// UNK occlusion in eval mode; the target span itself is never occluded.
// Ensembles occlude through the averaged distribution.
inline std::vector<SensitivityRecord> occlusion_scores(
    const std::vector<ModelBundle>& members, const EmbeddingTable& table,
    const TargetedInstance& inst) {
  if (inst.tokens.empty() || inst.target_start < 1 ||
      inst.target_start > inst.target_end ||
      inst.target_end > inst.tokens.size()) {
    throw InputError("occlusion_scores: invalid instance");
  }
  const ProbabilityTriple baseline = ensemble_predict(members, table, inst);
  std::vector<SensitivityRecord> records;
  records.reserve(inst.tokens.size());
  for (std::size_t pos = 1; pos <= inst.tokens.size(); ++pos) {
    if (pos >= inst.target_start && pos <= inst.target_end) continue;
    TargetedInstance occluded = inst;
    occluded.tokens[pos - 1] = kUnkToken;
    const ProbabilityTriple p = ensemble_predict(members, table, occluded);
    SensitivityRecord rec;
    rec.position = pos;
    rec.token = inst.tokens[pos - 1];
    rec.drop_pos = baseline.p_pos - p.p_pos;
    rec.drop_neg = baseline.p_neg - p.p_neg;
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<SensitivityRecord> occlusion_scores(
    const ModelBundle& bundle, const EmbeddingTable& table,
    const TargetedInstance& inst) {
  std::vector<ModelBundle> members;
  members.push_back(bundle);
  return occlusion_scores(members, table, inst);
}

enum class HeatmapFormat { Html, Ansi };

// Coloring rule: green when drop_pos dominates and clears the noise floor,
// red when drop_neg does; intensity is the winning drop over the instance's
// largest drop. The target token is underlined.
inline constexpr double kHeatmapNoiseFloor = 0.01;

namespace detail {

struct TokenColor {
  int color = 0;       // 0 none, +1 green, -1 red
  double intensity = 0.0;  // in [0, 1]
  double drop_pos = 0.0, drop_neg = 0.0;
  bool has_record = false;
};

inline std::vector<TokenColor> color_tokens(
    const std::vector<SensitivityRecord>& records,
    const TargetedInstance& inst) {
  std::vector<TokenColor> colors(inst.tokens.size());
  double max_drop = 0.0;
  for (const auto& r : records) {
    max_drop = std::max({max_drop, std::abs(r.drop_pos), std::abs(r.drop_neg)});
  }
  for (const auto& r : records) {
    TokenColor& c = colors[r.position - 1];
    c.has_record = true;
    c.drop_pos = r.drop_pos;
    c.drop_neg = r.drop_neg;
    double winning = 0.0;
    if (r.drop_pos > r.drop_neg && r.drop_pos > kHeatmapNoiseFloor) {
      c.color = 1;
      winning = r.drop_pos;
    } else if (r.drop_neg > r.drop_pos && r.drop_neg > kHeatmapNoiseFloor) {
      c.color = -1;
      winning = r.drop_neg;
    }
    c.intensity = max_drop > 0.0 ? winning / max_drop : 0.0;
  }
  return colors;
}

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

inline std::string fmt3(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

}  // namespace detail

// Self-contained HTML document (inline styles only) or an 8-color ANSI line.
// Output bytes are deterministic for a given record set.
inline std::string render_heatmap(const std::vector<SensitivityRecord>& records,
                                  const TargetedInstance& inst,
                                  HeatmapFormat format) {
  const auto colors = detail::color_tokens(records, inst);

  if (format == HeatmapFormat::Ansi) {
    std::string out;
    for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
      if (i) out += " ";
      const auto& c = colors[i];
      const bool target =
          i + 1 >= inst.target_start && i + 1 <= inst.target_end;
      std::string open, close;
      if (target) {
        open += "\x1b[4m";
      }
      if (c.color != 0) {
        // bright variants above half intensity
        open += c.color > 0 ? (c.intensity > 0.5 ? "\x1b[92m" : "\x1b[32m")
                            : (c.intensity > 0.5 ? "\x1b[91m" : "\x1b[31m");
      }
      if (!open.empty()) close = "\x1b[0m";
      out += open + inst.tokens[i] + close;
    }
    out += "\n";
    return out;
  }

  std::string out;
  out += "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n";
  out += "<title>occlusion heatmap</title>\n</head>\n";
  out += "<body style=\"font-family:sans-serif;font-size:18px\">\n<p>\n";
  for (std::size_t i = 0; i < inst.tokens.size(); ++i) {
    const auto& c = colors[i];
    const bool target = i + 1 >= inst.target_start && i + 1 <= inst.target_end;
    std::string style;
    if (c.color > 0) {
      style = "background-color:rgba(0,160,0," + detail::fmt3(c.intensity) + ")";
    } else if (c.color < 0) {
      style = "background-color:rgba(200,0,0," + detail::fmt3(c.intensity) + ")";
    }
    if (target) {
      style += style.empty() ? "" : ";";
      style += "text-decoration:underline";
    }
    out += "<span";
    if (!style.empty()) out += " style=\"" + style + "\"";
    if (c.has_record) {
      out += " data-drop-pos=\"" + jsonio::fmt(c.drop_pos) + "\"";
      out += " data-drop-neg=\"" + jsonio::fmt(c.drop_neg) + "\"";
    }
    out += ">" + detail::html_escape(inst.tokens[i]) + "</span>\n";
  }
  out += "</p>\n</body>\n</html>\n";
  return out;
}

}  // namespace mttdsc
