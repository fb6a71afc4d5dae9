#pragma once

#include <string>

#include "mttdsc/eval.hpp"
#include "mttdsc/jsonio.hpp"
#include "mttdsc/train.hpp"

namespace mttdsc::jsonio {

// Flat report object; rates are fractions, absent measures serialize as null.
inline std::string report_json(const EvaluationReport& r) {
  const char* cls[3] = {"neg", "neu", "pos"};
  std::string out = "{";
  out += "\"count\":" + std::to_string(r.count);
  out += ",\"accuracy\":" + fmt(r.accuracy);
  for (std::size_t k = 0; k < 3; ++k) {
    const std::string suffix = std::string("_") + cls[k];
    out += ",\"precision" + suffix + "\":" + fmt(r.per_class[k].precision);
    out += ",\"recall" + suffix + "\":" + fmt(r.per_class[k].recall);
    out += ",\"f1" + suffix + "\":" + fmt(r.per_class[k].f1);
    out += ",\"support" + suffix + "\":" + std::to_string(r.per_class[k].support);
  }
  out += ",\"macro_precision\":" + fmt(r.macro_precision);
  out += ",\"macro_recall\":" + fmt(r.macro_recall);
  out += ",\"macro_f1\":" + fmt(r.macro_f1);
  out += ",\"two_class_f1\":" +
         (r.two_class_f1 ? fmt(*r.two_class_f1) : std::string("null"));
  out += ",\"mae\":" + fmt(r.mae);
  out += ",\"pir\":" + (r.pir ? fmt(*r.pir) : std::string("null"));
  return out + "}";
}

inline std::string epoch_json(const EpochStats& e) {
  std::string out = "{";
  out += "\"epoch\":" + std::to_string(e.epoch);
  out += ",\"aux_loss_sum\":" + fmt(e.aux_loss_sum);
  out += ",\"aux_count\":" + std::to_string(e.aux_count);
  out += ",\"main_loss_sum\":" + fmt(e.main_loss_sum);
  out += ",\"main_count\":" + std::to_string(e.main_count);
  out += ",\"objective\":" + fmt(e.objective);
  out += ",\"validation\":" +
         (e.validation ? report_json(*e.validation) : std::string("null"));
  return out + "}";
}

inline std::string history_json(const TrainHistory& h) {
  std::string out = "{";
  out += "\"alpha\":" + fmt(h.alpha);
  out += ",\"best_epoch\":" +
         (h.best_epoch ? std::to_string(*h.best_epoch) : std::string("null"));
  out += ",\"epochs\":[";
  for (std::size_t i = 0; i < h.epochs.size(); ++i) {
    if (i) out += ",";
    out += epoch_json(h.epochs[i]);
  }
  return out + "]}";
}

}  // namespace mttdsc::jsonio
