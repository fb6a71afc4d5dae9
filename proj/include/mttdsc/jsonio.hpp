#pragma once

#include <cstdio>
#include <string>

#include <json.hpp>

#include "mttdsc/config.hpp"

namespace mttdsc::jsonio {

// 17 significant digits: enough to reload any double bit-exactly.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string quote(const std::string& s) {
  return nlohmann::json(s).dump();
}

inline std::string config_json(const TrainConfig& c) {
  std::string out = "{";
  out += "\"hidden_dim\":" + std::to_string(c.hidden_dim);
  out += ",\"learning_rate\":" + fmt(c.learning_rate);
  out += ",\"beta1\":" + fmt(c.beta1);
  out += ",\"beta2\":" + fmt(c.beta2);
  out += ",\"adam_eps\":" + fmt(c.adam_eps);
  out += ",\"batch\":" + std::to_string(c.batch);
  out += ",\"recurrent_dropout\":" + fmt(c.recurrent_dropout);
  out += ",\"head_dropout\":" + fmt(c.head_dropout);
  out += ",\"alpha\":" + fmt(c.alpha);
  out += ",\"epochs\":" + std::to_string(c.epochs);
  out += ",\"pretrain_epochs\":" + std::to_string(c.pretrain_epochs);
  out += ",\"ensemble_size\":" + std::to_string(c.ensemble_size);
  out += ",\"seed\":" + std::to_string(c.seed);
  out += ",\"aux_batch_ratio\":" + std::to_string(c.aux_batch_ratio);
  return out + "}";
}

// Applies any keys present in j on top of base; unknown keys are an error so
// typos do not silently fall back to defaults.
inline TrainConfig config_from_json(const nlohmann::json& j,
                                    TrainConfig base = TrainConfig{}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "hidden_dim") base.hidden_dim = value.get<std::size_t>();
    else if (key == "learning_rate") base.learning_rate = value.get<double>();
    else if (key == "beta1") base.beta1 = value.get<double>();
    else if (key == "beta2") base.beta2 = value.get<double>();
    else if (key == "adam_eps") base.adam_eps = value.get<double>();
    else if (key == "batch") base.batch = value.get<std::size_t>();
    else if (key == "recurrent_dropout") base.recurrent_dropout = value.get<double>();
    else if (key == "head_dropout") base.head_dropout = value.get<double>();
    else if (key == "alpha") base.alpha = value.get<double>();
    else if (key == "epochs") base.epochs = value.get<std::size_t>();
    else if (key == "pretrain_epochs") base.pretrain_epochs = value.get<std::size_t>();
    else if (key == "ensemble_size") base.ensemble_size = value.get<std::size_t>();
    else if (key == "seed") base.seed = value.get<std::uint64_t>();
    else if (key == "aux_batch_ratio") base.aux_batch_ratio = value.get<std::size_t>();
    else throw ConfigError("unknown config key '" + key + "'");
  }
  return base;
}

}  // namespace mttdsc::jsonio
