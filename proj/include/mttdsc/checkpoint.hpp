#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mttdsc/config.hpp"
#include "mttdsc/errors.hpp"
#include "mttdsc/jsonio.hpp"
#include "mttdsc/models.hpp"
#include "mttdsc/rng.hpp"

namespace mttdsc {

inline constexpr int kCheckpointVersion = 1;

// Versioned JSON envelope. Values are written with 17 significant digits so a
// reload is bit-exact, and key order is fixed so save -> load -> save is
// byte-identical. A model with shared GRUs stores them once; the aliasing is
// implied by its variant tag.
inline void save_checkpoint(ModelBundle& bundle, const TrainConfig& config,
                            const std::string& rng_state, std::ostream& out) {
  out << "{\"format\":\"mttdsc-checkpoint\",\"version\":" << kCheckpointVersion
      << ",\"variant\":\"" << variant_name(bundle.variant) << "\"";
  out << ",\"config\":" << jsonio::config_json(config);
  out << ",\"tensors\":[";
  bool first = true;
  auto write_values = [&](const Tensor& t) {
    out << "[";
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i) out << ",";
      out << jsonio::fmt(t[i]);
    }
    out << "]";
  };
  for (Parameter* p : bundle.parameters()) {
    if (!first) out << ",";
    first = false;
    out << "{\"name\":" << jsonio::quote(p->name) << ",\"shape\":[";
    for (std::size_t i = 0; i < p->value.shape().size(); ++i) {
      if (i) out << ",";
      out << p->value.shape()[i];
    }
    out << "],\"values\":";
    write_values(p->value);
    out << ",\"adam_m\":";
    write_values(p->adam_m);
    out << ",\"adam_v\":";
    write_values(p->adam_v);
    out << ",\"adam_steps\":" << p->step_count << "}";
  }
  out << "]";
  if (bundle.variant == Variant::Mttdsc || bundle.variant == Variant::NaiveMtl) {
    out << ",\"aux_pretrained\":"
        << (bundle.as_mttdsc().aux_pretrained ? "true" : "false");
  }
  out << ",\"rng_state\":" << jsonio::quote(rng_state) << "}\n";
}

inline void save_checkpoint(ModelBundle& bundle, const TrainConfig& config,
                            const std::string& rng_state,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open checkpoint file for writing: " + path);
  save_checkpoint(bundle, config, rng_state, out);
}

struct LoadedCheckpoint {
  ModelBundle bundle;
  TrainConfig config;
  std::string rng_state;
};

namespace detail {

struct TensorRecord {
  std::vector<std::size_t> shape;
  std::vector<double> values, adam_m, adam_v;
  std::uint64_t steps = 0;
};

inline void load_into(Parameter& p,
                      const std::map<std::string, TensorRecord>& records) {
  auto it = records.find(p.name);
  if (it == records.end()) {
    throw LoadError("checkpoint is missing tensor '" + p.name + "'");
  }
  const TensorRecord& rec = it->second;
  if (rec.shape != p.value.shape()) {
    Tensor expected(p.value.shape());
    Tensor got(rec.shape);
    throw LoadError("tensor '" + p.name + "' has shape " + got.shape_str() +
                    ", expected " + expected.shape_str());
  }
  if (rec.values.size() != p.value.size() ||
      rec.adam_m.size() != p.value.size() ||
      rec.adam_v.size() != p.value.size()) {
    throw LoadError("tensor '" + p.name + "' value count does not match its shape");
  }
  p.value = Tensor::of(rec.shape, rec.values);
  p.adam_m = Tensor::of(rec.shape, rec.adam_m);
  p.adam_v = Tensor::of(rec.shape, rec.adam_v);
  p.grad = Tensor(rec.shape);
  p.step_count = rec.steps;
}

}  // namespace detail

inline LoadedCheckpoint load_checkpoint(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw LoadError("checkpoint is not valid JSON");
  }
  if (j.value("format", "") != std::string("mttdsc-checkpoint")) {
    throw LoadError("not a checkpoint file (bad 'format' field)");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      j["version"].get<int>() != kCheckpointVersion) {
    throw LoadError("unsupported checkpoint version in 'version' field");
  }
  for (const char* field : {"variant", "config", "tensors", "rng_state"}) {
    if (!j.contains(field)) {
      throw LoadError("checkpoint is missing field '" + std::string(field) + "'");
    }
  }

  LoadedCheckpoint result;
  Variant variant;
  try {
    variant = parse_variant(j["variant"].get<std::string>());
  } catch (const ConfigError& e) {
    throw LoadError(std::string("bad 'variant' field: ") + e.what());
  }
  result.config = jsonio::config_from_json(j["config"]);
  result.rng_state = j["rng_state"].get<std::string>();

  std::map<std::string, detail::TensorRecord> records;
  if (!j["tensors"].is_array()) throw LoadError("'tensors' must be an array");
  for (const auto& tj : j["tensors"]) {
    if (!tj.is_object() || !tj.contains("name") || !tj.contains("shape") ||
        !tj.contains("values") || !tj.contains("adam_m") ||
        !tj.contains("adam_v") || !tj.contains("adam_steps")) {
      throw LoadError("malformed tensor record in 'tensors'");
    }
    detail::TensorRecord rec;
    const std::string name = tj["name"].get<std::string>();
    for (const auto& s : tj["shape"]) rec.shape.push_back(s.get<std::size_t>());
    rec.values = tj["values"].get<std::vector<double>>();
    rec.adam_m = tj["adam_m"].get<std::vector<double>>();
    rec.adam_v = tj["adam_v"].get<std::vector<double>>();
    rec.steps = tj["adam_steps"].get<std::uint64_t>();
    if (records.contains(name)) {
      throw LoadError("duplicate tensor '" + name + "'");
    }
    records.emplace(name, std::move(rec));
  }

  auto dims_from = [&](const std::string& wname) {
    auto it = records.find(wname);
    if (it == records.end() || it->second.shape.size() != 2) {
      throw LoadError("checkpoint is missing tensor '" + wname + "'");
    }
    return std::pair<std::size_t, std::size_t>(it->second.shape[0],
                                               it->second.shape[1]);
  };

  // Rebuild the variant's model skeleton, then overwrite every tensor.
  Rng scratch(0);
  result.bundle.variant = variant;
  switch (variant) {
    case Variant::Aux: {
      auto [e, d] = dims_from("aux.lr.w_z");
      result.bundle.model = AuxModel(e, d, scratch);
      break;
    }
    case Variant::Tdgru:
    case Variant::Tdft: {
      auto [e, d] = dims_from("td.lr.w_z");
      result.bundle.model = TdgruModel(e, d, scratch);
      break;
    }
    case Variant::NaiveMtl:
    case Variant::Mttdsc: {
      auto [e, d] = dims_from("aux.lr.w_z");
      MttdscModel m =
          make_mttdsc(e, d, /*shared_grus=*/variant == Variant::NaiveMtl,
                      scratch);
      m.aux_pretrained = j.value("aux_pretrained", false);
      result.bundle.model = std::move(m);
      break;
    }
  }

  auto params = result.bundle.parameters();
  for (Parameter* p : params) detail::load_into(*p, records);
  if (records.size() != params.size()) {
    throw LoadError("checkpoint holds " + std::to_string(records.size()) +
                    " tensors, expected " + std::to_string(params.size()));
  }
  return result;
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint file: " + path);
  return load_checkpoint(in);
}

}  // namespace mttdsc
