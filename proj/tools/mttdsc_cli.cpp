// Command-line driver: train/evaluate/sensitivity plus the gradcheck, synth,
// and import utilities. All outputs are deterministic for a fixed config and
// seed; nothing written carries timestamps.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mttdsc/mttdsc.hpp"
#include "mttdsc/report_io.hpp"

namespace fs = std::filesystem;
using namespace mttdsc;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << content;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_path(const std::string& value, const char* field) {
  if (value.empty()) {
    throw ConfigError(std::string("missing required path '") + field + "'");
  }
  if (!fs::exists(value)) {
    throw ConfigError(std::string("path for '") + field + "' does not exist: " +
                      value);
  }
}

EmbeddingTable load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  try {
    return load_embeddings_text(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<TargetedInstance> load_tdsc(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  try {
    return import_tdsc_jsonl(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<ScInstance> load_sc(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path);
  try {
    return import_sc_jsonl(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainRun {
  std::string variant = "mttdsc";
  std::string embeddings, aux_data, main_data, validation_data, out;
  std::size_t workers = 1;
  TrainConfig config;
};

// Precedence: built-in defaults, then the config file, then flags.
TrainRun merge_train_run(const std::string& config_file,
                         const nlohmann::json& flag_overrides) {
  TrainRun run;
  nlohmann::json train_keys = nlohmann::json::object();

  auto apply = [&](const nlohmann::json& j) {
    for (const auto& [key, value] : j.items()) {
      if (key == "variant") run.variant = value.get<std::string>();
      else if (key == "embeddings") run.embeddings = value.get<std::string>();
      else if (key == "aux_data") run.aux_data = value.get<std::string>();
      else if (key == "main_data") run.main_data = value.get<std::string>();
      else if (key == "validation_data") run.validation_data = value.get<std::string>();
      else if (key == "out") run.out = value.get<std::string>();
      else if (key == "workers") run.workers = value.get<std::size_t>();
      else train_keys[key] = value;
    }
  };

  if (!config_file.empty()) {
    require_path(config_file, "config");
    nlohmann::json j = nlohmann::json::parse(slurp(config_file), nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw ConfigError("config file is not a JSON object: " + config_file);
    }
    apply(j);
  }
  apply(flag_overrides);
  run.config = jsonio::config_from_json(train_keys);
  run.config.validate();
  if (run.workers == 0) throw ConfigError("workers must be positive");
  return run;
}

std::string resolved_config_json(const TrainRun& run) {
  std::string out = "{";
  out += "\"variant\":" + jsonio::quote(run.variant);
  out += ",\"embeddings\":" + jsonio::quote(run.embeddings);
  out += ",\"aux_data\":" + jsonio::quote(run.aux_data);
  out += ",\"main_data\":" + jsonio::quote(run.main_data);
  out += ",\"validation_data\":" + (run.validation_data.empty()
                                        ? std::string("null")
                                        : jsonio::quote(run.validation_data));
  out += ",\"out\":" + jsonio::quote(run.out);
  out += ",\"workers\":" + std::to_string(run.workers);
  out += ",\"config\":" + jsonio::config_json(run.config);
  return out + "}\n";
}

int cmd_train(const TrainRun& run) {
  const Variant variant = parse_variant(run.variant);
  if (run.out.empty()) throw ConfigError("missing required path 'out'");
  require_path(run.embeddings, "embeddings");

  const bool needs_aux = variant != Variant::Tdgru;
  const bool needs_main = variant != Variant::Aux;
  if (needs_aux) require_path(run.aux_data, "aux_data");
  if (needs_main) require_path(run.main_data, "main_data");
  if (!run.validation_data.empty()) {
    require_path(run.validation_data, "validation_data");
  }

  const EmbeddingTable table = load_table(run.embeddings);
  std::vector<ScInstance> aux_data;
  std::vector<TargetedInstance> main_data, validation;
  if (needs_aux) aux_data = load_sc(run.aux_data);
  if (needs_main) main_data = load_tdsc(run.main_data);
  if (!run.validation_data.empty()) validation = load_tdsc(run.validation_data);

  std::cerr << "[train] variant=" << run.variant << " aux=" << aux_data.size()
            << " main=" << main_data.size()
            << " validation=" << validation.size()
            << " members=" << run.config.ensemble_size << "\n";

  auto members = ensemble_train(variant, table, aux_data, main_data, validation,
                                run.config, run.workers);

  const fs::path out_dir(run.out);
  write_file(out_dir / "resolved_config.json", resolved_config_json(run));
  for (std::size_t k = 0; k < members.size(); ++k) {
    const fs::path ckpt =
        out_dir / "checkpoints" / ("member_" + std::to_string(k) + ".json");
    fs::create_directories(ckpt.parent_path());
    save_checkpoint(members[k].bundle, run.config, members[k].rng_state,
                    ckpt.string());

    std::string history = "{\"seed\":" + std::to_string(members[k].seed);
    history +=
        ",\"pretrain\":" + jsonio::history_json(members[k].pretrain_history);
    history += ",\"training\":" + jsonio::history_json(members[k].history);
    history += "}\n";
    write_file(
        out_dir / "logs" / ("history_member_" + std::to_string(k) + ".json"),
        history);
    std::cerr << "[train] wrote " << ckpt.string() << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate / sensitivity
// ---------------------------------------------------------------------------

std::vector<ModelBundle> load_members(
    const std::vector<std::string>& checkpoint_paths,
    const std::string& ensemble_dir) {
  std::vector<std::string> paths = checkpoint_paths;
  if (!ensemble_dir.empty()) {
    require_path(ensemble_dir, "ensemble_dir");
    std::vector<std::string> found;
    for (const auto& entry : fs::directory_iterator(ensemble_dir)) {
      if (entry.path().extension() == ".json") {
        found.push_back(entry.path().string());
      }
    }
    std::sort(found.begin(), found.end());
    paths.insert(paths.end(), found.begin(), found.end());
  }
  if (paths.empty()) {
    throw ConfigError(
        "no checkpoints given (use --checkpoint or --ensemble-dir)");
  }
  std::vector<ModelBundle> members;
  for (const auto& p : paths) {
    require_path(p, "checkpoint");
    members.push_back(load_checkpoint(p).bundle);
  }
  return members;
}

std::string report_table(const std::string& label, const EvaluationReport& r) {
  char buf[512];
  std::string out;
  out += "model      accuracy  precision  recall    f1        mae       pir"
         "       2class_f1  f1_neg    f1_neu    f1_pos\n";
  auto opt = [](const std::optional<double>& v) { return v ? *v : -1.0; };
  std::snprintf(buf, sizeof buf,
                "%-10s %-9.4f %-10.4f %-9.4f %-9.4f %-9.4f %-9.4f %-10.4f "
                "%-9.4f %-9.4f %-9.4f\n",
                label.c_str(), r.accuracy, r.macro_precision, r.macro_recall,
                r.macro_f1, r.mae, opt(r.pir), opt(r.two_class_f1),
                r.per_class[0].f1, r.per_class[1].f1, r.per_class[2].f1);
  out += buf;
  out += "(rates are fractions; -1 marks a measure undefined on this set)\n";
  return out;
}

int cmd_evaluate(const std::vector<std::string>& checkpoint_paths,
                 const std::string& ensemble_dir,
                 const std::string& embeddings_path,
                 const std::string& data_path, const std::string& out_dir_str,
                 bool expected_value) {
  auto members = load_members(checkpoint_paths, ensemble_dir);
  require_path(embeddings_path, "embeddings");
  require_path(data_path, "data");
  const EmbeddingTable table = load_table(embeddings_path);

  EvaluationReport report;
  const Variant variant = members[0].variant;
  if (variant == Variant::Aux) {
    report = evaluate_sc(members, table, load_sc(data_path), expected_value);
  } else {
    report = evaluate_tdsc(members, table, load_tdsc(data_path), expected_value);
  }

  std::ostringstream label;
  label << variant_name(variant);
  if (members.size() > 1) label << "(x" << members.size() << ")";
  const std::string table_text = report_table(label.str(), report);
  std::cout << table_text;

  if (!out_dir_str.empty()) {
    const fs::path out_dir(out_dir_str);
    write_file(out_dir / "reports" / "report.json",
               jsonio::report_json(report) + "\n");
    write_file(out_dir / "reports" / "report.txt", table_text);
  }
  return 0;
}

int cmd_sensitivity(const std::vector<std::string>& checkpoint_paths,
                    const std::string& ensemble_dir,
                    const std::string& embeddings_path,
                    const std::string& data_path,
                    const std::string& out_dir_str) {
  auto members = load_members(checkpoint_paths, ensemble_dir);
  if (members[0].variant == Variant::Aux) {
    throw UsageError(
        "sensitivity needs a targeted model; this checkpoint is whole-passage "
        "only");
  }
  require_path(embeddings_path, "embeddings");
  require_path(data_path, "data");
  if (out_dir_str.empty()) throw ConfigError("missing required path 'out'");
  const EmbeddingTable table = load_table(embeddings_path);
  const auto data = load_tdsc(data_path);
  if (data.empty()) throw InputError("no instances in " + data_path);

  const fs::path heat_dir = fs::path(out_dir_str) / "heatmaps";
  std::string index;
  index += "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n";
  index += "<title>occlusion heatmaps</title>\n</head>\n<body>\n<ul>\n";
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto records = occlusion_scores(members, table, data[k]);
    const std::string doc = render_heatmap(records, data[k], HeatmapFormat::Html);
    const std::string name = "instance_" + std::to_string(k + 1) + ".html";
    write_file(heat_dir / name, doc);
    std::string preview;
    for (std::size_t t = 0; t < data[k].tokens.size() && t < 8; ++t) {
      if (t) preview += " ";
      preview += data[k].tokens[t];
    }
    index += "<li><a href=\"" + name + "\">#" + std::to_string(k + 1) + "</a> " +
             detail::html_escape(preview) + "</li>\n";
  }
  index += "</ul>\n</body>\n</html>\n";
  write_file(heat_dir / "index.html", index);
  std::cerr << "[sensitivity] wrote " << data.size() << " heatmaps to "
            << heat_dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck / synth / import
// ---------------------------------------------------------------------------

int cmd_gradcheck(std::uint64_t seed, double epsilon, double tolerance,
                  std::vector<std::string> variants) {
  if (variants.empty()) {
    variants = {"mttdsc", "naive-mtl", "tdgru", "aux"};
  }
  double global_max = 0.0;
  for (const auto& name : variants) {
    const Variant v = parse_variant(name);
    for (const auto& r : gradcheck_variant(v, seed, epsilon)) {
      std::printf("%-10s %-5s scalars=%-5zu max_rel_err=%.3e worst=%s[%zu] "
                  "analytic=%.6e numeric=%.6e\n",
                  name.c_str(), r.graph.c_str(), r.scalars_checked,
                  r.max_rel_err, r.worst_param.c_str(), r.worst_index,
                  r.analytic, r.numeric);
      global_max = std::max(global_max, r.max_rel_err);
    }
  }
  std::printf("max relative error: %.3e (tolerance %.1e)\n", global_max,
              tolerance);
  return global_max < tolerance ? 0 : 1;
}

std::string embeddings_text(const EmbeddingTable& table) {
  std::string out;
  for (std::size_t r = 0; r + 1 < table.vocab.size(); ++r) {  // skip <unk>
    out += table.vocab.tokens[r];
    auto row = table.row(r);
    for (double x : row) {
      out += " ";
      out += jsonio::fmt(x);
    }
    out += "\n";
  }
  return out;
}

int cmd_synth(std::uint64_t seed, std::size_t n_main, std::size_t n_aux,
              const std::string& out_dir_str, const SynthSpec& spec) {
  if (out_dir_str.empty()) throw ConfigError("missing required path 'out'");
  auto corpus = synth_corpus(seed, n_main, n_aux, spec);

  const fs::path out_dir(out_dir_str);
  std::ostringstream tdsc, sc;
  export_tdsc_jsonl(corpus.tdsc, tdsc);
  export_sc_jsonl(corpus.sc, sc);
  write_file(out_dir / "tdsc.jsonl", tdsc.str());
  write_file(out_dir / "sc.jsonl", sc.str());
  write_file(out_dir / "embeddings.txt", embeddings_text(corpus.table));
  std::cerr << "[synth] wrote " << corpus.tdsc.size() << " targeted and "
            << corpus.sc.size() << " passage instances to "
            << out_dir.string() << "\n";
  return 0;
}

int cmd_import(const std::string& dong_path, const std::string& out_path) {
  require_path(dong_path, "dong");
  if (out_path.empty()) throw ConfigError("missing required path 'out'");
  std::ifstream in(dong_path, std::ios::binary);
  if (!in) throw InputError("cannot read " + dong_path);
  auto items = import_dong_triplets(in);
  std::ostringstream out;
  export_tdsc_jsonl(items, out);
  write_file(out_path, out.str());
  std::cerr << "[import] converted " << items.size() << " records\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task target-dependent sentiment classification engine"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a model variant");
  std::string config_file, variant, embeddings, aux_data, main_data,
      validation_data, out_dir;
  std::size_t workers = 1;
  TrainConfig defaults;
  double lr = defaults.learning_rate, alpha = defaults.alpha;
  double rec_dropout = defaults.recurrent_dropout;
  double head_dropout = defaults.head_dropout;
  std::size_t hidden = defaults.hidden_dim, batch = defaults.batch;
  std::size_t epochs = defaults.epochs, pretrain_epochs = defaults.pretrain_epochs;
  std::size_t ensemble_size = defaults.ensemble_size;
  std::size_t aux_batch_ratio = defaults.aux_batch_ratio;
  std::uint64_t seed = defaults.seed;
  train->add_option("--config", config_file, "JSON config file");
  train->add_option("--variant", variant, "aux|tdgru|tdft|naive-mtl|mttdsc");
  train->add_option("--embeddings", embeddings, "embedding text file");
  train->add_option("--aux-data", aux_data, "whole-passage jsonl");
  train->add_option("--main-data", main_data, "targeted jsonl");
  train->add_option("--validation-data", validation_data, "targeted jsonl");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--workers", workers, "parallel ensemble members");
  train->add_option("--hidden-dim", hidden, "GRU hidden size");
  train->add_option("--lr", lr, "Adam learning rate");
  train->add_option("--batch", batch, "mini-batch size");
  train->add_option("--recurrent-dropout", rec_dropout, "recurrent dropout");
  train->add_option("--head-dropout", head_dropout, "pre-head dropout");
  train->add_option("--alpha", alpha, "main-loss weight");
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--pretrain-epochs", pretrain_epochs, "aux pretrain epochs");
  train->add_option("--ensemble-size", ensemble_size, "ensemble members");
  train->add_option("--aux-batch-ratio", aux_batch_ratio,
                    "aux batches per main batch (0 = auto)");
  train->add_option("--seed", seed, "base seed");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "evaluate checkpoints");
  std::vector<std::string> eval_ckpts;
  std::string eval_dir, eval_embeddings, eval_data, eval_out;
  bool expected_value = false;
  evaluate->add_option("--checkpoint", eval_ckpts, "checkpoint file (repeatable)");
  evaluate->add_option("--ensemble-dir", eval_dir, "directory of checkpoints");
  evaluate->add_option("--embeddings", eval_embeddings, "embedding text file");
  evaluate->add_option("--data", eval_data, "evaluation jsonl");
  evaluate->add_option("--out", eval_out, "output directory");
  evaluate->add_flag("--expected-value", expected_value,
                     "use expected-value labels for MAE and PIR");

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "occlusion heatmaps");
  std::vector<std::string> sens_ckpts;
  std::string sens_dir, sens_embeddings, sens_data, sens_out;
  sens->add_option("--checkpoint", sens_ckpts, "checkpoint file (repeatable)");
  sens->add_option("--ensemble-dir", sens_dir, "directory of checkpoints");
  sens->add_option("--embeddings", sens_embeddings, "embedding text file");
  sens->add_option("--data", sens_data, "targeted jsonl");
  sens->add_option("--out", sens_out, "output directory");

  // gradcheck
  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient check");
  std::uint64_t grad_seed = 1;
  double grad_eps = 1e-4, grad_tol = 1e-3;
  std::vector<std::string> grad_variants;
  grad->add_option("--seed", grad_seed, "fixture seed");
  grad->add_option("--epsilon", grad_eps, "central-difference step");
  grad->add_option("--tolerance", grad_tol, "max relative error allowed");
  grad->add_option("--variant", grad_variants, "variant (repeatable; default all)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::uint64_t synth_seed = 1;
  std::size_t n_main = 64, n_aux = 256;
  std::string synth_out;
  SynthSpec spec;
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--n-main", n_main, "targeted instances");
  synth->add_option("--n-aux", n_aux, "passage instances");
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--embedding-dim", spec.embedding_dim, "embedding width");
  synth->add_option("--pos-words", spec.n_pos_words, "positive vocabulary size");
  synth->add_option("--neg-words", spec.n_neg_words, "negative vocabulary size");
  synth->add_option("--neutral-words", spec.n_neutral_words,
                    "neutral vocabulary size");
  synth->add_option("--entity-words", spec.n_entity_words,
                    "entity vocabulary size");
  synth->add_option("--min-len", spec.min_len, "min passage length");
  synth->add_option("--max-len", spec.max_len, "max passage length");

  // import
  auto* import_cmd = app.add_subcommand("import", "convert triplet records");
  std::string dong_path, import_out;
  import_cmd->add_option("--dong", dong_path, "triplet-format input file");
  import_cmd->add_option("--out", import_out, "canonical jsonl output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*train) {
      nlohmann::json overrides = nlohmann::json::object();
      auto set_if = [&](const char* flag, const char* key, auto value) {
        if (train->count(flag) > 0) overrides[key] = value;
      };
      set_if("--variant", "variant", variant);
      set_if("--embeddings", "embeddings", embeddings);
      set_if("--aux-data", "aux_data", aux_data);
      set_if("--main-data", "main_data", main_data);
      set_if("--validation-data", "validation_data", validation_data);
      set_if("--out", "out", out_dir);
      set_if("--workers", "workers", workers);
      set_if("--hidden-dim", "hidden_dim", hidden);
      set_if("--lr", "learning_rate", lr);
      set_if("--batch", "batch", batch);
      set_if("--recurrent-dropout", "recurrent_dropout", rec_dropout);
      set_if("--head-dropout", "head_dropout", head_dropout);
      set_if("--alpha", "alpha", alpha);
      set_if("--epochs", "epochs", epochs);
      set_if("--pretrain-epochs", "pretrain_epochs", pretrain_epochs);
      set_if("--ensemble-size", "ensemble_size", ensemble_size);
      set_if("--aux-batch-ratio", "aux_batch_ratio", aux_batch_ratio);
      set_if("--seed", "seed", seed);
      return cmd_train(merge_train_run(config_file, overrides));
    }
    if (*evaluate) {
      return cmd_evaluate(eval_ckpts, eval_dir, eval_embeddings, eval_data,
                          eval_out, expected_value);
    }
    if (*sens) {
      return cmd_sensitivity(sens_ckpts, sens_dir, sens_embeddings, sens_data,
                             sens_out);
    }
    if (*grad) {
      return cmd_gradcheck(grad_seed, grad_eps, grad_tol, grad_variants);
    }
    if (*synth) {
      return cmd_synth(synth_seed, n_main, n_aux, synth_out, spec);
    }
    if (*import_cmd) {
      return cmd_import(dong_path, import_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
