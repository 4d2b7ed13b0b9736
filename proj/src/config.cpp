#include "syco/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "syco/errors.hpp"

namespace syco {

using nlohmann::json;

void TtaConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("tta.alpha must be in [0, 1]");
  if (!(eta0 >= 0.0)) throw ConfigError("tta.eta0 must be nonnegative");
  if (!(gamma0 > 0.0 && gamma0 < 1.0))
    throw ConfigError("tta.gamma0 must be in (0, 1)");
  if (!(gamma1 > 0.0)) throw ConfigError("tta.gamma1 must be positive");
  if (!(gamma2 > gamma1)) throw ConfigError("tta.gamma2 must exceed gamma1");
  if (l < 1) throw ConfigError("tta.l must be at least 1");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw ConfigError("tta.kappa must be in (0, 1]");
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    throw ConfigError("tta.lambda weights must be nonnegative");
  if (!(tau > 1.0)) throw ConfigError("tta.tau must exceed 1");
  if (!(tau_c > 0.0)) throw ConfigError("tta.tau_c must be positive");
  if (!(w_h >= 0.0)) throw ConfigError("tta.w_h must be nonnegative");
  if (rank < 1) throw ConfigError("tta.rank must be positive");
  if (m_candidates < 2) throw ConfigError("tta.m_candidates must be >= 2");
  if (!(noise_std >= 0.0)) throw ConfigError("tta.noise_std must be nonnegative");
  if (!(guard_fraction > 0.0 && guard_fraction <= 1.0))
    throw ConfigError("tta.guard_fraction must be in (0, 1]");
  if (batch_size < 1) throw ConfigError("tta.batch_size must be positive");
  if (mask_space != "tail" && mask_space != "head" && mask_space != "random" &&
      mask_space != "none")
    throw ConfigError("tta.mask_space must be one of tail|head|random|none");
}

void ModelConfig::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || n_classes < 2)
    throw ConfigError("model dimensions must be positive (n_classes >= 2)");
  if (n_hidden_layers < 1)
    throw ConfigError("model.n_hidden_layers must be at least 1");
  if (!(init_scale > 0.0)) throw ConfigError("model.init_scale must be positive");
}

void DataConfig::validate() const {
  if (n_sources < 2) throw ConfigError("data.n_sources must be at least 2");
  if (train_per_task < 8 || val_per_task < 8)
    throw ConfigError("data splits must hold at least 8 examples");
  if (!(class_sep > 0.0)) throw ConfigError("data.class_sep must be positive");
  if (!(center_radius >= 0.0))
    throw ConfigError("data.center_radius must be nonnegative");
  if (!(cov_scale > 0.0)) throw ConfigError("data.cov_scale must be positive");
  if (!(overlap_fraction >= 0.0 && overlap_fraction <= 1.0))
    throw ConfigError("data.overlap_fraction must be in [0, 1]");
  if (!(unseen_rotation_angle >= 0.0))
    throw ConfigError("data.unseen_rotation_angle must be nonnegative");
  if (n_unseen_tasks < 1)
    throw ConfigError("data.n_unseen_tasks must be at least 1");
}

void StreamConfig::validate() const {
  if (n_segments < 1 || batches_per_segment < 1 || batch_size < 1)
    throw ConfigError("stream sizes must be positive");
  if (!(shift >= 0.0)) throw ConfigError("stream.shift must be nonnegative");
  if (!(noise_inflation >= 0.0))
    throw ConfigError("stream.noise_inflation must be nonnegative");
  if (!(perturb_strength >= 0.0))
    throw ConfigError("stream.perturb_strength must be nonnegative");
  if (!(perturb_mix_angle >= 0.0))
    throw ConfigError("stream.perturb_mix_angle must be nonnegative");
}

void PretrainConfig::validate() const {
  if (!(lr > 0.0) || !(lr_svd > 0.0))
    throw ConfigError("pretrain learning rates must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("pretrain.momentum must be in [0, 1)");
  if (epochs < 1 || epochs_svd < 1)
    throw ConfigError("pretrain epochs must be positive");
  if (batch_size < 1) throw ConfigError("pretrain.batch_size must be positive");
}

void ExperimentConfig::validate() const {
  if (schema_version != 1) throw ConfigError("schema_version must be 1");
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (out_dir.empty()) throw ConfigError("out_dir must be nonempty");
  model.validate();
  data.validate();
  stream.validate();
  tta.validate();
  pretrain.validate();
  if (tta.rank > std::min(model.hidden_dim, model.input_dim))
    throw ConfigError("tta.rank must not exceed the smallest layer width");
  if (tta.batch_size != stream.batch_size)
    throw ConfigError("tta.batch_size must match stream.batch_size");
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known,
                    const std::string& scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (known.find(it.key()) == known.end()) {
      throw ConfigError("unknown key '" + scope + it.key() + "'");
    }
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("bad value for '") + key + "'");
    }
  }
}

void parse_tta(const json& j, TtaConfig& c) {
  reject_unknown(j,
                 {"alpha", "eta0", "gamma0", "gamma1", "gamma2", "l", "kappa",
                  "lambda1", "lambda2", "lambda3", "tau", "tau_c", "w_h",
                  "rank", "m_candidates", "noise_std", "guard_fraction",
                  "batch_size", "mask_space", "raw_consistency_fallback",
                  "resample_guard_per_step", "reretrieve_per_segment",
                  "grad_accum"},
                 "tta.");
  get_if(j, "alpha", c.alpha);
  get_if(j, "eta0", c.eta0);
  get_if(j, "gamma0", c.gamma0);
  get_if(j, "gamma1", c.gamma1);
  get_if(j, "gamma2", c.gamma2);
  get_if(j, "l", c.l);
  get_if(j, "kappa", c.kappa);
  get_if(j, "lambda1", c.lambda1);
  get_if(j, "lambda2", c.lambda2);
  get_if(j, "lambda3", c.lambda3);
  get_if(j, "tau", c.tau);
  get_if(j, "tau_c", c.tau_c);
  get_if(j, "w_h", c.w_h);
  get_if(j, "rank", c.rank);
  get_if(j, "m_candidates", c.m_candidates);
  get_if(j, "noise_std", c.noise_std);
  get_if(j, "guard_fraction", c.guard_fraction);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "mask_space", c.mask_space);
  get_if(j, "raw_consistency_fallback", c.raw_consistency_fallback);
  get_if(j, "resample_guard_per_step", c.resample_guard_per_step);
  get_if(j, "reretrieve_per_segment", c.reretrieve_per_segment);
  get_if(j, "grad_accum", c.grad_accum);
}

json tta_to_json(const TtaConfig& c) {
  return json{{"alpha", c.alpha},
              {"eta0", c.eta0},
              {"gamma0", c.gamma0},
              {"gamma1", c.gamma1},
              {"gamma2", c.gamma2},
              {"l", c.l},
              {"kappa", c.kappa},
              {"lambda1", c.lambda1},
              {"lambda2", c.lambda2},
              {"lambda3", c.lambda3},
              {"tau", c.tau},
              {"tau_c", c.tau_c},
              {"w_h", c.w_h},
              {"rank", c.rank},
              {"m_candidates", c.m_candidates},
              {"noise_std", c.noise_std},
              {"guard_fraction", c.guard_fraction},
              {"batch_size", c.batch_size},
              {"mask_space", c.mask_space},
              {"raw_consistency_fallback", c.raw_consistency_fallback},
              {"resample_guard_per_step", c.resample_guard_per_step},
              {"reretrieve_per_segment", c.reretrieve_per_segment},
              {"grad_accum", c.grad_accum}};
}

void parse_model(const json& j, ModelConfig& c) {
  reject_unknown(
      j, {"input_dim", "hidden_dim", "n_classes", "n_hidden_layers",
          "init_scale"},
      "model.");
  get_if(j, "input_dim", c.input_dim);
  get_if(j, "hidden_dim", c.hidden_dim);
  get_if(j, "n_classes", c.n_classes);
  get_if(j, "n_hidden_layers", c.n_hidden_layers);
  get_if(j, "init_scale", c.init_scale);
}

json model_to_json(const ModelConfig& c) {
  return json{{"input_dim", c.input_dim},
              {"hidden_dim", c.hidden_dim},
              {"n_classes", c.n_classes},
              {"n_hidden_layers", c.n_hidden_layers},
              {"init_scale", c.init_scale}};
}

void parse_data(const json& j, DataConfig& c) {
  reject_unknown(j,
                 {"n_sources", "train_per_task", "val_per_task", "class_sep",
                  "center_radius", "cov_scale", "overlap_fraction",
                  "unseen_rotation_angle", "n_unseen_tasks"},
                 "data.");
  get_if(j, "n_sources", c.n_sources);
  get_if(j, "train_per_task", c.train_per_task);
  get_if(j, "val_per_task", c.val_per_task);
  get_if(j, "class_sep", c.class_sep);
  get_if(j, "center_radius", c.center_radius);
  get_if(j, "cov_scale", c.cov_scale);
  get_if(j, "overlap_fraction", c.overlap_fraction);
  get_if(j, "unseen_rotation_angle", c.unseen_rotation_angle);
  get_if(j, "n_unseen_tasks", c.n_unseen_tasks);
}

json data_to_json(const DataConfig& c) {
  return json{{"n_sources", c.n_sources},
              {"train_per_task", c.train_per_task},
              {"val_per_task", c.val_per_task},
              {"class_sep", c.class_sep},
              {"center_radius", c.center_radius},
              {"cov_scale", c.cov_scale},
              {"overlap_fraction", c.overlap_fraction},
              {"unseen_rotation_angle", c.unseen_rotation_angle},
              {"n_unseen_tasks", c.n_unseen_tasks}};
}

void parse_stream(const json& j, StreamConfig& c) {
  reject_unknown(j,
                 {"n_segments", "batches_per_segment", "batch_size", "shift",
                  "noise_inflation", "perturb_strength", "perturb_mix_angle"},
                 "stream.");
  get_if(j, "n_segments", c.n_segments);
  get_if(j, "batches_per_segment", c.batches_per_segment);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "shift", c.shift);
  get_if(j, "noise_inflation", c.noise_inflation);
  get_if(j, "perturb_strength", c.perturb_strength);
  get_if(j, "perturb_mix_angle", c.perturb_mix_angle);
}

json stream_to_json(const StreamConfig& c) {
  return json{{"n_segments", c.n_segments},
              {"batches_per_segment", c.batches_per_segment},
              {"batch_size", c.batch_size},
              {"shift", c.shift},
              {"noise_inflation", c.noise_inflation},
              {"perturb_strength", c.perturb_strength},
              {"perturb_mix_angle", c.perturb_mix_angle}};
}

void parse_pretrain(const json& j, PretrainConfig& c) {
  reject_unknown(
      j, {"lr", "momentum", "epochs", "batch_size", "lr_svd", "epochs_svd"},
      "pretrain.");
  get_if(j, "lr", c.lr);
  get_if(j, "momentum", c.momentum);
  get_if(j, "epochs", c.epochs);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "lr_svd", c.lr_svd);
  get_if(j, "epochs_svd", c.epochs_svd);
}

json pretrain_to_json(const PretrainConfig& c) {
  return json{{"lr", c.lr},
              {"momentum", c.momentum},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr_svd", c.lr_svd},
              {"epochs_svd", c.epochs_svd}};
}

}  // namespace

ExperimentConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");
  reject_unknown(j,
                 {"schema_version", "run_name", "out_dir", "seeds", "model",
                  "data", "stream", "tta", "pretrain"},
                 "");
  ExperimentConfig cfg;
  get_if(j, "schema_version", cfg.schema_version);
  get_if(j, "run_name", cfg.run_name);
  get_if(j, "out_dir", cfg.out_dir);
  get_if(j, "seeds", cfg.seeds);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  if (j.contains("data")) parse_data(j.at("data"), cfg.data);
  if (j.contains("stream")) parse_stream(j.at("stream"), cfg.stream);
  if (j.contains("tta")) parse_tta(j.at("tta"), cfg.tta);
  if (j.contains("pretrain")) parse_pretrain(j.at("pretrain"), cfg.pretrain);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json j{{"schema_version", cfg.schema_version},
         {"run_name", cfg.run_name},
         {"out_dir", cfg.out_dir},
         {"seeds", cfg.seeds},
         {"model", model_to_json(cfg.model)},
         {"data", data_to_json(cfg.data)},
         {"stream", stream_to_json(cfg.stream)},
         {"tta", tta_to_json(cfg.tta)},
         {"pretrain", pretrain_to_json(cfg.pretrain)}};
  return j.dump(2);
}

}  // namespace syco
