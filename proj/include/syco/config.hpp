#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace syco {

// Scalar hyperparameters of the adaptation loop. Defaults are the published
// operating point; validate() rejects inconsistent settings at load time.
struct TtaConfig {
  double alpha = 0.1;    // mask ratio
  double eta0 = 5e-4;    // base learning rate
  double gamma0 = 0.1;   // conservative baseline gain
  double gamma1 = 0.5;   // partial activation gain
  double gamma2 = 1.0;   // full activation gain
  int l = 8;             // smoothing window
  double kappa = 0.8;    // persistence ratio
  double lambda1 = 0.2;  // problem-level weight
  double lambda2 = 0.7;  // process-level weight
  double lambda3 = 0.1;  // guardrail weight
  double tau = 1.2;      // pseudo-label softening temperature
  double tau_c = 0.1;    // contrastive temperature
  double w_h = 1.0;      // entropy-term weight inside the process loss
  int rank = 16;
  int m_candidates = 4;
  double noise_std = 0.1;
  double guard_fraction = 0.1;
  int batch_size = 16;
  std::string mask_space = "tail";  // tail | head | random | none
  bool raw_consistency_fallback = false;  // raw E_C in the partial fallback
  bool resample_guard_per_step = false;
  bool reretrieve_per_segment = false;
  bool grad_accum = false;  // average gradients over the last min(t, l) steps

  void validate() const;
};

struct ModelConfig {
  int input_dim = 32;
  int hidden_dim = 32;
  int n_classes = 4;
  int n_hidden_layers = 2;
  double init_scale = 0.02;

  void validate() const;
};

struct DataConfig {
  int n_sources = 4;
  int train_per_task = 512;
  int val_per_task = 256;
  double class_sep = 3.0;
  double center_radius = 3.0;
  double cov_scale = 0.6;
  double overlap_fraction = 0.5;     // class means an unseen task shares
  double unseen_rotation_angle = 0.25;
  int n_unseen_tasks = 2;

  void validate() const;
};

struct StreamConfig {
  int n_segments = 6;
  int batches_per_segment = 100;
  int batch_size = 16;
  double shift = 1.0;              // covariate shift magnitude (unseen-data)
  double noise_inflation = 0.25;   // extra within-class spread per unit shift
  double perturb_strength = 0.1;   // paraphrase-surrogate noise
  double perturb_mix_angle = 0.05; // orthogonal feature-mixing angle

  void validate() const;
};

struct PretrainConfig {
  double lr = 0.05;
  double momentum = 0.9;
  int epochs = 40;
  int batch_size = 32;
  double lr_svd = 0.2;
  int epochs_svd = 60;

  void validate() const;
};

struct ExperimentConfig {
  int schema_version = 1;
  std::string run_name = "default";
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds = {1};
  ModelConfig model;
  DataConfig data;
  StreamConfig stream;
  TtaConfig tta;
  PretrainConfig pretrain;

  void validate() const;
};

// Strict parse of the v1 schema: unknown keys are rejected with a
// field-level message; all fields round-trip.
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace syco
