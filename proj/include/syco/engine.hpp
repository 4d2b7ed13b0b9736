#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "syco/adapters.hpp"
#include "syco/config.hpp"
#include "syco/mapk.hpp"
#include "syco/objectives.hpp"
#include "syco/rac1.hpp"
#include "syco/stream.hpp"

namespace syco {

// Executable variants of the reported ablations plus the frozen baseline.
enum class Ablation {
  none,
  frozen,        // eta0 = 0
  no_rac1,       // no mask, no tail reset
  head_mask,     // plasticity confined to the top-|sigma| directions
  random_mask,   // plastic set drawn uniformly
  partial_only,  // controller limited to the partial tier
  full_only,     // controller limited to the full tier
  no_smoothing,  // l = 1
  no_prob,       // lambda1 = 0
  no_proc,       // lambda2 = 0
  no_guard,      // lambda3 = 0
  entropy_only,  // plain entropy minimization replaces the composite loss
};

std::optional<Ablation> parse_ablation(const std::string& name);
std::string ablation_name(Ablation a);
std::vector<std::string> ablation_names();

struct PretrainResult {
  ToyBackbone backbone;
  std::vector<std::vector<TaLoraAdapter>> talora;  // [task][layer]
  SourceLibrary library;
  GuardrailSet guardrail;
  std::vector<double> task_val_acc;      // phase A, with the task branch
  std::vector<double> svd_task_val_acc;  // phase B, with the library adapter
  std::vector<std::string> warnings;
};

// Phase A trains the backbone together with the shared-plus-rank-1 adapter
// branches on all source tasks; phase B freezes the backbone and trains one
// SVD-form adapter per task, which populates the source library. The
// guardrail set is margin-sampled offline from the pooled source data.
PretrainResult mtl_pretrain(const std::vector<SourceTask>& sources,
                            const ExperimentConfig& cfg, std::uint64_t seed);

struct StepRow {
  int t = 0;
  int segment = 0;
  std::vector<int> predictions;
  LossBreakdown loss;
  SignalSample sig;
  std::array<int, 3> raw = {0, 0, 0};
  std::array<int, 3> smoothed = {0, 0, 0};
  int a_p = 0;
  int a_f = 0;
  double eta = 0.0;
};

struct RunRecord {
  std::vector<StepRow> steps;
  std::vector<SvdAdapter> anchor_adapters;
  std::vector<SvdAdapter> final_adapters;
  std::vector<PlasticityMask> masks;
  int retrieved_task_id = -1;
  double final_noise_std = 0.0;
  Ablation ablation = Ablation::none;
  std::uint64_t seed = 0;
};

// Full adaptation loop: retrieval-based initialization, tail reset, masked
// descent with the reliability-gated learning rate, prequential prediction
// logging. Never reads stream labels.
RunRecord tta_run(const ToyBackbone& backbone, const SourceLibrary& library,
                  const GuardrailSet& guardrail, const TargetStream& stream,
                  const TtaConfig& cfg, Ablation ablation, std::uint64_t seed);

struct SegmentSummary {
  int segment_id = 0;
  int task_id = 0;
  TaskFlavor flavor = TaskFlavor::seen;
  double accuracy = 0.0;
};

struct RunSummary {
  double overall_acc = 0.0;
  std::vector<SegmentSummary> per_segment;
  std::vector<double> per_step_acc;
  double retention_before = 0.0;
  double retention_after = 0.0;
  double retention_delta = 0.0;
  int retrieved_task_id = -1;
};

// Post-hoc scoring: joins logged predictions with the stream's hidden labels
// and measures source retention on the held-out validation splits before and
// after the run.
RunSummary evaluate_stream(const RunRecord& record, const TargetStream& stream,
                           const ToyBackbone& backbone,
                           const std::vector<SourceTask>& sources);

double model_accuracy(const ToyBackbone& backbone,
                      const std::vector<SvdAdapter>& adapters,
                      const std::vector<Vec>& xs, const std::vector<int>& ys);

// signal trace: t,H,P,C,E_H,E_P,E_C,E_H_smooth,E_P_smooth,E_C_smooth,A_p,A_f,eta_t
void write_signals_csv(const RunRecord& record, const std::string& path);
void write_steps_csv(const RunRecord& record, const RunSummary& summary,
                     const std::string& path);
nlohmann::json summary_to_json(const RunSummary& summary,
                               const RunRecord& record);

}  // namespace syco
