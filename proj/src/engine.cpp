#include "syco/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iostream>
#include <stdexcept>

#include "syco/csv.hpp"

namespace syco {

std::optional<Ablation> parse_ablation(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(Ablation::entropy_only); ++i) {
    const auto a = static_cast<Ablation>(i);
    if (ablation_name(a) == name) return a;
  }
  return std::nullopt;
}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::frozen: return "frozen";
    case Ablation::no_rac1: return "no-rac1";
    case Ablation::head_mask: return "head-mask";
    case Ablation::random_mask: return "random-mask";
    case Ablation::partial_only: return "partial-only";
    case Ablation::full_only: return "full-only";
    case Ablation::no_smoothing: return "no-smoothing";
    case Ablation::no_prob: return "no-prob";
    case Ablation::no_proc: return "no-proc";
    case Ablation::no_guard: return "no-guard";
    case Ablation::entropy_only: return "entropy-only";
  }
  return "none";
}

std::vector<std::string> ablation_names() {
  std::vector<std::string> out;
  for (int i = 0; i <= static_cast<int>(Ablation::entropy_only); ++i) {
    out.push_back(ablation_name(static_cast<Ablation>(i)));
  }
  return out;
}

namespace {

// SGD with momentum over a flat array
struct Momentum {
  std::vector<double> v;
  void init(std::size_t n) { v.assign(n, 0.0); }
  void step(std::vector<double>& p, const std::vector<double>& g, double lr,
            double mu) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = mu * v[i] + g[i];
      p[i] -= lr * v[i];
    }
  }
};

struct TaLoraLayerState {
  Tensor2D b_shared;
  double gate = 0.0;
  std::vector<Vec> u;  // per task
  std::vector<Vec> v;
};

Vec canonical_inputs_of(const SourceTask& task, const Vec& x) {
  return canonical_form(x, task);
}

int predict(const AdaptedModel& m, const Vec& x) {
  return argmax(backbone_forward(m, x).logits);
}

}  // namespace

double model_accuracy(const ToyBackbone& backbone,
                      const std::vector<SvdAdapter>& adapters,
                      const std::vector<Vec>& xs, const std::vector<int>& ys) {
  AdaptedModel m(backbone);
  m.rebuild(adapters);
  int hit = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    hit += (predict(m, xs[i]) == ys[i]) ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(xs.size());
}

PretrainResult mtl_pretrain(const std::vector<SourceTask>& sources,
                            const ExperimentConfig& cfg, std::uint64_t seed) {
  if (sources.size() < 2) {
    throw std::invalid_argument("mtl_pretrain: need at least 2 source tasks");
  }
  const int n_tasks = static_cast<int>(sources.size());
  const int n_layers = cfg.model.n_hidden_layers;
  const int rank = cfg.tta.rank;
  RngState rng = RngState(seed).fork(0xA11CE);

  PretrainResult out;
  out.backbone = make_backbone(cfg.model.input_dim, cfg.model.hidden_dim,
                               cfg.model.n_classes, n_layers, rng);

  // canonical training/validation views, one per task
  std::vector<std::vector<Vec>> train_x(n_tasks), val_x(n_tasks);
  for (int k = 0; k < n_tasks; ++k) {
    for (const auto& x : sources[k].train.xs) {
      train_x[k].push_back(canonical_inputs_of(sources[k], x));
    }
    for (const auto& x : sources[k].val.xs) {
      val_x[k].push_back(canonical_inputs_of(sources[k], x));
    }
  }

  // phase A: backbone + shared B + task rank-1 branches, gate from zero
  std::vector<TaLoraLayerState> branch(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    const int d_out = out.backbone.hidden[l].w.rows;
    const int d_in = out.backbone.hidden[l].w.cols;
    branch[l].b_shared = Tensor2D::randn(d_out, rank, rng, 0.1);
    branch[l].gate = 0.0;
    for (int k = 0; k < n_tasks; ++k) {
      Vec u(rank), v(d_in);
      for (auto& x : u) x = 0.1 * rng.next_gaussian();
      for (auto& x : v) x = 0.1 * rng.next_gaussian();
      branch[l].u.push_back(std::move(u));
      branch[l].v.push_back(std::move(v));
    }
  }

  std::vector<Momentum> mom_w(n_layers), mom_b(n_layers), mom_bs(n_layers);
  std::vector<std::vector<Momentum>> mom_u(n_layers), mom_v(n_layers);
  Momentum mom_head_w, mom_head_b;
  std::vector<double> gate_mom(n_layers, 0.0);
  for (int l = 0; l < n_layers; ++l) {
    mom_w[l].init(out.backbone.hidden[l].w.data.size());
    mom_b[l].init(out.backbone.hidden[l].b.size());
    mom_bs[l].init(branch[l].b_shared.data.size());
    mom_u[l].resize(n_tasks);
    mom_v[l].resize(n_tasks);
    for (int k = 0; k < n_tasks; ++k) {
      mom_u[l][k].init(rank);
      mom_v[l][k].init(branch[l].v[k].size());
    }
  }
  mom_head_w.init(out.backbone.head.w.data.size());
  mom_head_b.init(out.backbone.head.b.size());

  AdaptedModel model(out.backbone);
  const double lr = cfg.pretrain.lr;
  const double mu = cfg.pretrain.momentum;
  const int bs = cfg.pretrain.batch_size;
  const int n_train = static_cast<int>(train_x[0].size());
  const int batches_per_epoch = (n_train + bs - 1) / bs;

  std::vector<std::vector<int>> order(n_tasks);
  for (int k = 0; k < n_tasks; ++k) {
    order[k].resize(n_train);
    for (int i = 0; i < n_train; ++i) order[k][i] = i;
  }

  for (int epoch = 0; epoch < cfg.pretrain.epochs; ++epoch) {
    for (int k = 0; k < n_tasks; ++k) {
      for (int i = n_train - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.next_u64() % (i + 1));
        std::swap(order[k][i], order[k][j]);
      }
    }
    for (int step = 0; step < batches_per_epoch; ++step) {
      for (int k = 0; k < n_tasks; ++k) {
        // effective weights for task k
        std::vector<Tensor2D> deltas;
        for (int l = 0; l < n_layers; ++l) {
          TaLoraAdapter view{branch[l].b_shared, branch[l].u[k], branch[l].v[k],
                             branch[l].gate};
          deltas.push_back(delta_weight(view));
        }
        model.rebuild_deltas(deltas);

        BackpropGrads grads(out.backbone, true);
        const int lo = step * bs;
        const int hi = std::min(lo + bs, n_train);
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (int idx = lo; idx < hi; ++idx) {
          const int i = order[k][idx];
          ForwardTrace t = backbone_forward(model, train_x[k][i]);
          Distribution d = clean_distribution(t);
          const int y = sources[k].train.ys[i];
          Vec dlogits(d.probs.size());
          for (std::size_t c = 0; c < d.probs.size(); ++c) {
            dlogits[c] =
                (d.probs[c] - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv;
          }
          backprop(model, t, dlogits, {}, grads);
        }

        for (int l = 0; l < n_layers; ++l) {
          const Tensor2D& g = grads.g_w[l];
          // branch gradients through delta W = gate * B (u v^T)
          Vec gv_vec = matvec(g, branch[l].v[k]);              // G v
          Vec bu = matvec(branch[l].b_shared, branch[l].u[k]);  // B u
          Tensor2D g_bs = outer(gv_vec, branch[l].u[k]);
          scale_inplace(g_bs, branch[l].gate);
          Vec g_u = matvec_t(branch[l].b_shared, gv_vec);
          for (auto& x : g_u) x *= branch[l].gate;
          Vec g_v = matvec_t(g, bu);
          for (auto& x : g_v) x *= branch[l].gate;
          const double g_gate = dot(bu, gv_vec);

          mom_w[l].step(out.backbone.hidden[l].w.data, g.data, lr, mu);
          mom_b[l].step(out.backbone.hidden[l].b, grads.g_b[l], lr, mu);
          mom_bs[l].step(branch[l].b_shared.data, g_bs.data, lr, mu);
          mom_u[l][k].step(branch[l].u[k], g_u, lr, mu);
          mom_v[l][k].step(branch[l].v[k], g_v, lr, mu);
          gate_mom[l] = mu * gate_mom[l] + g_gate;
          branch[l].gate -= lr * gate_mom[l];
        }
        mom_head_w.step(out.backbone.head.w.data, grads.g_head_w.data, lr, mu);
        mom_head_b.step(out.backbone.head.b, grads.g_head_b, lr, mu);
      }
    }
  }

  // materialize the trained branches and score phase A
  out.talora.assign(n_tasks, {});
  for (int k = 0; k < n_tasks; ++k) {
    for (int l = 0; l < n_layers; ++l) {
      out.talora[k].push_back(TaLoraAdapter{branch[l].b_shared, branch[l].u[k],
                                            branch[l].v[k], branch[l].gate});
    }
  }
  for (int k = 0; k < n_tasks; ++k) {
    std::vector<Tensor2D> deltas;
    for (int l = 0; l < n_layers; ++l) {
      deltas.push_back(delta_weight(out.talora[k][l]));
    }
    model.rebuild_deltas(deltas);
    int hit = 0;
    for (std::size_t i = 0; i < val_x[k].size(); ++i) {
      hit += (predict(model, val_x[k][i]) == sources[k].val.ys[i]) ? 1 : 0;
    }
    out.task_val_acc.push_back(static_cast<double>(hit) /
                               static_cast<double>(val_x[k].size()));
    if (out.task_val_acc.back() < 0.6) {
      out.warnings.push_back("task " + std::to_string(k) +
                             " looks non-learnable: phase A validation "
                             "accuracy " +
                             std::to_string(out.task_val_acc.back()));
    }
  }

  // phase B: per-task SVD adapters on the frozen backbone
  const int d_out = cfg.model.hidden_dim;
  for (int k = 0; k < n_tasks; ++k) {
    RngState task_rng = RngState(seed).fork(0xB000 + k);
    std::vector<SvdAdapter> adapters;
    for (int l = 0; l < n_layers; ++l) {
      const int d_in = out.backbone.hidden[l].w.cols;
      adapters.push_back(init_svd_adapter(d_out, d_in, rank, task_rng,
                                          cfg.model.init_scale));
    }
    PlasticityMask open_mask =
        build_mask_variant(adapters[0].sigma, 1.0, MaskSpace::none, nullptr);

    model.rebuild(adapters);
    for (int epoch = 0; epoch < cfg.pretrain.epochs_svd; ++epoch) {
      for (int step = 0; step < batches_per_epoch; ++step) {
        BackpropGrads grads(out.backbone, false);
        const int lo = step * bs;
        const int hi = std::min(lo + bs, n_train);
        const double inv = 1.0 / static_cast<double>(hi - lo);
        for (int idx = lo; idx < hi; ++idx) {
          ForwardTrace t = backbone_forward(model, train_x[k][idx]);
          Distribution d = clean_distribution(t);
          const int y = sources[k].train.ys[idx];
          Vec dlogits(d.probs.size());
          for (std::size_t c = 0; c < d.probs.size(); ++c) {
            dlogits[c] =
                (d.probs[c] - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv;
          }
          backprop(model, t, dlogits, {}, grads);
        }
        for (int l = 0; l < n_layers; ++l) {
          Vec g_sigma = masked_sigma_grad(adapters[l].u, adapters[l].v,
                                          grads.g_w[l], open_mask);
          auto [g_u, g_v] =
              masked_factor_grads(adapters[l], grads.g_w[l], open_mask);
          axpy(adapters[l].sigma, -cfg.pretrain.lr_svd, g_sigma);
          add_inplace(adapters[l].u, g_u, -cfg.pretrain.lr_svd);
          add_inplace(adapters[l].v, g_v, -cfg.pretrain.lr_svd);
        }
        model.rebuild(adapters);
      }
    }

    int hit = 0;
    for (std::size_t i = 0; i < val_x[k].size(); ++i) {
      hit += (predict(model, val_x[k][i]) == sources[k].val.ys[i]) ? 1 : 0;
    }
    out.svd_task_val_acc.push_back(static_cast<double>(hit) /
                                   static_cast<double>(val_x[k].size()));

    out.library.entries.push_back(
        {sources[k].spec.task_id, sources[k].embedding, std::move(adapters)});
  }

  // guardrail: margin sampling over the pooled canonical source data under
  // the deployed (adapter-free) backbone
  std::vector<Vec> pool_x;
  std::vector<int> pool_y;
  for (int k = 0; k < n_tasks; ++k) {
    for (std::size_t i = 0; i < train_x[k].size(); ++i) {
      pool_x.push_back(train_x[k][i]);
      pool_y.push_back(sources[k].train.ys[i]);
    }
  }
  model.rebuild_plain();
  out.guardrail =
      margin_sample(pool_x, pool_y, cfg.tta.guard_fraction, model);

  return out;
}

namespace {

struct EffectiveAblation {
  TtaConfig cfg;
  MaskSpace space = MaskSpace::tail;
  bool reset = true;
  bool entropy_only = false;
  bool partial_only = false;
  bool full_only = false;
};

EffectiveAblation apply_ablation(const TtaConfig& base, Ablation ab) {
  EffectiveAblation eff;
  eff.cfg = base;
  if (eff.cfg.mask_space == "head") eff.space = MaskSpace::head;
  else if (eff.cfg.mask_space == "random") eff.space = MaskSpace::random;
  else if (eff.cfg.mask_space == "none") eff.space = MaskSpace::none;
  switch (ab) {
    case Ablation::none: break;
    case Ablation::frozen: eff.cfg.eta0 = 0.0; break;
    case Ablation::no_rac1:
      eff.space = MaskSpace::none;
      eff.reset = false;
      break;
    case Ablation::head_mask: eff.space = MaskSpace::head; break;
    case Ablation::random_mask: eff.space = MaskSpace::random; break;
    case Ablation::partial_only: eff.partial_only = true; break;
    case Ablation::full_only: eff.full_only = true; break;
    case Ablation::no_smoothing: eff.cfg.l = 1; break;
    case Ablation::no_prob: eff.cfg.lambda1 = 0.0; break;
    case Ablation::no_proc: eff.cfg.lambda2 = 0.0; break;
    case Ablation::no_guard: eff.cfg.lambda3 = 0.0; break;
    case Ablation::entropy_only:
      eff.entropy_only = true;
      eff.cfg.lambda1 = eff.cfg.lambda2 = eff.cfg.lambda3 = 0.0;
      break;
  }
  if (eff.space == MaskSpace::none) eff.reset = false;
  return eff;
}

bool grads_finite(const std::vector<Tensor2D>& gs) {
  for (const auto& g : gs) {
    for (double x : g.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

}  // namespace

RunRecord tta_run(const ToyBackbone& backbone, const SourceLibrary& library,
                  const GuardrailSet& guardrail, const TargetStream& stream,
                  const TtaConfig& cfg0, Ablation ablation,
                  std::uint64_t seed) {
  if (stream.batches.empty()) {
    throw std::invalid_argument("tta_run: empty stream");
  }
  EffectiveAblation eff = apply_ablation(cfg0, ablation);
  const TtaConfig& cfg = eff.cfg;
  RngState rng = RngState(seed).fork(0x77A);

  RunRecord rec;
  rec.ablation = ablation;
  rec.seed = seed;

  // structure initialization: retrieval, masks, tail reset
  auto init_adapters = [&](const StreamBatch& first_batch) {
    std::vector<SvdAdapter> adapters = retrieve_and_init(
        library, task_embedding(first_batch.inputs), &rec.retrieved_task_id);
    std::vector<PlasticityMask> masks;
    for (auto& a : adapters) {
      masks.push_back(build_mask_variant(a.sigma, cfg.alpha, eff.space, &rng));
    }
    if (eff.reset) {
      for (std::size_t l = 0; l < adapters.size(); ++l) {
        adapters[l] = reset_tail(adapters[l], masks[l]);
      }
    }
    return std::make_pair(std::move(adapters), std::move(masks));
  };

  auto [adapters, masks] = init_adapters(stream.batches.front());
  rec.anchor_adapters = adapters;
  rec.masks = masks;

  AdaptedModel model(backbone);
  model.rebuild(adapters);

  ReliabilityHistory hist(cfg.l, cfg.kappa);
  std::size_t guard_cursor = 0;
  double noise_std = cfg.noise_std;
  bool noise_halved = false;
  int current_segment = stream.batches.front().segment_id;
  std::deque<std::vector<Tensor2D>> accum;

  for (const auto& batch : stream.batches) {
    if (cfg.reretrieve_per_segment && batch.segment_id != current_segment) {
      auto [fresh, fresh_masks] = init_adapters(batch);
      adapters = std::move(fresh);
      masks = std::move(fresh_masks);
      model.rebuild(adapters);
      hist = ReliabilityHistory(cfg.l, cfg.kappa);
      accum.clear();
    }
    current_segment = batch.segment_id;

    StepRow row;
    row.t = batch.t;
    row.segment = batch.segment_id;

    // prequential predictions before any update from this batch
    std::vector<Distribution> dists;
    for (const auto& q : batch.canonical_inputs) {
      ForwardTrace t = backbone_forward(model, q);
      dists.push_back(clean_distribution(t));
      row.predictions.push_back(argmax(dists.back().probs));
    }

    // stochastic candidates and pseudo-labels
    std::vector<PseudoLabel> pseudo;
    std::vector<std::vector<int>> cand_labels;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      auto cands = generate_candidates(model, batch.canonical_inputs[b],
                                       cfg.m_candidates, noise_std, rng);
      std::vector<int> labels;
      for (const auto& c : cands) labels.push_back(c.label);
      cand_labels.push_back(std::move(labels));
      pseudo.push_back(select_pseudo_label(cands, dists[b]));
    }

    row.sig = compute_signals(dists, pseudo, cand_labels);
    hist.observe(row.sig);

    int a_p = 0, a_f = 0;
    if (hist.has_indicators()) {
      row.raw = hist.latest_raw();
      row.smoothed = {smoothed_indicator(hist, 'H'),
                      smoothed_indicator(hist, 'P'),
                      smoothed_indicator(hist, 'C')};
      const int ec_for_fallback =
          cfg.raw_consistency_fallback ? row.raw[2] : row.smoothed[2];
      std::tie(a_p, a_f) =
          activation_events(row.smoothed[0], row.smoothed[1], ec_for_fallback);
    }
    if (eff.partial_only) {
      a_p = (a_p || a_f) ? 1 : 0;
      a_f = 0;
    }
    if (eff.full_only) a_p = 0;
    row.a_p = a_p;
    row.a_f = a_f;
    row.eta = modulated_lr(cfg, a_p, a_f);

    // composite loss and gradients
    LossGrads lp, lproc, lguard;
    Sc3Result sc3;
    if (eff.entropy_only) {
      LossGrads ent = loss_entropy_only(model, batch.canonical_inputs);
      sc3.breakdown.l_total = ent.value;
      sc3.g_delta = std::move(ent.g_delta);
    } else {
      if (cfg.lambda1 > 0.0) {
        lp = loss_prob(model, batch.canonical_inputs, batch.perturbed_inputs,
                       row.predictions, cfg.tau_c);
      }
      if (cfg.lambda2 > 0.0) {
        lproc = loss_proc(model, batch.canonical_inputs, pseudo, cfg.tau,
                          cfg.w_h);
      }
      if (cfg.lambda3 > 0.0) {
        std::vector<GuardrailExample> gbatch;
        if (cfg.resample_guard_per_step) {
          for (int i = 0; i < cfg.batch_size; ++i) {
            gbatch.push_back(guardrail.examples[static_cast<std::size_t>(
                rng.next_u64() % guardrail.examples.size())]);
          }
        } else {
          for (int i = 0; i < cfg.batch_size; ++i) {
            gbatch.push_back(
                guardrail.examples[guard_cursor % guardrail.examples.size()]);
            ++guard_cursor;
          }
        }
        lguard = loss_guard(model, gbatch);
      }
      sc3 = compose_sc3(lp, lproc, lguard, cfg.lambda1, cfg.lambda2,
                        cfg.lambda3, backbone);
    }
    row.loss = sc3.breakdown;

    const bool finite =
        std::isfinite(sc3.breakdown.l_total) && grads_finite(sc3.g_delta);
    if (!finite) {
      if (!noise_halved) {
        std::cerr << "tta_run: non-finite loss at step " << batch.t
                  << "; halving noise_std and skipping the step\n";
        noise_std *= 0.5;
        noise_halved = true;
        rec.steps.push_back(std::move(row));
        continue;
      }
      throw std::runtime_error("tta_run: non-finite loss recurred at step " +
                               std::to_string(batch.t));
    }

    // masked descent on the plastic coordinates
    if (row.eta > 0.0) {
      const std::vector<Tensor2D>* g_use = &sc3.g_delta;
      std::vector<Tensor2D> averaged;
      if (cfg.grad_accum) {
        accum.push_back(sc3.g_delta);
        while (static_cast<int>(accum.size()) > cfg.l) accum.pop_front();
        averaged = accum.front();
        for (std::size_t w = 1; w < accum.size(); ++w) {
          for (std::size_t l = 0; l < averaged.size(); ++l) {
            add_inplace(averaged[l], accum[w][l]);
          }
        }
        for (auto& g : averaged) {
          scale_inplace(g, 1.0 / static_cast<double>(accum.size()));
        }
        g_use = &averaged;
      }
      for (std::size_t l = 0; l < adapters.size(); ++l) {
        SvdAdapter& a = adapters[l];
        const Tensor2D& g = (*g_use)[l];
        Vec g_sigma = masked_sigma_grad(a.u, a.v, g, masks[l]);
        auto [g_u, g_v] = masked_factor_grads(a, g, masks[l]);
        for (int j = 0; j < a.rank(); ++j) {
          if (masks[l].is_kept(j)) continue;  // anchors stay bit-identical
          a.sigma[j] -= row.eta * g_sigma[j];
          for (int i = 0; i < a.u.rows; ++i) {
            a.u.at(i, j) -= row.eta * g_u.at(i, j);
          }
          for (int i = 0; i < a.v.rows; ++i) {
            a.v.at(i, j) -= row.eta * g_v.at(i, j);
          }
        }
      }
      model.rebuild(adapters);
    }

    rec.steps.push_back(std::move(row));
  }

  rec.final_adapters = std::move(adapters);
  rec.final_noise_std = noise_std;
  return rec;
}

RunSummary evaluate_stream(const RunRecord& record, const TargetStream& stream,
                           const ToyBackbone& backbone,
                           const std::vector<SourceTask>& sources) {
  if (record.steps.size() != stream.batches.size()) {
    throw std::invalid_argument("evaluate_stream: record/stream length mismatch");
  }
  RunSummary out;
  out.retrieved_task_id = record.retrieved_task_id;

  std::vector<double> seg_correct(stream.schedule.segments.size(), 0.0);
  std::vector<double> seg_total(stream.schedule.segments.size(), 0.0);
  double correct = 0.0, total = 0.0;
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    const auto& labels = eval_access::labels(stream.batches[i]);
    const auto& preds = record.steps[i].predictions;
    int hit = 0;
    for (std::size_t b = 0; b < labels.size(); ++b) {
      hit += (preds[b] == labels[b]) ? 1 : 0;
    }
    out.per_step_acc.push_back(static_cast<double>(hit) /
                               static_cast<double>(labels.size()));
    correct += hit;
    total += static_cast<double>(labels.size());
    const int seg = record.steps[i].segment;
    seg_correct[seg] += hit;
    seg_total[seg] += static_cast<double>(labels.size());
  }
  out.overall_acc = correct / total;
  for (const auto& seg : stream.schedule.segments) {
    out.per_segment.push_back({seg.segment_id, seg.task_id, seg.flavor,
                               seg_correct[seg.segment_id] /
                                   std::max(seg_total[seg.segment_id], 1.0)});
  }

  // source retention on held-out validation splits, canonicalized by the
  // true template
  std::vector<Vec> xs;
  std::vector<int> ys;
  for (const auto& task : sources) {
    for (std::size_t i = 0; i < task.val.xs.size(); ++i) {
      xs.push_back(canonical_form(task.val.xs[i], task));
      ys.push_back(task.val.ys[i]);
    }
  }
  out.retention_before = model_accuracy(backbone, record.anchor_adapters, xs, ys);
  out.retention_after = model_accuracy(backbone, record.final_adapters, xs, ys);
  out.retention_delta = out.retention_after - out.retention_before;
  return out;
}

void write_signals_csv(const RunRecord& record, const std::string& path) {
  CsvWriter csv(path, {"t", "H", "P", "C", "E_H", "E_P", "E_C", "E_H_smooth",
                       "E_P_smooth", "E_C_smooth", "A_p", "A_f", "eta_t"});
  for (const auto& row : record.steps) {
    csv.row({std::to_string(row.t), fmt_double(row.sig.h), fmt_double(row.sig.p),
             fmt_double(row.sig.c), std::to_string(row.raw[0]),
             std::to_string(row.raw[1]), std::to_string(row.raw[2]),
             std::to_string(row.smoothed[0]), std::to_string(row.smoothed[1]),
             std::to_string(row.smoothed[2]), std::to_string(row.a_p),
             std::to_string(row.a_f), fmt_double(row.eta)});
  }
}

void write_steps_csv(const RunRecord& record, const RunSummary& summary,
                     const std::string& path) {
  CsvWriter csv(path, {"t", "segment", "accuracy", "L_prob", "L_proc",
                       "L_guard", "L_total", "eta_t"});
  for (std::size_t i = 0; i < record.steps.size(); ++i) {
    const auto& row = record.steps[i];
    csv.row({std::to_string(row.t), std::to_string(row.segment),
             fmt_double(summary.per_step_acc[i]), fmt_double(row.loss.l_prob),
             fmt_double(row.loss.l_proc), fmt_double(row.loss.l_guard),
             fmt_double(row.loss.l_total), fmt_double(row.eta)});
  }
}

nlohmann::json summary_to_json(const RunSummary& summary,
                               const RunRecord& record) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : summary.per_segment) {
    segs.push_back({{"segment_id", s.segment_id},
                    {"task_id", s.task_id},
                    {"flavor", static_cast<int>(s.flavor)},
                    {"accuracy", s.accuracy}});
  }
  return nlohmann::json{
      {"overall_acc", summary.overall_acc},
      {"per_segment", segs},
      {"retention_before", summary.retention_before},
      {"retention_after", summary.retention_after},
      {"retention_delta", summary.retention_delta},
      {"retrieved_task_id", summary.retrieved_task_id},
      {"ablation", ablation_name(record.ablation)},
      {"seed", record.seed},
      {"n_steps", record.steps.size()},
      {"final_noise_std", record.final_noise_std}};
}

}  // namespace syco
