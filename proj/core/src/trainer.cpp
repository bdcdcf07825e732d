#include "tapret/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "tapret/optim.hpp"
#include "tapret/rng.hpp"

namespace tapret {

std::vector<Var> param_vars(const ModelVars& mv) {
  std::vector<Var> out = {
      mv.text_mlp.w1, mv.text_mlp.b1, mv.text_mlp.w2, mv.text_mlp.b2,
      mv.audio_mlp.w1, mv.audio_mlp.b1, mv.audio_mlp.w2, mv.audio_mlp.b2,
  };
  if (mv.has_tap) {
    out.insert(out.end(), {mv.tap.w_q, mv.tap.w_k, mv.tap.w_v, mv.tap.w_o,
                           mv.tap.ln_text.gamma, mv.tap.ln_text.beta,
                           mv.tap.ln_audio.gamma, mv.tap.ln_audio.beta,
                           mv.tap.ln_out.gamma, mv.tap.ln_out.beta});
  }
  return out;
}

BatchLoss build_batch_loss(Graph& g, const std::vector<const Tensor*>& tokens,
                           const std::vector<const Tensor*>& frames, const ModelVars& mv,
                           Pooling pooling, LossKind loss, const LossConfig& loss_cfg) {
  if (tokens.empty() || tokens.size() != frames.size()) {
    throw std::invalid_argument("build_batch_loss: batch must pair every caption with an audio clip");
  }
  const std::size_t b = tokens.size();

  std::vector<Var> z_t;
  z_t.reserve(b);
  for (const Tensor* t : tokens) z_t.push_back(encode_text(g, g.leaf(*t), mv.text_mlp));

  Var sim;
  if (pooling == Pooling::Tap) {
    std::vector<TapAudioProj> proj;
    proj.reserve(b);
    for (const Tensor* f : frames) {
      proj.push_back(tap_project_audio(g, encode_audio(g, g.leaf(*f), mv.audio_mlp), mv.tap));
    }
    std::vector<std::vector<Var>> grid(b);
    for (std::size_t i = 0; i < b; ++i) {
      Var q = tap_project_text(g, z_t[i], mv.tap);
      grid[i].reserve(b);
      for (std::size_t j = 0; j < b; ++j) grid[i].push_back(tap_attend(g, q, proj[j], mv.tap).z);
    }
    sim = similarity_from_conditioned(g, z_t, grid);
  } else {
    std::vector<Var> z_a;
    z_a.reserve(b);
    for (const Tensor* f : frames) {
      Var c_a = encode_audio(g, g.leaf(*f), mv.audio_mlp);
      switch (pooling) {
        case Pooling::Mean: z_a.push_back(pool_mean(g, c_a)); break;
        case Pooling::Max: z_a.push_back(pool_max(g, c_a)); break;
        case Pooling::MeanMax: z_a.push_back(pool_meanmax(g, c_a)); break;
        case Pooling::Tap: break;
      }
    }
    sim = similarity_from_pooled(g, z_t, z_a);
  }

  Var l = loss == LossKind::NtXent ? ntxent_loss(g, sim, loss_cfg.tau) : pmr_loss(g, sim, loss_cfg);
  return {l, sim};
}

namespace {

struct PairRef {
  int audio;
  int caption;
};

std::vector<PairRef> pair_list(const RetrievalDataset& ds) {
  std::vector<PairRef> pairs;
  for (std::size_t a = 0; a < ds.items.size(); ++a) {
    for (std::size_t c = 0; c < ds.items[a].captions.size(); ++c) {
      pairs.push_back({static_cast<int>(a), static_cast<int>(c)});
    }
  }
  return pairs;
}

std::string dump_matrix(const Tensor& s) {
  std::ostringstream os;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j < s.cols(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "% .6g", s.at(i, j));
      os << buf << (j + 1 < s.cols() ? " " : "");
    }
    os << '\n';
  }
  return os.str();
}

double r1_sum(const RetrievalReport& rep) {
  return rep.t2a.at(1) + rep.a2t.at(1);
}

RetrievalReport run_validation(const TrainConfig& cfg, const ModelParams& model,
                               const RetrievalDataset& val_ds, const GroundTruth& gt) {
  std::vector<int> ks = cfg.eval_ks;
  if (std::find(ks.begin(), ks.end(), 1) == ks.end()) ks.insert(ks.begin(), 1);
  Tensor scores = score_matrix_eval(val_ds, model, cfg.pooling, cfg.eval_tile, cfg.precision);
  return evaluate_retrieval(scores, gt, ks);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const RetrievalDataset& train_ds,
                  const RetrievalDataset& val_ds, std::ostream* metrics_csv, std::ostream* info) {
  cfg.validate();
  if (train_ds.items.empty()) throw std::invalid_argument("train: empty training dataset");
  std::vector<PairRef> pairs = pair_list(train_ds);
  if (static_cast<std::size_t>(cfg.batch_size) > pairs.size()) {
    throw std::invalid_argument("train: batch_size " + std::to_string(cfg.batch_size) +
                                " exceeds training pair count " + std::to_string(pairs.size()));
  }

  const int d_in = train_ds.feature_dim();
  ModelParams model = init_model(d_in, cfg.hidden, cfg.D, cfg.D_p, cfg.pooling, cfg.seed);
  Optimizer opt({cfg.optimizer, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay}, cfg.precision);
  if (cfg.precision == Precision::Single) {
    for_each_param(model, [](const std::string&, Tensor& t) { quantize_to_float(t); });
  }

  const GroundTruth val_gt = ground_truth(val_ds);
  Rng shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

  TrainResult result;
  result.epoch0_val = run_validation(cfg, model, val_ds, val_gt);
  result.best = Checkpoint::snapshot(cfg, 0, model);
  result.best_epoch = 0;
  result.best_score = r1_sum(result.epoch0_val);
  if (info) {
    *info << "epoch 0 (untrained) val:";
    for (const auto& [k, v] : result.epoch0_val.t2a.r_at) *info << " t2a_r@" << k << "=" << v;
    for (const auto& [k, v] : result.epoch0_val.a2t.r_at) *info << " a2t_r@" << k << "=" << v;
    *info << '\n';
  }
  if (metrics_csv) *metrics_csv << "step,epoch,loss\n";

  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(pairs);
    const std::size_t num_batches = pairs.size() / static_cast<std::size_t>(cfg.batch_size);
    double loss_sum = 0.0;

    for (std::size_t bi = 0; bi < num_batches; ++bi) {
      std::vector<const Tensor*> tokens, frames;
      tokens.reserve(cfg.batch_size);
      frames.reserve(cfg.batch_size);
      for (int k = 0; k < cfg.batch_size; ++k) {
        const PairRef& p = pairs[bi * static_cast<std::size_t>(cfg.batch_size) + static_cast<std::size_t>(k)];
        tokens.push_back(&train_ds.items[p.audio].captions[p.caption].tokens);
        frames.push_back(&train_ds.items[p.audio].frames);
      }

      Graph g(cfg.precision);
      ModelVars mv = register_model(g, model, true);
      BatchLoss bl = build_batch_loss(g, tokens, frames, mv, cfg.pooling, cfg.loss, cfg.loss_config());
      const double loss_value = g.scalar(bl.loss);
      if (!std::isfinite(loss_value)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(step + 1) + "\nsimilarity matrix:\n" +
                                 dump_matrix(g.value(bl.sim)));
      }
      auto grads = g.backward(bl.loss);

      std::vector<Var> vars = param_vars(mv);
      std::vector<Tensor*> ps;
      std::vector<const Tensor*> gs;
      std::size_t vi = 0;
      for_each_param(model, [&](const std::string&, Tensor& t) {
        ps.push_back(&t);
        gs.push_back(&grads.at(vars[vi++].id));
      });
      opt.step(ps, gs);

      ++step;
      loss_sum += loss_value;
      result.step_losses.push_back(loss_value);
      if (metrics_csv) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", loss_value);
        *metrics_csv << step << ',' << epoch << ',' << buf << '\n';
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = num_batches ? loss_sum / static_cast<double>(num_batches) : 0.0;
    rec.val = run_validation(cfg, model, val_ds, val_gt);
    result.epochs.push_back(rec);
    if (info) {
      *info << "epoch " << epoch << " mean_loss=" << rec.mean_loss << " val:";
      for (const auto& [k, v] : rec.val.t2a.r_at) *info << " t2a_r@" << k << "=" << v;
      for (const auto& [k, v] : rec.val.a2t.r_at) *info << " a2t_r@" << k << "=" << v;
      *info << '\n';
    }

    const double score = r1_sum(rec.val);
    if (score > result.best_score) {
      result.best_score = score;
      result.best_epoch = epoch;
      result.best = Checkpoint::snapshot(cfg, static_cast<std::uint64_t>(epoch), model);
    }
  }
  return result;
}

double GradcheckReport::worst() const {
  double w = 0.0;
  for (const GradcheckEntry& e : entries) w = std::max(w, e.max_rel_err);
  return w;
}

GradcheckReport run_gradcheck(Pooling pooling, LossKind loss, bool stop_gradient_prior,
                              const GradcheckDims& dims, std::uint64_t seed, double fd_step) {
  Rng rng(seed);
  std::vector<Tensor> tokens, frames;
  for (int i = 0; i < dims.batch; ++i) {
    Tensor tk({static_cast<std::size_t>(dims.tokens), static_cast<std::size_t>(dims.d_in)});
    for (double& x : tk.data()) x = rng.normal();
    tokens.push_back(std::move(tk));
    Tensor fr({static_cast<std::size_t>(dims.frames), static_cast<std::size_t>(dims.d_in)});
    for (double& x : fr.data()) x = rng.normal();
    frames.push_back(std::move(fr));
  }
  std::vector<const Tensor*> token_ptrs, frame_ptrs;
  for (int i = 0; i < dims.batch; ++i) {
    token_ptrs.push_back(&tokens[static_cast<std::size_t>(i)]);
    frame_ptrs.push_back(&frames[static_cast<std::size_t>(i)]);
  }

  ModelParams model = init_model(dims.d_in, dims.hidden, dims.d, dims.d_p, pooling, seed + 1);
  LossConfig loss_cfg{0.07, 1.0, stop_gradient_prior};

  auto eval_loss = [&]() {
    Graph g;
    ModelVars mv = register_model(g, model, false);
    return g.scalar(build_batch_loss(g, token_ptrs, frame_ptrs, mv, pooling, loss, loss_cfg).loss);
  };

  // analytic gradients
  std::vector<Tensor> analytic;
  {
    Graph g;
    ModelVars mv = register_model(g, model, true);
    BatchLoss bl = build_batch_loss(g, token_ptrs, frame_ptrs, mv, pooling, loss, loss_cfg);
    auto grads = g.backward(bl.loss);
    for (Var v : param_vars(mv)) analytic.push_back(grads.at(v.id));
  }

  GradcheckReport report;
  report.pooling = pooling;
  report.loss = loss;
  report.stop_gradient_prior = stop_gradient_prior;

  std::size_t pi = 0;
  for_each_param(model, [&](const std::string& name, Tensor& t) {
    GradcheckEntry entry;
    entry.param = name;
    for (std::size_t i = 0; i < t.numel(); ++i) {
      const double saved = t[i];
      t[i] = saved + fd_step;
      const double up = eval_loss();
      t[i] = saved - fd_step;
      const double down = eval_loss();
      t[i] = saved;
      const double fd = (up - down) / (2.0 * fd_step);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - fd) / std::max(1.0, std::abs(fd));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.entries.push_back(std::move(entry));
    ++pi;
  });
  return report;
}

}  // namespace tapret
