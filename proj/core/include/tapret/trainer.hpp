#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tapret/checkpoint.hpp"
#include "tapret/config.hpp"
#include "tapret/data.hpp"
#include "tapret/eval.hpp"
#include "tapret/graph.hpp"
#include "tapret/model.hpp"
#include "tapret/objective.hpp"

namespace tapret {

// Leaf vars of every trainable parameter, in for_each_param order.
std::vector<Var> param_vars(const ModelVars& mv);

struct BatchLoss {
  Var loss;
  Var sim;  // the B x B similarity matrix the loss was taken over
};

// Forward pass for one batch of (tokens, frames) pairs: encode, pool
// (text-conditioned when pooling is tap), similarity matrix, loss.
BatchLoss build_batch_loss(Graph& g, const std::vector<const Tensor*>& tokens,
                           const std::vector<const Tensor*>& frames, const ModelVars& mv,
                           Pooling pooling, LossKind loss, const LossConfig& loss_cfg);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  RetrievalReport val;
};

struct TrainResult {
  Checkpoint best;
  int best_epoch = 0;
  double best_score = 0.0;  // validation R@1 summed over both directions
  RetrievalReport epoch0_val;
  std::vector<double> step_losses;
  std::vector<EpochRecord> epochs;
};

// Deterministic given (seed, config, data). Shuffles pairs per epoch, drops
// the final partial batch, logs "step,epoch,loss" rows to metrics_csv and a
// per-epoch validation summary to info. Aborts with a similarity-matrix dump
// if the loss goes non-finite.
TrainResult train(const TrainConfig& cfg, const RetrievalDataset& train_ds,
                  const RetrievalDataset& val_ds, std::ostream* metrics_csv = nullptr,
                  std::ostream* info = nullptr);

// ---- finite-difference gradient checking ----

struct GradcheckDims {
  int batch = 4;
  int frames = 6;
  int tokens = 5;
  int d_in = 8;
  int hidden = 8;
  int d = 16;
  int d_p = 8;
};

struct GradcheckEntry {
  std::string param;
  double max_rel_err = 0.0;
};

struct GradcheckReport {
  Pooling pooling;
  LossKind loss;
  bool stop_gradient_prior = false;
  std::vector<GradcheckEntry> entries;

  double worst() const;
  bool passed(double tol) const { return worst() <= tol; }
};

// Central differences at double precision against the analytic backward
// pass, over every registered parameter.
GradcheckReport run_gradcheck(Pooling pooling, LossKind loss, bool stop_gradient_prior,
                              const GradcheckDims& dims = {}, std::uint64_t seed = 20240601,
                              double fd_step = 1e-5);

}  // namespace tapret
