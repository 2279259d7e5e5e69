#pragma once

#include <cstdint>
#include <vector>

#include "sqa/dcec/assignments.hpp"
#include "sqa/nn/checkpoint.hpp"
#include "sqa/nn/model.hpp"
#include "sqa/train/dataset.hpp"
#include "sqa/train/progress.hpp"

namespace sqa::dcec {

struct DcecConfig {
  int clusters = 5;
  int embedding_dim = 10;
  double alpha = 1.0;
  double gamma = 0.1;
  int refresh_batches = 70;
  double tolerance = 0.001;  // stop when fewer than this fraction of labels change
  int kmeans_restarts = 10;
};

struct DcecLoss {
  double total = 0.0;
  double reconstruction = 0.0;
  double clustering = 0.0;
};

/// One forward pass of a dcec model on `x` against fixed targets `p`
/// (one row per sample). Returns L_r + gamma * KL(P||Q) and, when `grads`
/// is non-null, fills the output gradients and adds the center gradient
/// into the model.
DcecLoss dcec_loss(nn::Model& model, const nn::Tensor& x, const Matrix& p, const DcecConfig& cfg, nn::Mode mode,
                   std::uint64_t dropout_seed = 0, nn::OutputGrads* grads = nullptr);

/// Embeddings of every clip in eval mode, in dataset order.
Matrix embed(nn::Model& model, const train::Dataset& data, int batch_size = 64);

struct ClusterAssignment {
  Matrix q;
  std::vector<int> labels;
};

/// Frozen-model soft and hard assignments (argmax, lowest index on ties).
ClusterAssignment assign_cluster_labels(nn::Model& model, const train::Dataset& data, int batch_size = 64);

struct DcecResult {
  nn::Model model;
  Matrix q;
  std::vector<int> labels;
  std::vector<double> label_changes;  // one entry per refresh
  bool converged = false;
  int epochs = 0;
};

/// Initializes from an autoencoder checkpoint, seeds the centers with
/// k-means on the embeddings, then trains the joint objective. P and the
/// hard labels are recomputed over the full dataset every
/// `refresh_batches` batches; training stops once the changed-label
/// fraction between consecutive refreshes drops below `tolerance`, or
/// after `params.epochs` epochs.
DcecResult train_dcec(const train::Dataset& data, const nn::Checkpoint& autoencoder, const DcecConfig& cfg,
                      const train::StageParams& params);

}  // namespace sqa::dcec
