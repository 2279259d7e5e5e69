#pragma once

#include <vector>

#include "sqa/nn/checkpoint.hpp"
#include "sqa/nn/model.hpp"
#include "sqa/train/dataset.hpp"
#include "sqa/train/losses.hpp"
#include "sqa/train/progress.hpp"
#include "sqa/train/recipe.hpp"

namespace sqa::train {

/// Epoch means over batches; fields a stage does not optimize stay NaN.
struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  double accuracy = 0.0;
};

struct StageResult {
  nn::Model model;
  std::vector<EpochRecord> history;
};

/// Cross-entropy training of convnet + classification head on `data.labels`.
StageResult pretrain_degradation_classifier(const Dataset& data, const nn::ConvNetSpec& convnet,
                                            const StageParams& params);

/// Reconstruction training of the plain convolutional autoencoder.
StageResult pretrain_autoencoder(const Dataset& data, const nn::ConvNetSpec& convnet, const StageParams& params);

/// Batch objective of a task model: ce (if `labels` given) + mse, both
/// unweighted. Fills output gradients when `grads` is non-null.
TaskLoss task_loss(nn::Model& model, const nn::Tensor& x, std::span<const int> labels, std::span<const double> mos,
                   nn::Mode mode, std::uint64_t dropout_seed = 0, nn::OutputGrads* grads = nullptr);

struct FinetuneResult {
  StageResult stage;
  nn::TransferReport transfer;
};

/// Trains a task model on the fold's training data. `init` must be the
/// checkpoint named by the recipe (null for random-init variants).
/// Hyperparameters come from the recipe; `params` supplies seed, logging
/// and resume.
FinetuneResult finetune(const TrainingRecipe& recipe, const Dataset& train, const nn::Checkpoint* init,
                        const nn::ConvNetSpec& convnet, const StageParams& params);

/// Eval-mode regression output per clip, in dataset order.
std::vector<double> predict_mos(nn::Model& model, const Dataset& data, int batch_size = 64);

/// Fraction of clips whose argmax class equals the label.
double classification_accuracy(nn::Model& model, const Dataset& data, int batch_size = 64);

}  // namespace sqa::train
