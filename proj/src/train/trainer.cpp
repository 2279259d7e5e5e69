#include "sqa/train/trainer.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "sqa/common/error.hpp"
#include "sqa/nn/adam.hpp"

namespace sqa::train {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json history_json(const std::vector<EpochRecord>& h) {
  auto j = nlohmann::json::array();
  const auto num = [](double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); };
  for (const auto& e : h) j.push_back({e.epoch, num(e.loss), num(e.ce), num(e.mse), num(e.accuracy)});
  return j;
}

std::vector<EpochRecord> history_from_json(const nlohmann::json& j) {
  std::vector<EpochRecord> h;
  const auto num = [](const nlohmann::json& v) { return v.is_null() ? kNaN : v.get<double>(); };
  for (const auto& e : j) h.push_back({e.at(0).get<int>(), num(e.at(1)), num(e.at(2)), num(e.at(3)), num(e.at(4))});
  return h;
}

std::string epoch_line(const std::string& stage, const EpochRecord& e, double lr, std::uint64_t seed) {
  std::string s = "stage=" + stage + " epoch=" + std::to_string(e.epoch) + " loss=" + format_real(e.loss);
  if (!std::isnan(e.ce)) s += " ce=" + format_real(e.ce);
  if (!std::isnan(e.mse)) s += " mse=" + format_real(e.mse);
  if (!std::isnan(e.accuracy)) s += " accuracy=" + format_real(e.accuracy);
  return s + " lr=" + format_real(lr) + " seed=" + std::to_string(seed);
}

void check_finite(double v, const std::string& stage, int epoch) {
  if (!std::isfinite(v))
    throw Error(errc::kNumeric, stage + ": non-finite loss at epoch " + std::to_string(epoch));
}

/// Shared epoch loop. `step` runs forward + backward on one batch and
/// returns its record (loss, ce, mse, correct count in `accuracy`).
template <typename Step>
std::vector<EpochRecord> run_stage(const std::string& stage, nn::Model& model, const Dataset& data,
                                   const StageParams& params, Step step) {
  nn::Adam adam({params.learning_rate});
  Progress progress(stage, params);
  nlohmann::json state;
  const int start = progress.resume(model, adam, state);
  auto history = start > 0 ? history_from_json(state.at("history")) : std::vector<EpochRecord>{};
  long global = 0;
  for (int e = 0; e < start; ++e)
    global += static_cast<long>((data.size() + params.batch_size - 1) / params.batch_size);
  for (int epoch = start; epoch < params.epochs; ++epoch) {
    EpochRecord rec{epoch, 0.0, 0.0, 0.0, 0.0};
    int nb = 0;
    for (const auto& rows : epoch_batches(data.size(), params.batch_size, params.seed, epoch)) {
      model.zero_grad();
      const auto b = step(rows, derive_seed(params.seed, "dropout", static_cast<std::uint64_t>(global++)));
      adam.step(model.trainable());
      rec.loss += b.loss;
      rec.ce += b.ce;
      rec.mse += b.mse;
      rec.accuracy += b.accuracy;
      ++nb;
    }
    rec.loss /= nb;
    rec.ce /= nb;
    rec.mse /= nb;
    rec.accuracy /= static_cast<double>(data.size());
    check_finite(rec.loss, stage, epoch);
    history.push_back(rec);
    emit(params.log, epoch_line(stage, rec, params.learning_rate, params.seed));
    progress.save(model, adam, {{"history", history_json(history)}}, epoch + 1);
  }
  return history;
}

void require_classes(const Dataset& data, int classes) {
  if (data.labels.size() != data.size()) throw Error(errc::kInvalidArgument, "dataset has no class labels");
  std::set<int> seen(data.labels.begin(), data.labels.end());
  for (int c = 0; c < classes; ++c)
    if (!seen.count(c)) throw Error(errc::kInvalidArgument, "class " + std::to_string(c) + " is absent from the training data");
}

int correct(const nn::Tensor& logits, std::span<const int> labels) {
  const int c = logits.dim(1);
  int hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int best = 0;
    for (int j = 1; j < c; ++j)
      if (logits[i * c + j] > logits[i * c + best]) best = j;
    hits += best == labels[i];
  }
  return hits;
}

template <typename T>
std::vector<T> gather(const std::vector<T>& v, std::span<const std::size_t> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(v[r]);
  return out;
}

}  // namespace

StageResult pretrain_degradation_classifier(const Dataset& data, const nn::ConvNetSpec& convnet,
                                            const StageParams& params) {
  data.validate();
  require_classes(data, 5);
  StageResult r{nn::Model(nn::ModelSpec::classifier(convnet), derive_seed(params.seed, "classifier-init")), {}};
  r.history = run_stage("degr_classifier", r.model, data, params, [&](std::span<const std::size_t> rows, std::uint64_t ds) {
    const auto labels = gather(data.labels, rows);
    auto out = r.model.forward(data.batch(rows), nn::Mode::kTrain, ds);
    auto ce = cross_entropy(out.class_logits, labels);
    nn::OutputGrads g;
    g.class_logits = std::move(ce.grad);
    r.model.backward(g);
    return EpochRecord{0, ce.loss, ce.loss, kNaN, static_cast<double>(correct(out.class_logits, labels))};
  });
  return r;
}

StageResult pretrain_autoencoder(const Dataset& data, const nn::ConvNetSpec& convnet, const StageParams& params) {
  data.validate();
  StageResult r{nn::Model(nn::ModelSpec::autoencoder(convnet), derive_seed(params.seed, "ae-init")), {}};
  r.history = run_stage("ae_pretrain", r.model, data, params, [&](std::span<const std::size_t> rows, std::uint64_t ds) {
    const auto x = data.batch(rows);
    auto out = r.model.forward(x, nn::Mode::kTrain, ds);
    auto rec = reconstruction_error(out.reconstruction, x);
    nn::OutputGrads g;
    g.reconstruction = std::move(rec.grad);
    r.model.backward(g);
    return EpochRecord{0, rec.loss, kNaN, kNaN, kNaN};
  });
  for (auto& e : r.history) e.accuracy = kNaN;
  return r;
}

TaskLoss task_loss(nn::Model& model, const nn::Tensor& x, std::span<const int> labels, std::span<const double> mos,
                   nn::Mode mode, std::uint64_t dropout_seed, nn::OutputGrads* grads) {
  auto out = model.forward(x, mode, dropout_seed);
  if (out.mos.empty()) throw Error(errc::kInvalidArgument, "task model has no regression head");
  TaskLoss t;
  auto mse = mean_squared_error(out.mos, mos);
  t.mse = mse.loss;
  if (grads) grads->mos = std::move(mse.grad);
  if (!labels.empty()) {
    if (out.class_logits.empty()) throw Error(errc::kInvalidArgument, "labels given to a single-task model");
    auto ce = cross_entropy(out.class_logits, labels);
    t.ce = ce.loss;
    if (grads) grads->class_logits = std::move(ce.grad);
  }
  t.total = t.ce + t.mse;
  return t;
}

FinetuneResult finetune(const TrainingRecipe& recipe, const Dataset& train, const nn::Checkpoint* init,
                        const nn::ConvNetSpec& convnet, const StageParams& params) {
  recipe.validate();
  train.validate();
  const std::string name(to_string(recipe.variant));
  if (train.mos.size() != train.size()) throw Error(errc::kInvalidArgument, name + ": training data lacks MOS");
  if (recipe.multi_task()) {
    if (train.label_kind != to_string(recipe.aux))
      throw Error(errc::kInvalidArgument, name + " needs " + std::string(to_string(recipe.aux)) + " labels, data carries '" +
                                              train.label_kind + "'");
    if (train.labels.size() != train.size()) throw Error(errc::kInvalidArgument, name + ": missing auxiliary labels");
  }
  const auto tag = stage_tag(recipe.init_from);
  if (tag.empty() && init) throw Error(errc::kConfig, name + " trains from random initialization; no checkpoint expected");
  if (!tag.empty()) {
    if (!init) throw Error(errc::kDependency, name + " needs a " + std::string(tag) + " checkpoint");
    if (init->stage != tag)
      throw Error(errc::kDependency, name + " needs a " + std::string(tag) + " checkpoint, got '" + init->stage + "'");
    if (!params.config_hash.empty() && init->config_hash != params.config_hash)
      throw Error(errc::kDependency, name + ": checkpoint config hash " + init->config_hash +
                                         " does not match the experiment (" + params.config_hash + ")");
  }

  StageParams p = params;
  p.epochs = recipe.epochs;
  p.learning_rate = recipe.learning_rate;
  p.batch_size = recipe.batch_size;
  const auto spec = nn::ModelSpec::task(convnet, recipe.multi_task(), true);
  FinetuneResult r{{nn::Model(spec, derive_seed(p.seed, "finetune-init")), {}}, {}};
  auto& model = r.stage.model;
  if (init) {
    r.transfer = nn::transfer_weights(*init, model);
  } else {
    for (const auto& param : model.parameters()) {
      const std::string g(nn::group_of(param.name));
      if (r.transfer.initialized.empty() || r.transfer.initialized.back() != g) r.transfer.initialized.push_back(g);
    }
  }
  emit(p.log, "stage=finetune_" + name + " event=transfer " + r.transfer.render());

  r.stage.history = run_stage("finetune_" + name, model, train, p, [&](std::span<const std::size_t> rows, std::uint64_t ds) {
    const auto mos = gather(train.mos, rows);
    const auto labels = recipe.multi_task() ? gather(train.labels, rows) : std::vector<int>{};
    nn::OutputGrads g;
    const auto loss = task_loss(model, train.batch(rows), labels, mos, nn::Mode::kTrain, ds, &g);
    model.backward(g);
    return EpochRecord{0, loss.total, recipe.multi_task() ? loss.ce : kNaN, loss.mse, kNaN};
  });
  for (auto& e : r.stage.history) e.accuracy = kNaN;
  return r;
}

std::vector<double> predict_mos(nn::Model& model, const Dataset& data, int batch_size) {
  if (!model.spec().regression) throw Error(errc::kInvalidArgument, "model has no regression head");
  std::vector<double> out(data.size());
  for (const auto& rows : sequential_batches(data.size(), batch_size)) {
    const auto latent = model.encode(data.batch(rows), nn::Mode::kEval);
    const auto mos = model.head_forward(latent, nn::HeadKind::kRegression, nn::Mode::kEval).mos;
    for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = mos[i];
  }
  return out;
}

double classification_accuracy(nn::Model& model, const Dataset& data, int batch_size) {
  if (data.labels.size() != data.size()) throw Error(errc::kInvalidArgument, "dataset has no class labels");
  int hits = 0;
  for (const auto& rows : sequential_batches(data.size(), batch_size)) {
    const auto latent = model.encode(data.batch(rows), nn::Mode::kEval);
    const auto out = model.head_forward(latent, nn::HeadKind::kClassification, nn::Mode::kEval);
    hits += correct(out.class_logits, gather(data.labels, rows));
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace sqa::train
