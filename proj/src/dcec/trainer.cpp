#include "sqa/dcec/trainer.hpp"

#include <cmath>

#include "sqa/common/error.hpp"
#include "sqa/dcec/kmeans.hpp"
#include "sqa/nn/adam.hpp"
#include "sqa/train/losses.hpp"

namespace sqa::dcec {
namespace {

Matrix to_matrix(const nn::Tensor& t) {
  Matrix m(t.dim(0), t.dim(1));
  for (std::size_t i = 0; i < t.size(); ++i) m.data[i] = t[i];
  return m;
}

Matrix centers_of(nn::Model& model) { return to_matrix(model.cluster_centers()); }

Matrix rows_of(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<int>(rows.size()), m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int j = 0; j < m.cols; ++j) out(static_cast<int>(i), j) = m(static_cast<int>(rows[i]), j);
  return out;
}

nlohmann::json matrix_json(const Matrix& m) { return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  m.data = j.at("data").get<std::vector<double>>();
  return m;
}

}  // namespace

DcecLoss dcec_loss(nn::Model& model, const nn::Tensor& x, const Matrix& p, const DcecConfig& cfg, nn::Mode mode,
                   std::uint64_t dropout_seed, nn::OutputGrads* grads) {
  auto out = model.forward(x, mode, dropout_seed);
  if (out.reconstruction.empty() || out.embedding.empty())
    throw Error(errc::kInvalidArgument, "dcec_loss needs a model with decoder and embedding");
  if (p.rows != x.dim(0)) throw Error(errc::kShape, "dcec_loss: target rows do not match the batch");
  const Matrix z = to_matrix(out.embedding);
  const Matrix u = centers_of(model);
  const Matrix q = soft_assign(z, u, cfg.alpha);
  const auto rec = train::reconstruction_error(out.reconstruction, x);
  DcecLoss loss;
  loss.reconstruction = rec.loss;
  loss.clustering = kl_divergence(p, q);
  loss.total = loss.reconstruction + cfg.gamma * loss.clustering;
  if (!std::isfinite(loss.total))
    throw Error(errc::kNumeric, "non-finite dcec loss (L_r=" + train::format_real(loss.reconstruction) +
                                    " L_c=" + train::format_real(loss.clustering) + ")");
  if (grads) {
    const auto g = clustering_gradients(z, u, p, cfg.alpha);
    grads->reconstruction = rec.grad;
    grads->embedding = nn::Tensor(out.embedding.shape());
    for (std::size_t i = 0; i < g.d_embeddings.data.size(); ++i)
      grads->embedding[i] = static_cast<float>(cfg.gamma * g.d_embeddings.data[i]);
    auto& du = model.cluster_centers_grad();
    for (std::size_t i = 0; i < g.d_centers.data.size(); ++i)
      du[i] += static_cast<float>(cfg.gamma * g.d_centers.data[i]);
  }
  return loss;
}

Matrix embed(nn::Model& model, const train::Dataset& data, int batch_size) {
  Matrix z(static_cast<int>(data.size()), model.spec().dcec ? model.spec().dcec->embedding_dim : 0);
  for (const auto& rows : train::sequential_batches(data.size(), batch_size)) {
    const auto latent = model.encode(data.batch(rows), nn::Mode::kEval);
    const auto e = model.head_forward(latent, nn::HeadKind::kDcec, nn::Mode::kEval).embedding;
    const int d = e.dim(1);
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (int k = 0; k < d; ++k) z(static_cast<int>(rows[i]), k) = e[i * d + k];
  }
  return z;
}

ClusterAssignment assign_cluster_labels(nn::Model& model, const train::Dataset& data, int batch_size) {
  if (!model.spec().dcec || !model.spec().clustering)
    throw Error(errc::kInvalidArgument, "cluster labels need a model with a clustering layer");
  ClusterAssignment a;
  a.q = soft_assign(embed(model, data, batch_size), centers_of(model));
  a.labels = hard_labels(a.q);
  return a;
}

DcecResult train_dcec(const train::Dataset& data, const nn::Checkpoint& autoencoder, const DcecConfig& cfg,
                      const train::StageParams& params) {
  data.validate();
  if (autoencoder.stage != "ae_pretrain")
    throw Error(errc::kDependency, "dcec needs an ae_pretrain checkpoint, got stage '" + autoencoder.stage + "'");
  auto spec = nn::ModelSpec::dcec_model(autoencoder.spec.convnet);
  spec.dcec = nn::HeadSpec::dcec(cfg.clusters, cfg.embedding_dim);
  DcecResult r{nn::Model(spec, derive_seed(params.seed, "dcec-init")), {}, {}, {}, false, 0};
  auto& model = r.model;
  const auto report = nn::transfer_weights(autoencoder, model);
  if (!report.is_carried("embedding") || !report.is_carried("decoder"))
    throw Error(errc::kDependency, "autoencoder checkpoint lacks a matching embedding/decoder: " + report.render());

  nn::Adam adam({params.learning_rate});
  train::Progress progress("dcec", params);
  nlohmann::json state;
  const int start = progress.resume(model, adam, state);

  Matrix p;
  std::vector<int> prev;
  long batches = 0;
  if (start == 0) {
    KMeansOptions km;
    km.clusters = cfg.clusters;
    km.restarts = cfg.kmeans_restarts;
    km.seed = derive_seed(params.seed, "dcec-kmeans");
    const auto init = kmeans(embed(model, data, params.batch_size), km);
    auto& u = model.cluster_centers();
    for (std::size_t i = 0; i < init.centers.data.size(); ++i) u[i] = static_cast<float>(init.centers.data[i]);
    const auto a = assign_cluster_labels(model, data, params.batch_size);
    p = target_distribution(a.q);
    prev = a.labels;
    emit(params.log, "stage=dcec event=kmeans inertia=" + train::format_real(init.inertia));
  } else {
    p = matrix_from_json(state.at("p"));
    prev = state.at("labels").get<std::vector<int>>();
    batches = state.at("batches").get<long>();
    r.label_changes = state.at("label_changes").get<std::vector<double>>();
    r.converged = state.at("converged").get<bool>();
  }

  r.epochs = start;
  for (int epoch = start; epoch < params.epochs && !r.converged; ++epoch) {
    double sum_r = 0.0, sum_c = 0.0;
    int nb = 0;
    for (const auto& rows : train::epoch_batches(data.size(), params.batch_size, params.seed, epoch)) {
      model.zero_grad();
      nn::OutputGrads grads;
      const auto loss = dcec_loss(model, data.batch(rows), rows_of(p, rows), cfg, nn::Mode::kTrain,
                                  derive_seed(params.seed, "dropout", static_cast<std::uint64_t>(batches)), &grads);
      model.backward(grads);
      adam.step(model.trainable());
      sum_r += loss.reconstruction;
      sum_c += loss.clustering;
      ++nb;
      ++batches;
      if (batches % cfg.refresh_batches == 0) {
        const auto a = assign_cluster_labels(model, data, params.batch_size);
        const double change = label_change_fraction(prev, a.labels);
        r.label_changes.push_back(change);
        emit(params.log, "stage=dcec event=refresh epoch=" + std::to_string(epoch) + " batch=" + std::to_string(batches) +
                             " L_r=" + train::format_real(loss.reconstruction) +
                             " L_c=" + train::format_real(loss.clustering) + " label_change=" + train::format_real(change));
        p = target_distribution(a.q);
        prev = a.labels;
        if (change < cfg.tolerance) {
          r.converged = true;
          break;
        }
      }
    }
    r.epochs = epoch + 1;
    emit(params.log, "stage=dcec epoch=" + std::to_string(epoch) + " L_r=" + train::format_real(sum_r / nb) +
                         " L_c=" + train::format_real(sum_c / nb) +
                         " L_total=" + train::format_real((sum_r + cfg.gamma * sum_c) / nb));
    state = {{"p", matrix_json(p)}, {"labels", prev}, {"batches", batches}, {"label_changes", r.label_changes},
             {"converged", r.converged}};
    progress.save(model, adam, state, r.epochs);
  }
  if (!r.converged)
    warn("dcec stopped at the epoch bound (" + std::to_string(params.epochs) + ") before labels settled");
  const auto final_assign = assign_cluster_labels(model, data, params.batch_size);
  r.q = final_assign.q;
  r.labels = final_assign.labels;
  return r;
}

}  // namespace sqa::dcec
