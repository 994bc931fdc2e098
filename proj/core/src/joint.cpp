#include "ragrec/joint.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ragrec/error.hpp"

namespace ragrec {

Eigen::VectorXd project(const ProjectorParams& params, const Eigen::VectorXd& e_text) {
  if (e_text.size() != params.W1.cols()) {
    throw DataError("projector input dim " + std::to_string(e_text.size()) + " != " +
                    std::to_string(params.W1.cols()));
  }
  Eigen::VectorXd hidden = ((params.W1 * e_text) + params.b1).array().tanh();
  return params.W2 * hidden + params.b2;
}

namespace {

// Shared forward/backward for the bidirectional contrastive objective.
double ssl_loss_impl(const std::vector<EmbeddingPair>& batch, const ProjectorParams& params,
                     double tau, ProjectorParams* grad) {
  const int n = static_cast<int>(batch.size());
  if (n < 1) throw UsageError("ssl loss needs a non-empty batch");
  if (tau <= 0) throw UsageError("temperature must be > 0");

  const int d_text = params.input_dim();
  const int d_out = params.output_dim();
  const int h = params.hidden_dim();

  Eigen::MatrixXd X(d_text, n), A(h, n), Z(d_out, n), Y(d_out, n);
  for (int i = 0; i < n; ++i) {
    const auto& [x, y] = batch[static_cast<std::size_t>(i)];
    if (x.size() != d_text) throw DataError("text embedding dim mismatch in batch");
    if (y.size() != d_out) throw DataError("collaborative embedding dim mismatch in batch");
    X.col(i) = x;
    Y.col(i) = y;
  }
  A = ((params.W1 * X).colwise() + params.b1).array().tanh();
  Z = (params.W2 * A).colwise() + params.b2;

  Eigen::VectorXd zn(n), yn(n);
  for (int i = 0; i < n; ++i) {
    zn(i) = Z.col(i).norm();
    yn(i) = Y.col(i).norm();
    if (zn(i) == 0.0) throw DataError("projected vector has zero norm; cosine undefined");
    if (yn(i) == 0.0) throw DataError("collaborative vector has zero norm; cosine undefined");
  }

  // C(i,v) = cos(z_i, y_v); S = C / tau.
  Eigen::MatrixXd C = (Z.transpose() * Y).array() /
                      (zn * yn.transpose()).array();
  Eigen::MatrixXd S = C / tau;

  double loss = 0.0;
  Eigen::MatrixXd G;  // dLoss/dS
  if (grad) G.setZero(n, n);

  for (int i = 0; i < n; ++i) {
    // text -> colla: softmax over row i
    const double row_max = S.row(i).maxCoeff();
    const Eigen::ArrayXd row_exp = (S.row(i).transpose().array() - row_max).exp();
    const double row_sum = row_exp.sum();
    loss += -S(i, i) + row_max + std::log(row_sum);
    // colla -> text: softmax over column i
    const double col_max = S.col(i).maxCoeff();
    const Eigen::ArrayXd col_exp = (S.col(i).array() - col_max).exp();
    const double col_sum = col_exp.sum();
    loss += -S(i, i) + col_max + std::log(col_sum);

    if (grad) {
      for (int v = 0; v < n; ++v) {
        G(i, v) += row_exp(v) / row_sum;
        G(v, i) += col_exp(v) / col_sum;
      }
      G(i, i) -= 2.0;
    }
  }
  loss /= static_cast<double>(n);

  if (grad) {
    G /= static_cast<double>(n);

    // dLoss/dz_i = sum_v (G_iv / tau) [ y_v/(|z_i||y_v|) - c_iv z_i/|z_i|^2 ]
    Eigen::MatrixXd dZ(d_out, n);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d_out);
      double along_z = 0.0;
      for (int v = 0; v < n; ++v) {
        const double g = G(i, v) / tau;
        acc += g / (zn(i) * yn(v)) * Y.col(v);
        along_z += g * C(i, v);
      }
      dZ.col(i) = acc - (along_z / (zn(i) * zn(i))) * Z.col(i);
    }

    grad->W2 = dZ * A.transpose();
    grad->b2 = dZ.rowwise().sum();
    Eigen::MatrixXd dH = (params.W2.transpose() * dZ).array() * (1.0 - A.array().square());
    grad->W1 = dH * X.transpose();
    grad->b1 = dH.rowwise().sum();
  }
  return loss;
}

}  // namespace

double ssl_loss(const std::vector<EmbeddingPair>& batch, const ProjectorParams& params,
                double tau) {
  return ssl_loss_impl(batch, params, tau, nullptr);
}

double ssl_loss_and_grad(const std::vector<EmbeddingPair>& batch, const ProjectorParams& params,
                         double tau, ProjectorParams* grad) {
  return ssl_loss_impl(batch, params, tau, grad);
}

ProjectorParams train_projector(const std::vector<EmbeddingPair>& pairs, const SslConfig& config,
                                SslTrainLog* log) {
  if (pairs.size() < 2) throw DataError("contrastive training needs at least 2 items");
  if (config.tau <= 0 || config.lr <= 0 || config.epochs < 1 || config.batch_size < 2) {
    throw UsageError("invalid ssl training config");
  }

  const int d_text = static_cast<int>(pairs[0].first.size());
  const int d_out = static_cast<int>(pairs[0].second.size());
  const int hidden = 2 * d_out;

  std::mt19937_64 rng(config.seed);
  auto gaussian_init = [&rng](Eigen::MatrixXd& m, double sigma) {
    std::normal_distribution<double> dist(0.0, sigma);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = dist(rng);
    }
  };

  ProjectorParams params;
  params.W1.resize(hidden, d_text);
  params.W2.resize(d_out, hidden);
  gaussian_init(params.W1, 1.0 / std::sqrt(static_cast<double>(d_text)));
  gaussian_init(params.W2, 1.0 / std::sqrt(static_cast<double>(hidden)));
  params.b1 = Eigen::VectorXd::Zero(hidden);
  params.b2 = Eigen::VectorXd::Zero(d_out);

  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ProjectorParams grad;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      if (end - start < 2) continue;  // a single-item batch has no negatives
      std::vector<EmbeddingPair> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(pairs[order[k]]);

      const double batch_loss = ssl_loss_and_grad(batch, params, config.tau, &grad);
      if (!std::isfinite(batch_loss)) {
        throw DataError("ssl training diverged at epoch " + std::to_string(epoch) +
                        ": loss is non-finite");
      }
      params.W1 -= config.lr * grad.W1;
      params.b1 -= config.lr * grad.b1;
      params.W2 -= config.lr * grad.W2;
      params.b2 -= config.lr * grad.b2;
      epoch_loss += batch_loss;
      ++batches;
    }
    if (!params.W1.allFinite() || !params.W2.allFinite() || !params.b1.allFinite() ||
        !params.b2.allFinite()) {
      throw DataError("ssl training diverged at epoch " + std::to_string(epoch) +
                      ": parameters are non-finite");
    }
    if (log && batches > 0) log->epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return params;
}

std::vector<float> concat_text(const std::vector<float>& e_title,
                               const std::vector<float>& e_desc) {
  if (e_title.empty()) throw DataError("missing title embedding");
  if (e_desc.empty()) {
    throw DataError("missing description embedding; run the describe stage first");
  }
  std::vector<float> out;
  out.reserve(e_title.size() + e_desc.size());
  out.insert(out.end(), e_title.begin(), e_title.end());
  out.insert(out.end(), e_desc.begin(), e_desc.end());
  return out;
}

namespace {

void append_normalized(std::vector<float>& out, const std::vector<float>& v, const char* channel) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * static_cast<double>(x);
  norm = std::sqrt(norm);
  if (v.empty() || norm == 0.0) {
    throw DataError(std::string("zero vector in channel '") + channel + "'");
  }
  for (float x : v) out.push_back(static_cast<float>(static_cast<double>(x) / norm));
}

}  // namespace

MixedEmbedding mix(const std::vector<float>& e_text, const std::vector<float>& e_colla,
                   const std::vector<float>& e_ssl) {
  MixedEmbedding m;
  m.vector.reserve(e_text.size() + e_colla.size() + e_ssl.size());
  append_normalized(m.vector, e_text, "text");
  append_normalized(m.vector, e_colla, "colla");
  append_normalized(m.vector, e_ssl, "ssl");
  m.segment_dims = {static_cast<int>(e_text.size()), static_cast<int>(e_colla.size()),
                    static_cast<int>(e_ssl.size())};
  return m;
}

}  // namespace ragrec
