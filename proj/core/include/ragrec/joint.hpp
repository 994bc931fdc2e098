#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace ragrec {

// Two-layer projector mapping text space into collaborative space:
//   z = W2 * tanh(W1 x + b1) + b2
struct ProjectorParams {
  Eigen::MatrixXd W1;  // h x d_text
  Eigen::VectorXd b1;  // h
  Eigen::MatrixXd W2;  // d_colla x h
  Eigen::VectorXd b2;  // d_colla

  int input_dim() const { return static_cast<int>(W1.cols()); }
  int hidden_dim() const { return static_cast<int>(W1.rows()); }
  int output_dim() const { return static_cast<int>(W2.rows()); }
};

Eigen::VectorXd project(const ProjectorParams& params, const Eigen::VectorXd& e_text);

struct SslConfig {
  double tau = 0.1;  // tau = 1 reproduces the plain objective without scaling
  double lr = 0.05;
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 42;
};

using EmbeddingPair = std::pair<Eigen::VectorXd, Eigen::VectorXd>;  // (e_text, e_colla)

// Bidirectional contrastive alignment loss over the batch: for each pair,
// minus the log-softmax of the matched cosine similarity against all batch
// candidates, in both the text->colla and colla->text directions, with
// similarities divided by tau. Mean over the batch; always >= 0 up to
// rounding. A zero-norm projected vector or collaborative vector is an
// error (cosine undefined).
double ssl_loss(const std::vector<EmbeddingPair>& batch, const ProjectorParams& params,
                double tau);

double ssl_loss_and_grad(const std::vector<EmbeddingPair>& batch, const ProjectorParams& params,
                         double tau, ProjectorParams* grad);

struct SslTrainLog {
  std::vector<double> epoch_loss;
};

// Seeded mini-batch SGD over uniformly sampled items. Hidden width defaults
// to twice the output dimension. Needs at least 2 items (in-batch negatives).
ProjectorParams train_projector(const std::vector<EmbeddingPair>& pairs, const SslConfig& config,
                                SslTrainLog* log = nullptr);

// Concatenation of title and description embeddings (text channel).
std::vector<float> concat_text(const std::vector<float>& e_title,
                               const std::vector<float>& e_desc);

struct MixedEmbedding {
  std::vector<float> vector;          // [text_norm || colla_norm || ssl_norm]
  std::array<int, 3> segment_dims{};  // text, colla, ssl
};

// Unit-normalizes each channel and concatenates text -> colla -> ssl.
// A zero vector in any channel is an error naming the channel.
MixedEmbedding mix(const std::vector<float>& e_text, const std::vector<float>& e_colla,
                   const std::vector<float>& e_ssl);

}  // namespace ragrec
