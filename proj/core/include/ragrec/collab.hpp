#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "ragrec/corpus.hpp"

namespace ragrec {

// User-item interaction graph with contiguous indices and deduplicated
// edges. Edge order follows first appearance in the corpus.
struct BipartiteGraph {
  std::vector<std::string> user_ids;
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, int> user_index;
  std::unordered_map<std::string, int> item_index;
  std::vector<std::pair<int, int>> edges;  // (user, item)
  std::vector<std::vector<int>> user_adj;  // user -> items
  std::vector<std::vector<int>> item_adj;  // item -> users

  int user_count() const { return static_cast<int>(user_ids.size()); }
  int item_count() const { return static_cast<int>(item_ids.size()); }
  int user_degree(int u) const { return static_cast<int>(user_adj[u].size()); }
  int item_degree(int i) const { return static_cast<int>(item_adj[i].size()); }

  static BipartiteGraph from_corpus(const Corpus& corpus);
};

struct CollabParams {
  Eigen::MatrixXd user_emb;  // |U| x d, layer-0
  Eigen::MatrixXd item_emb;  // |I| x d, layer-0
  int layers = 0;
};

struct PropagationResult {
  std::vector<Eigen::MatrixXd> user_layers;  // layers 0..L
  std::vector<Eigen::MatrixXd> item_layers;
  Eigen::MatrixXd user_mean;  // mean over layers
  Eigen::MatrixXd item_mean;
};

// Symmetric-normalized neighborhood averaging:
//   e_u^(l+1) = sum_i 1/sqrt(deg(u) deg(i)) e_i^(l)   (and symmetrically).
// Isolated nodes propagate to zero. The returned mean averages layers 0..L.
PropagationResult propagate(const BipartiteGraph& graph, const Eigen::MatrixXd& user0,
                            const Eigen::MatrixXd& item0, int layers);

struct CollabTrainConfig {
  int dim = 64;
  int layers = 2;
  double lr = 1e-3;
  int epochs = 200;
  int batch_size = 1024;
  int neg_samples = 1;
  double l2_reg = 1e-4;
  std::uint64_t seed = 42;
};

struct BprTriple {
  int user;
  int pos;
  int neg;
};

// Mean pairwise ranking loss over the triples, scored on propagated
// embeddings, plus L2 on the sampled layer-0 (ego) embeddings. When
// grad_user/grad_item are non-null they receive dLoss/dE0.
double bpr_loss_and_grad(const BipartiteGraph& graph, const Eigen::MatrixXd& user0,
                         const Eigen::MatrixXd& item0, int layers,
                         const std::vector<BprTriple>& triples, double l2_reg,
                         Eigen::MatrixXd* grad_user = nullptr,
                         Eigen::MatrixXd* grad_item = nullptr);

struct CollabTrainLog {
  std::vector<double> epoch_loss;
};

// Seeded SGD on the pairwise objective with uniform negative sampling.
// Deterministic for a fixed seed; aborts with diagnostics if the loss
// becomes non-finite.
CollabParams train_bpr(const BipartiteGraph& graph, const CollabTrainConfig& config,
                       CollabTrainLog* log = nullptr);

// Layer-averaged propagated item embeddings (the e_colla vectors).
Eigen::MatrixXd final_item_embeddings(const BipartiteGraph& graph, const CollabParams& params);

}  // namespace ragrec
