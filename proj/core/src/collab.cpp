#include "ragrec/collab.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

#include "ragrec/error.hpp"

namespace ragrec {

BipartiteGraph BipartiteGraph::from_corpus(const Corpus& corpus) {
  BipartiteGraph g;
  std::set<std::pair<int, int>> seen;
  for (const auto& x : corpus.interactions()) {
    auto [uit, uinserted] = g.user_index.try_emplace(x.user_id, g.user_count());
    if (uinserted) g.user_ids.push_back(x.user_id);
    auto [iit, iinserted] = g.item_index.try_emplace(x.item_id, g.item_count());
    if (iinserted) g.item_ids.push_back(x.item_id);
    const int u = uit->second;
    const int i = iit->second;
    if (seen.emplace(u, i).second) g.edges.emplace_back(u, i);
  }
  g.user_adj.resize(g.user_count());
  g.item_adj.resize(g.item_count());
  for (auto [u, i] : g.edges) {
    g.user_adj[u].push_back(i);
    g.item_adj[i].push_back(u);
  }
  return g;
}

namespace {

// One symmetric-normalized step: out_user = A_norm * item_in,
// out_item = A_norm^T * user_in.
void propagate_step(const BipartiteGraph& g, const Eigen::MatrixXd& user_in,
                    const Eigen::MatrixXd& item_in, Eigen::MatrixXd& user_out,
                    Eigen::MatrixXd& item_out) {
  user_out.setZero(user_in.rows(), user_in.cols());
  item_out.setZero(item_in.rows(), item_in.cols());
  for (auto [u, i] : g.edges) {
    const double w = 1.0 / std::sqrt(static_cast<double>(g.user_degree(u)) *
                                     static_cast<double>(g.item_degree(i)));
    user_out.row(u) += w * item_in.row(i);
    item_out.row(i) += w * user_in.row(u);
  }
}

}  // namespace

PropagationResult propagate(const BipartiteGraph& graph, const Eigen::MatrixXd& user0,
                            const Eigen::MatrixXd& item0, int layers) {
  if (layers < 0) throw UsageError("layer count must be >= 0");
  if (user0.rows() != graph.user_count() || item0.rows() != graph.item_count()) {
    throw DataError("embedding matrix rows do not match graph size");
  }

  PropagationResult result;
  result.user_layers.push_back(user0);
  result.item_layers.push_back(item0);
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd next_user, next_item;
    propagate_step(graph, result.user_layers.back(), result.item_layers.back(), next_user,
                   next_item);
    result.user_layers.push_back(std::move(next_user));
    result.item_layers.push_back(std::move(next_item));
  }

  result.user_mean = Eigen::MatrixXd::Zero(user0.rows(), user0.cols());
  result.item_mean = Eigen::MatrixXd::Zero(item0.rows(), item0.cols());
  for (const auto& m : result.user_layers) result.user_mean += m;
  for (const auto& m : result.item_layers) result.item_mean += m;
  result.user_mean /= static_cast<double>(layers + 1);
  result.item_mean /= static_cast<double>(layers + 1);
  return result;
}

double bpr_loss_and_grad(const BipartiteGraph& graph, const Eigen::MatrixXd& user0,
                         const Eigen::MatrixXd& item0, int layers,
                         const std::vector<BprTriple>& triples, double l2_reg,
                         Eigen::MatrixXd* grad_user, Eigen::MatrixXd* grad_item) {
  if (triples.empty()) throw UsageError("need at least one training triple");

  PropagationResult prop = propagate(graph, user0, item0, layers);
  const double inv_n = 1.0 / static_cast<double>(triples.size());

  double loss = 0.0;
  Eigen::MatrixXd g_user_prop, g_item_prop;
  if (grad_user) {
    g_user_prop.setZero(user0.rows(), user0.cols());
    g_item_prop.setZero(item0.rows(), item0.cols());
  }

  for (const auto& t : triples) {
    const auto pu = prop.user_mean.row(t.user);
    const auto qp = prop.item_mean.row(t.pos);
    const auto qn = prop.item_mean.row(t.neg);
    const double margin = pu.dot(qn) - pu.dot(qp);  // neg minus pos
    // softplus(margin) = -ln sigmoid(pos - neg), evaluated stably
    const double triple_loss =
        margin > 0 ? margin + std::log1p(std::exp(-margin)) : std::log1p(std::exp(margin));
    loss += inv_n * triple_loss;
    loss += inv_n * l2_reg *
            (user0.row(t.user).squaredNorm() + item0.row(t.pos).squaredNorm() +
             item0.row(t.neg).squaredNorm());

    if (grad_user) {
      const double sig = 1.0 / (1.0 + std::exp(-margin));  // dLoss/dmargin
      g_user_prop.row(t.user) += inv_n * sig * (qn - qp);
      g_item_prop.row(t.pos) -= inv_n * sig * pu;
      g_item_prop.row(t.neg) += inv_n * sig * pu;
    }
  }

  if (grad_user) {
    // The mean over layers of A^l is symmetric, so the adjoint of the
    // propagation is the propagation itself.
    PropagationResult back = propagate(graph, g_user_prop, g_item_prop, layers);
    *grad_user = back.user_mean;
    *grad_item = back.item_mean;
    for (const auto& t : triples) {
      grad_user->row(t.user) += inv_n * l2_reg * 2.0 * user0.row(t.user);
      grad_item->row(t.pos) += inv_n * l2_reg * 2.0 * item0.row(t.pos);
      grad_item->row(t.neg) += inv_n * l2_reg * 2.0 * item0.row(t.neg);
    }
  }
  return loss;
}

namespace {

int sample_negative(const BipartiteGraph& g, int user, std::mt19937_64& rng) {
  const auto& liked = g.user_adj[user];
  if (static_cast<int>(liked.size()) >= g.item_count()) return -1;  // nothing to sample
  std::unordered_set<int> liked_set(liked.begin(), liked.end());
  std::uniform_int_distribution<int> pick(0, g.item_count() - 1);
  for (int attempt = 0; attempt < 100; ++attempt) {
    int cand = pick(rng);
    if (!liked_set.count(cand)) return cand;
  }
  for (int cand = 0; cand < g.item_count(); ++cand) {
    if (!liked_set.count(cand)) return cand;
  }
  return -1;
}

}  // namespace

CollabParams train_bpr(const BipartiteGraph& graph, const CollabTrainConfig& config,
                       CollabTrainLog* log) {
  if (graph.edges.empty()) throw DataError("cannot train on a graph with no edges");
  if (config.dim < 1 || config.epochs < 1 || config.batch_size < 1 || config.lr <= 0 ||
      config.neg_samples < 1 || config.l2_reg < 0) {
    throw UsageError("invalid collaborative training config");
  }

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> init(0.0, 0.1);

  CollabParams params;
  params.layers = config.layers;
  params.user_emb.resize(graph.user_count(), config.dim);
  params.item_emb.resize(graph.item_count(), config.dim);
  for (Eigen::Index r = 0; r < params.user_emb.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.user_emb.cols(); ++c) params.user_emb(r, c) = init(rng);
  }
  for (Eigen::Index r = 0; r < params.item_emb.rows(); ++r) {
    for (Eigen::Index c = 0; c < params.item_emb.cols(); ++c) params.item_emb(r, c) = init(rng);
  }

  std::vector<std::size_t> edge_order(graph.edges.size());
  for (std::size_t i = 0; i < edge_order.size(); ++i) edge_order[i] = i;

  Eigen::MatrixXd grad_user, grad_item;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(edge_order.begin(), edge_order.end(), rng);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < edge_order.size(); start += config.batch_size) {
      const std::size_t end = std::min(edge_order.size(), start + config.batch_size);
      std::vector<BprTriple> triples;
      triples.reserve((end - start) * config.neg_samples);
      for (std::size_t k = start; k < end; ++k) {
        auto [u, i] = graph.edges[edge_order[k]];
        for (int s = 0; s < config.neg_samples; ++s) {
          int neg = sample_negative(graph, u, rng);
          if (neg >= 0) triples.push_back(BprTriple{u, i, neg});
        }
      }
      if (triples.empty()) continue;

      const double batch_loss =
          bpr_loss_and_grad(graph, params.user_emb, params.item_emb, config.layers, triples,
                            config.l2_reg, &grad_user, &grad_item);
      if (!std::isfinite(batch_loss)) {
        throw DataError("training diverged at epoch " + std::to_string(epoch) +
                        ": loss is non-finite");
      }
      params.user_emb -= config.lr * grad_user;
      params.item_emb -= config.lr * grad_item;
      epoch_loss += batch_loss;
      ++batches;
    }

    if (!params.user_emb.allFinite() || !params.item_emb.allFinite()) {
      throw DataError("training diverged at epoch " + std::to_string(epoch) +
                      ": parameters are non-finite");
    }
    if (log && batches > 0) log->epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
  }
  return params;
}

Eigen::MatrixXd final_item_embeddings(const BipartiteGraph& graph, const CollabParams& params) {
  return propagate(graph, params.user_emb, params.item_emb, params.layers).item_mean;
}

}  // namespace ragrec
