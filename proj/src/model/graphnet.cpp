#include "drpn/model/graphnet.hpp"

#include <algorithm>
#include <cmath>

#include "drpn/errors.hpp"

namespace drpn::model {

Var neighbor_aggregate(Tape& tape, const GraphIds& ids, Var centers, Var candidates, const Mask& pair_mask) {
  if (centers.cols() % ids.heads != 0) {
    throw ConfigError("width " + std::to_string(centers.cols()) + " is not divisible by " +
                      std::to_string(ids.heads) + " graph heads");
  }
  auto layout = num::AttentionLayout::single(centers.rows(), candidates.rows());
  layout.pair_mask = pair_mask;
  Var q = num::matmul(centers, tape.param(ids.w1));
  Var k = num::matmul(candidates, tape.param(ids.w2));
  Var v = num::matmul(candidates, tape.param(ids.w3));
  return num::attention(q, k, v, layout, ids.heads);
}

Var fuse_node(Tape& tape, const GraphIds& ids, Var r, Var r_hat) {
  const Var parts[] = {r, r_hat};
  Var z = num::concat_cols(parts);
  return num::elementwise_mul(num::sigmoid(num::matmul(z, tape.param(ids.wf1))),
                              num::tanh(num::matmul(z, tape.param(ids.wf2))));
}

Var encode_graph_nodes(Tape& tape, const GraphIds& ids, const NodeBatch& batch) {
  if (batch.neighbors.size() != batch.centers.size()) {
    throw ShapeError("encode_graph_nodes: " + std::to_string(batch.centers.size()) + " centers but " +
                     std::to_string(batch.neighbors.size()) + " neighbor lists");
  }
  Var c = tape.table_rows(ids.news_table, batch.centers);
  std::vector<std::size_t> pool;
  for (const auto& list : batch.neighbors) pool.insert(pool.end(), list.begin(), list.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  Var r_hat;
  if (pool.empty()) {
    r_hat = tape.constant(num::Tensor(c.rows(), c.cols()));
  } else {
    Mask pair(batch.centers.size() * pool.size(), 0);
    for (std::size_t i = 0; i < batch.centers.size(); ++i) {
      for (auto n : batch.neighbors[i]) {
        auto j = std::lower_bound(pool.begin(), pool.end(), n) - pool.begin();
        pair[i * pool.size() + std::size_t(j)] = 1;
      }
    }
    r_hat = neighbor_aggregate(tape, ids, c, tape.table_rows(ids.news_table, pool), pair);
  }
  return fuse_node(tape, ids, c, r_hat);
}

num::Tensor neighbor_weights(const num::ParamStore& store, const GraphIds& ids, std::size_t center,
                             const std::vector<std::size_t>& neighbors) {
  const auto& table = store.slot(ids.news_table).value;
  const auto& w1 = store.slot(ids.w1).value;
  const auto& w2 = store.slot(ids.w2).value;
  const std::size_t d = table.cols();
  const std::size_t dk = d / ids.heads;
  num::Tensor out(ids.heads, neighbors.size());
  if (neighbors.empty()) return out;
  auto project = [&](std::size_t row, const num::Tensor& w) {
    std::vector<double> p(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) p[j] += table(row, i) * w(i, j);
    return p;
  };
  const auto q = project(center, w1);
  for (std::size_t m = 0; m < ids.heads; ++m) {
    std::vector<double> logits;
    for (auto n : neighbors) {
      const auto k = project(n, w2);
      double s = 0.0;
      for (std::size_t j = m * dk; j < (m + 1) * dk; ++j) s += q[j] * k[j];
      logits.push_back(s / std::sqrt(double(dk)));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& l : logits) z += (l = std::exp(l - mx));
    for (std::size_t k = 0; k < logits.size(); ++k) out(m, k) = logits[k] / z;
  }
  return out;
}

}  // namespace drpn::model
