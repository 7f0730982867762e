#include "drpn/cli/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "drpn/errors.hpp"
#include "drpn/ingest/dataset.hpp"
#include "drpn/ingest/synthetic.hpp"
#include "drpn/model/drpn.hpp"
#include "drpn/numerics/ops.hpp"
#include "drpn/numerics/random.hpp"
#include "drpn/training/trainer.hpp"

namespace drpn::cli {

namespace {

using num::Mask;
using num::ParamStore;
using num::Tape;
using num::Tensor;
using num::Var;

constexpr double kStep = 1e-5;

Tensor random_tensor(num::Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (auto& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

// Loss sum(op(x) ⊙ W) for a fixed random W, so each output coordinate carries its own weight.
num::GradCheckReport check_op(const std::vector<Tensor>& inputs, const std::function<Var(std::vector<Var>&)>& op,
                              num::Rng& rng, double tol) {
  ParamStore store;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto id = store.add({"x" + std::to_string(i), inputs[i].rows(), inputs[i].cols()});
    store.slot(id).value = inputs[i];
  }
  Tensor weights;
  auto loss = [&](Tape& t) {
    std::vector<Var> xs;
    for (std::size_t i = 0; i < inputs.size(); ++i) xs.push_back(t.param(num::SlotId(i)));
    Var out = op(xs);
    if (weights.empty()) weights = random_tensor(rng, out.rows(), out.cols());
    return num::sum_all(num::elementwise_mul(out, t.constant(weights)));
  };
  return num::grad_check_params(store, loss, kStep, tol);
}

std::vector<GradcheckCase> op_cases(double tol, num::Rng& rng) {
  using namespace num;
  std::vector<GradcheckCase> out;
  auto add = [&](const std::string& name, const std::vector<Tensor>& in, std::function<Var(std::vector<Var>&)> op) {
    out.push_back({name, check_op(in, op, rng, tol)});
  };
  const auto a = random_tensor(rng, 4, 3), b = random_tensor(rng, 3, 5), c = random_tensor(rng, 4, 3);
  const auto row = random_tensor(rng, 1, 3), sc = random_tensor(rng, 1, 1);
  Tensor away = random_tensor(rng, 4, 3, 0.2, 1.0);
  for (std::size_t i = 0; i < away.size(); i += 2) away[i] = -away[i];  // stay clear of the ReLU kink
  add("matmul", {a, b}, [](auto& x) { return matmul(x[0], x[1]); });
  add("matmul_nt", {a, c}, [](auto& x) { return matmul_nt(x[0], x[1]); });
  add("transpose", {a}, [](auto& x) { return transpose(x[0]); });
  add("add", {a, c}, [](auto& x) { return num::add(x[0], x[1]); });
  add("sub", {a, c}, [](auto& x) { return sub(x[0], x[1]); });
  add("add_row", {a, row}, [](auto& x) { return add_row(x[0], x[1]); });
  add("mul_row", {a, row}, [](auto& x) { return mul_row(x[0], x[1]); });
  add("scalar_mul", {a}, [](auto& x) { return scalar_mul(x[0], -1.7); });
  add("scale_by", {a, sc}, [](auto& x) { return scale_by(x[0], x[1]); });
  add("elementwise_mul", {a, c}, [](auto& x) { return elementwise_mul(x[0], x[1]); });
  add("tanh", {a}, [](auto& x) { return num::tanh(x[0]); });
  add("sigmoid", {a}, [](auto& x) { return sigmoid(x[0]); });
  add("relu", {away}, [](auto& x) { return relu(x[0]); });
  add("exp", {a}, [](auto& x) { return num::exp(x[0]); });
  add("softmax_rows", {a}, [](auto& x) { return softmax_rows(x[0]); });
  add("softmax_rows_masked", {a}, [](auto& x) { return softmax_rows(x[0], Mask{1, 0, 1}); });
  add("layer_norm", {a}, [](auto& x) { return layer_norm(x[0]); });
  add("concat_cols", {a, c}, [](auto& x) { return concat_cols(std::vector<Var>{x[0], x[1]}); });
  add("concat_rows", {a, row}, [](auto& x) { return concat_rows(std::vector<Var>{x[0], x[1]}); });
  add("slice_cols", {a}, [](auto& x) { return slice_cols(x[0], 1, 3); });
  add("index_rows", {a}, [](auto& x) { return index_rows(x[0], std::vector<std::ptrdiff_t>{2, -1, 0, 2}); });
  add("repeat_rows", {row}, [](auto& x) { return repeat_rows(x[0], 3); });
  add("reshape", {a}, [](auto& x) { return reshape(x[0], 2, 6); });
  add("sum_rows", {a}, [](auto& x) { return sum_rows(x[0]); });
  add("sum_all", {a}, [](auto& x) { return sum_all(x[0]); });
  add("softmax_xent_first", {random_tensor(rng, 3, 5)}, [](auto& x) { return softmax_xent_first(x[0]); });
  const auto q = random_tensor(rng, 5, 4), k = random_tensor(rng, 6, 4), v = random_tensor(rng, 6, 4);
  add("attention", {q, k, v}, [](auto& x) {
    return attention(x[0], x[1], x[2], AttentionLayout::single(5, 6, Mask{1, 1, 0, 1, 1, 1}), 2);
  });
  const auto s = random_tensor(rng, 6, 4);
  add("attention_self_blocks", {s}, [](auto& x) {
    AttentionLayout layout;
    layout.blocks = {{0, 3, 0, 3}, {3, 6, 3, 6}};
    layout.exclude_self = true;
    return attention(x[0], x[0], x[0], layout, 2);
  });
  const std::vector<std::size_t> offs{0, 2, 6};
  add("segment_softmax", {random_tensor(rng, 6, 1)},
      [&](auto& x) { return segment_softmax(x[0], offs, Mask{1, 1, 1, 0, 1, 1}); });
  add("segment_weighted_sum", {random_tensor(rng, 6, 1), random_tensor(rng, 6, 3)},
      [&](auto& x) { return segment_weighted_sum(x[0], x[1], offs); });
  return out;
}

model::ModelConfig toy_config() {
  model::ModelConfig c;
  c.d = 8;
  c.agg_dim = 6;
  c.heads = 2;
  c.graph_heads = 2;
  c.l_p = 3;
  c.l_n = 4;
  return c;
}

ingest::Dataset toy_dataset(const model::ModelConfig& cfg) {
  ingest::SyntheticOptions o;
  o.n_users = 12;
  o.n_news = 24;
  o.n_topics = 3;
  o.topic_words = 6;
  o.common_words = 10;
  o.seed = 3;
  auto syn = ingest::generate_synthetic(o);
  ingest::RebuildOptions r;
  r.l_p = cfg.l_p;
  r.l_n = cfg.l_n;
  r.k_nbr = cfg.k_nbr;
  return ingest::make_dataset(std::move(syn.catalog), std::move(syn.logs), r);
}

// Every slot random so biases, gains and γ are away from their special initial values.
void randomize(ParamStore& store, num::Rng& rng) {
  for (auto& slot : store.slots()) {
    for (auto& v : slot.value.values()) v = rng.uniform() - 0.5;
    if (slot.name.ends_with(".gain"))
      for (auto& v : slot.value.values()) v += 1.0;
    if (slot.name.ends_with(".gamma"))
      for (auto& v : slot.value.values()) v = 0.4 + std::abs(v);
  }
}

struct ModelFixture {
  model::ModelConfig cfg = toy_config();
  ingest::Dataset data = toy_dataset(cfg);
  model::NewsIndex index = training::build_index(data, cfg.k_nbr);
  ParamStore store;
  model::ModelIds ids;

  explicit ModelFixture(num::Rng& rng) {
    store = model::init_model(cfg, index, 1);
    randomize(store, rng);
    ids = model::bind_model(store, cfg);
  }

  // A user with both sequences partly filled, plus ten candidates.
  std::pair<model::UserHistory, std::vector<model::NewsRef>> example() const {
    for (const auto& [id, profile] : data.profiles.users()) {
      if (profile.pos_count() < 2 || profile.neg_count() < 2) continue;
      auto h = model::make_history(index, profile);
      std::vector<model::NewsRef> cands;
      for (std::size_t i = 0; i < 10; ++i) cands.push_back(index.lookup(data.catalog.at(i).id));
      return {h, cands};
    }
    throw DataError("gradcheck dataset has no suitable user");
  }
};

Var weighted(Tape& t, Var out, num::Rng& rng) {
  return num::sum_all(num::elementwise_mul(out, t.constant(random_tensor(rng, out.rows(), out.cols()))));
}

std::vector<GradcheckCase> module_cases(double tol, num::Rng& rng) {
  ModelFixture fx(rng);
  auto [history, cands] = fx.example();
  const model::Drpn net(fx.cfg, fx.store, fx.index);
  std::vector<GradcheckCase> out;
  auto check = [&](const std::string& name, const std::function<Var(Tape&)>& f) {
    num::Rng weights_rng(rng.next());
    auto loss = [&](Tape& t) {
      num::Rng w = weights_rng;
      return weighted(t, f(t), w);
    };
    out.push_back({name, num::grad_check_params(fx.store, loss, kStep, tol)});
  };
  check("title_encoder", [&](Tape& t) { return net.titles(t, history.pos.refs); });
  auto sequences = [&](Tape& t) {
    return std::pair{model::Sequence{net.titles(t, history.pos.refs), Mask(history.pos.refs.size(), 1), false},
                     model::Sequence{net.titles(t, history.neg.refs), Mask(history.neg.refs.size(), 1), false}};
  };
  check("content_aggregator", [&](Tape& t) {
    auto [p, n] = sequences(t);
    return model::content_aggregate(t, fx.ids.sem_ca_pos, p);
  });
  check("denoising_aggregator", [&](Tape& t) {
    auto [p, n] = sequences(t);
    auto alpha = model::denoise_weights(t, fx.ids.sem_da_pos, p, &n);
    return model::denoise_aggregate(p.rows, alpha);
  });
  check("graph_network", [&](Tape& t) {
    model::NodeBatch batch;
    for (const auto& r : history.pos.refs) {
      batch.centers.push_back(r.id_row);
      batch.neighbors.push_back(fx.index.neighbors(r.id_row));
    }
    return model::encode_graph_nodes(t, fx.ids.graph, batch);
  });
  check("fusion_and_prediction", [&](Tape& t) {
    auto [p, n] = sequences(t);
    auto bundle = model::encode_interests(t, {fx.ids.sem_ca_pos, fx.ids.sem_ca_neg, fx.ids.sem_da_pos, fx.ids.sem_da_neg},
                                          p, n, {});
    auto r = net.titles(t, cands);
    auto u = model::fuse_user(t, fx.ids.fuse_sem, bundle,
                              model::pair_context(model::pair_aggregate(t, fx.ids.fuse_sem.pair_agg, &p, &n), r));
    return model::dot_rows(u, r);
  });
  return out;
}

std::vector<GradcheckCase> full_cases(double tol, num::Rng& rng) {
  ModelFixture fx(rng);
  auto [history, cands] = fx.example();
  const model::Drpn net(fx.cfg, fx.store, fx.index);
  auto loss = [&](Tape& t) {
    auto s = net.score(t, net.encode_user(t, history), cands);
    return model::training_loss(num::reshape(s, 2, 5));
  };
  return {{"drpn_full", num::grad_check_params(fx.store, loss, kStep, tol)}};
}

}  // namespace

GradcheckScope parse_scope(const std::string& name) {
  if (name == "op") return GradcheckScope::kOp;
  if (name == "module") return GradcheckScope::kModule;
  if (name == "full") return GradcheckScope::kFull;
  throw ConfigError("unknown gradcheck scope '" + name + "' (expected op, module or full)");
}

std::vector<GradcheckCase> run_gradchecks(GradcheckScope scope, double tol, std::uint64_t seed) {
  if (!(tol > 0.0)) throw ConfigError("gradcheck tolerance must be positive");
  num::Rng rng{seed, 0x67726164ULL};
  switch (scope) {
    case GradcheckScope::kOp: return op_cases(tol, rng);
    case GradcheckScope::kModule: return module_cases(tol, rng);
    case GradcheckScope::kFull: return full_cases(tol, rng);
  }
  return {};
}

}  // namespace drpn::cli
