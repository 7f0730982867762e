#include <algorithm>
#include <random>

#include "doctest.h"
#include "drpn/errors.hpp"
#include "drpn/model/drpn.hpp"
#include "model_support.hpp"
#include "support.hpp"

using namespace drpn;
using namespace drpn::model;
using num::ParamStore;
using num::Tensor;
using testing::random_tensor;

namespace {

constexpr double kTight = 1e-12;

ingest::ImpressionLog log_of(const std::string& id, const std::string& user, std::int64_t ts,
                             const std::vector<std::pair<std::string, bool>>& items) {
  ingest::ImpressionLog l{id, user, ts, {}};
  for (const auto& [n, c] : items) l.displayed.push_back({n, c});
  return l;
}

// Ten news with short titles; profile logs for three users.
struct World {
  ingest::NewsCatalog catalog;
  std::vector<ingest::ImpressionLog> logs;
  ingest::ProfileSet profiles{3, 4};
  ingest::CollabGraph graph;
  NewsIndex index;

  World() {
    const char* titles[] = {"red fox runs", "blue sky",       "red apple pie", "fox news today", "sky high",
                            "apple stock",  "deep blue sea",  "news of today", "pie contest",    "high tide"};
    for (int i = 0; i < 10; ++i) catalog.add("N" + std::to_string(i), "cat", "sub", titles[i]);
    logs = {log_of("1", "U1", 100, {{"N0", true}, {"N1", false}, {"N2", true}, {"N3", false}}),
            log_of("2", "U1", 200, {{"N4", true}, {"N5", false}, {"N6", false}}),
            log_of("3", "U2", 150, {{"N0", true}, {"N2", true}, {"N7", false}}),
            log_of("4", "U3", 300, {{"N8", false}, {"N9", false}})};
    profiles = ingest::build_profiles(logs, 3, 4);
    graph = ingest::build_collab_graph(profiles.matrix(), 5);
    index = NewsIndex::build(catalog, logs, graph, 5);
  }
};

std::vector<NewsRef> refs(const NewsIndex& idx, const std::vector<std::string>& ids) {
  std::vector<NewsRef> out;
  for (const auto& id : ids) out.push_back(idx.lookup(id));
  return out;
}

History history(const NewsIndex& idx, const std::vector<std::string>& ids, Mask mask = {}) {
  return {ids, refs(idx, ids), std::move(mask)};
}

std::vector<double> column(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("fusion building blocks") {
  auto cfg = toy::config();
  auto store = toy::store(cfg, 4, 4, 1);
  auto ids = bind_model(store, cfg);
  std::mt19937_64 rng(1);
  num::Tape t(store);

  SUBCASE("pair context of single equal rows is [v; r_c]") {
    auto v = random_tensor(rng, 1, cfg.d);
    Sequence p{t.constant(v), {1}, false}, n{t.constant(v), {1}, false};
    auto u = pair_aggregate(t, ids.fuse_sem.pair_agg, &p, &n);
    CHECK(num::max_abs_diff(u.value(), v) < 1e-15);
    auto r = random_tensor(rng, 3, cfg.d);
    auto f = pair_context(u, t.constant(r)).value();
    CHECK(f.cols() == 2 * cfg.d);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t c = 0; c < cfg.d; ++c) {
        CHECK(f(i, c) == u.value()(0, c));
        CHECK(f(i, cfg.d + c) == r(i, c));
      }
  }
  SUBCASE("pair context ignores order and empty placeholders") {
    auto x = random_tensor(rng, 5, cfg.d);
    auto xv = t.constant(x);
    std::vector<std::ptrdiff_t> a{0, 1}, b{2, 3, 4}, c{3, 0, 4}, d{1, 2};
    Sequence p1{num::index_rows(xv, a), {1, 1}, false}, n1{num::index_rows(xv, b), {1, 1, 1}, false};
    Sequence p2{num::index_rows(xv, c), {1, 1, 1}, false}, n2{num::index_rows(xv, d), {1, 1}, false};
    auto u1 = pair_aggregate(t, ids.fuse_col.pair_agg, &p1, &n1).value();
    auto u2 = pair_aggregate(t, ids.fuse_col.pair_agg, &p2, &n2).value();
    CHECK(num::max_abs_diff(u1, u2) < kTight);
    auto empty = Sequence::placeholder(t, cfg.d);
    auto only = pair_aggregate(t, ids.fuse_col.pair_agg, &p1, nullptr).value();
    CHECK(pair_aggregate(t, ids.fuse_col.pair_agg, &p1, &empty).value() == only);
    auto nothing = pair_aggregate(t, ids.fuse_col.pair_agg, &empty, &empty).value();
    for (double v : nothing.values()) CHECK(v == 0.0);
  }
  SUBCASE("fusion weight matches the scorer formula and its bound") {
    auto f = random_tensor(rng, 4, 2 * cfg.d, -3, 3);
    auto w = column(fusion_weight(t, ids.fuse_sem.ps, t.constant(f)).value());
    oracle::Model o(store, cfg);
    double bound = std::abs(o.x("fuse_sem.ps.b2"));
    for (double v : o.v("fuse_sem.ps.b2")) (void)v;
    for (const auto& row : o.m("fuse_sem.ps.w2")) bound += std::abs(row[0]);
    auto F = oracle::from(f);
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<double> a(F[i].begin(), F[i].begin() + long(cfg.d)), b(F[i].begin() + long(cfg.d), F[i].end());
      double ref = oracle::scorer(a, b, o.m("fuse_sem.ps.w1"), o.v("fuse_sem.ps.b1"), o.m("fuse_sem.ps.w2"),
                                  o.x("fuse_sem.ps.b2"));
      CHECK(std::abs(w[i] - ref) < kTight);
      CHECK(std::abs(w[i]) <= bound);
    }
  }
  SUBCASE("zero fusion parameters give a zero user vector") {
    for (auto& slot : store.slots())
      if (slot.name.starts_with("fuse_sem.p") || slot.name.starts_with("fuse_sem.n")) slot.value.fill(0.0);
    num::Tape t0(store);
    InterestBundle b;
    b.ps = t0.constant(random_tensor(rng, 1, cfg.d));
    b.ns = t0.constant(random_tensor(rng, 1, cfg.d));
    b.ph = t0.constant(random_tensor(rng, 1, cfg.d));
    b.nh = t0.constant(random_tensor(rng, 1, cfg.d));
    auto u = fuse_user(t0, ids.fuse_sem, b, t0.constant(random_tensor(rng, 2, 2 * cfg.d)));
    for (double v : u.value().values()) CHECK(v == 0.0);
  }
  SUBCASE("fuse_user with one-hot and unit weights") {
    // b2 alone sets each weight when W2 = 0.
    ParamStore s = toy::store(cfg, 4, 4, 2);
    auto fid = bind_model(s, cfg).fuse_sem;
    for (auto sc : {fid.ps, fid.ns, fid.ph, fid.nh}) s.slot(sc.w2).value.fill(0.0);
    auto v = random_tensor(rng, 4, cfg.d);
    auto run = [&](std::array<double, 4> w) {
      s.slot(fid.ps.b2).value[0] = w[0];
      s.slot(fid.ns.b2).value[0] = w[1];
      s.slot(fid.ph.b2).value[0] = w[2];
      s.slot(fid.nh.b2).value[0] = w[3];
      num::Tape tt(s);
      auto vv = tt.constant(v);
      InterestBundle b;
      b.ps = num::index_rows(vv, std::vector<std::ptrdiff_t>{0});
      b.ns = num::index_rows(vv, std::vector<std::ptrdiff_t>{1});
      b.ph = num::index_rows(vv, std::vector<std::ptrdiff_t>{2});
      b.nh = num::index_rows(vv, std::vector<std::ptrdiff_t>{3});
      return fuse_user(tt, fid, b, tt.constant(random_tensor(rng, 1, 2 * cfg.d))).value();
    };
    CHECK(toy::row_of(run({1, 0, 0, 0})) == toy::row_of(v, 0));
    auto sum = run({1, 1, 1, 1});
    for (std::size_t c = 0; c < cfg.d; ++c) {
      CHECK(sum(0, c) == doctest::Approx(v(0, c) + v(1, c) + v(2, c) + v(3, c)).epsilon(1e-14));
    }
  }
  SUBCASE("predict is a sum of two dot products") {
    Tensor e1(1, cfg.d);
    e1(0, 0) = 1.0;
    auto one = t.constant(e1);
    CHECK(num::add(dot_rows(one, one), dot_rows(one, one)).value().item() == 2.0);
    Tensor e2(1, cfg.d);
    e2(0, 1) = 1.0;
    CHECK(dot_rows(one, t.constant(e2)).value().item() == 0.0);
    auto a = random_tensor(rng, 3, cfg.d), b = random_tensor(rng, 3, cfg.d);
    auto s = column(dot_rows(t.constant(a), t.constant(b)).value());
    for (std::size_t i = 0; i < 3; ++i) {
      double ref = 0.0;
      for (std::size_t c = 0; c < cfg.d; ++c) ref += a(i, c) * b(i, c);
      CHECK(std::abs(s[i] - ref) < kTight);
    }
    // Bilinear: scaling one argument scales the score.
    auto scaled = column(dot_rows(t.constant(a), num::scalar_mul(t.constant(b), 2.5)).value());
    for (std::size_t i = 0; i < 3; ++i) CHECK(scaled[i] == doctest::Approx(2.5 * s[i]).epsilon(1e-14));
  }
}

TEST_CASE("training loss") {
  ParamStore s;
  num::Tape t(s);
  auto loss = [&](std::vector<double> v) {
    const std::size_t n = v.size();
    return training_loss(t.constant(Tensor(1, n, std::move(v)))).value().item();
  };
  CHECK(std::abs(loss({0.3, 0.3, 0.3, 0.3, 0.3}) - std::log(5.0)) < 1e-9);
  CHECK(std::abs(loss({1, 0, 0, 0, 0}) - std::log(1 + 4 * std::exp(-1.0))) < 1e-14);
  CHECK(loss({60, 0, 0, 0, 0}) < 1e-20);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    auto x = random_tensor(rng, 1, 5, -30, 30);
    std::vector<double> v(x.values().begin(), x.values().end()), w = v;
    for (auto& e : w) e += 1234.5;
    const double a = loss(v), b = loss(w);
    CHECK(a > 0.0);
    CHECK(std::abs(a - b) < 1e-12 * std::max(1.0, a));
  }
  // Batch loss is the mean of the rows.
  auto two = training_loss(t.constant(Tensor(2, 5, std::vector<double>{1, 0, 0, 0, 0, 0, 0, 0, 0, 0})));
  CHECK(two.value().item() == doctest::Approx((std::log(1 + 4 * std::exp(-1.0)) + std::log(5.0)) / 2).epsilon(1e-14));
}

TEST_CASE("news index") {
  World w;
  // First exposure order over time-sorted logs: N0 N1 N2 N3 (t=100), N7 (t=150), N4 N5 N6, N8 N9.
  const std::vector<std::string> order{"N0", "N1", "N2", "N3", "N7", "N4", "N5", "N6", "N8", "N9"};
  REQUIRE(w.index.id_rows() == order.size() + 2);
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(w.index.news_id(i + 2) == order[i]);
  CHECK(w.index.lookup(ingest::kPadNewsId) == NewsRef{-1, NewsIndex::kPadRow});
  CHECK(w.index.lookup("nope") == NewsRef{-1, NewsIndex::kUnkRow});
  CHECK(w.index.lookup("N7").title == 7);
  CHECK(w.index.word_rows() == w.catalog.vocab().size() + 1);
  ingest::NewsCatalog more = w.catalog;
  more.add("N10", "c", "s", "fresh story");
  auto idx = NewsIndex::build(more, w.logs, w.graph, 5);
  CHECK(idx.lookup("N10") == NewsRef{10, NewsIndex::kUnkRow});
  // N0 and N2 are co-clicked by U1 and U2; N4 by U1 with both.
  std::vector<std::string> nb;
  for (auto r : w.index.neighbors(w.index.lookup("N0").id_row)) nb.push_back(w.index.news_id(r));
  CHECK(nb == std::vector<std::string>{"N2", "N4"});
}

TEST_CASE("full forward pass") {
  World w;
  auto cfg = toy::config();
  auto store = toy::store(cfg, w.index.word_rows(), w.index.id_rows(), 3);
  const std::vector<std::string> cand_ids{"N5", "N0", "N9", "N3", "N7"};
  const auto cands = refs(w.index, cand_ids);

  SUBCASE("matches the straight-line oracle") {
    Drpn model(cfg, store, w.index);
    num::Tape t(store);
    UserHistory h{history(w.index, {"N0", "N2", "N4"}), history(w.index, {"N1", "N3", "N5", "N6"})};
    auto user = model.encode_user(t, h);
    auto scores = column(model.score(t, user, cands).value());

    oracle::Model o(store, cfg);
    auto titles = [&](const std::vector<std::string>& ids) {
      oracle::Mat m;
      for (const auto& id : ids) m.push_back(o.title(w.catalog.at(*w.catalog.find(id)).title_tokens));
      return m;
    };
    auto rows = [&](const std::vector<std::string>& ids) {
      std::vector<std::size_t> r;
      for (const auto& id : ids) r.push_back(w.index.lookup(id).id_row);
      return r;
    };
    auto raw = [&](const std::vector<std::string>& ids) {
      oracle::Mat m;
      for (auto r : rows(ids)) m.push_back(o.id_row(r));
      return m;
    };
    auto graph = [&](const std::vector<std::string>& ids) {
      std::vector<std::vector<std::size_t>> nb;
      for (auto r : rows(ids)) nb.push_back(w.index.neighbors(r));
      return o.graph(rows(ids), nb);
    };
    const auto& P = h.pos.news_ids;
    const auto& N = h.neg.news_ids;
    for (std::size_t i = 0; i < cand_ids.size(); ++i) {
      auto rt = o.title(w.catalog.at(*w.catalog.find(cand_ids[i])).title_tokens);
      auto ro = o.id_row(w.index.lookup(cand_ids[i]).id_row);
      double ref = o.view(titles(P), titles(N), titles(P), titles(N), rt, "sem", "fuse_sem", true) +
                   o.view(graph(P), graph(N), raw(P), raw(N), ro, "col", "fuse_col", false);
      CHECK(std::abs(scores[i] - ref) < 1e-11);
    }
  }

  SUBCASE("padded histories score like trimmed ones") {
    Drpn model(cfg, store, w.index);
    num::Tape t(store);
    const auto& pad = ingest::kPadNewsId;
    UserHistory trimmed{history(w.index, {"N0", "N2"}), history(w.index, {"N1", "N3", "N5"})};
    UserHistory padded{history(w.index, {"N0", "N2", pad}, {1, 1, 0}),
                       history(w.index, {"N1", "N3", "N5", pad}, {1, 1, 1, 0})};
    for (auto v : {Variant::kFull, Variant::kNoDenoise, Variant::kNoGraph, Variant::kPositiveOnly,
                   Variant::kNegativeOnly, Variant::kNoDenoiseNoGraph}) {
      auto c = cfg;
      c.variant = v;
      Drpn m(c, store, w.index);
      auto a = m.score(t, m.encode_user(t, trimmed), cands).value();
      auto b = m.score(t, m.encode_user(t, padded), cands).value();
      CHECK(num::max_abs_diff(a, b) < kTight);
    }
  }

  SUBCASE("cold users and one-sided histories are scored") {
    Drpn model(cfg, store, w.index);
    num::Tape t(store);
    auto cold = model.encode_user(t, UserHistory{});
    auto s = model.score(t, cold, cands).value();
    CHECK(s.all_finite());
    auto one = model.encode_user(t, UserHistory{history(w.index, {"N4"}), {}});
    CHECK(model.score(t, one, cands).value().all_finite());
    auto unknown = model.encode_user(t, UserHistory{history(w.index, {"zzz"}), history(w.index, {"N1"})});
    CHECK(model.score(t, unknown, refs(w.index, {"zzz", "N1"})).value().all_finite());
  }

  SUBCASE("no-denoise-no-graph with one news is a content match") {
    auto c = cfg;
    c.variant = Variant::kNoDenoiseNoGraph;
    Drpn model(c, store, w.index);
    num::Tape t(store);
    auto user = model.encode_user(t, UserHistory{history(w.index, {"N2"}), history(w.index, {"N3"})});
    auto s = column(model.score(t, user, cands).value());
    oracle::Model o(store, c);
    auto title = [&](const std::string& id) { return o.title(w.catalog.at(*w.catalog.find(id)).title_tokens); };
    auto ps = o.agg(o.self_attend({title("N2")}, "sem.ca_pos"), "sem.ca_pos.agg");
    auto ns = o.agg(o.self_attend({title("N3")}, "sem.ca_neg"), "sem.ca_neg.agg");
    auto pair = o.agg({title("N2"), title("N3")}, "fuse_sem.pair.agg");
    for (std::size_t i = 0; i < cand_ids.size(); ++i) {
      auto r = title(cand_ids[i]);
      double bp = oracle::scorer(pair, r, o.m("fuse_sem.ps.w1"), o.v("fuse_sem.ps.b1"), o.m("fuse_sem.ps.w2"),
                                 o.x("fuse_sem.ps.b2"));
      double bn = oracle::scorer(pair, r, o.m("fuse_sem.ns.w1"), o.v("fuse_sem.ns.b1"), o.m("fuse_sem.ns.w2"),
                                 o.x("fuse_sem.ns.b2"));
      double ref = 0.0;
      for (std::size_t k = 0; k < c.d; ++k) ref += (bp * ps[k] + bn * ns[k]) * r[k];
      CHECK(std::abs(s[i] - ref) < 1e-12);
    }
  }

  SUBCASE("title cache reproduces live encoding bit for bit") {
    Drpn model(cfg, store, w.index);
    num::Tape live(store);
    UserHistory h{history(w.index, {"N0", "N2", "N4"}), history(w.index, {"N1", "zzz"})};
    auto a = model.score(live, model.encode_user(live, h), cands).value();
    auto cache = model.build_title_cache(store, 3);
    CHECK(cache.rows() == w.catalog.size() + 1);
    model.set_title_cache(&cache);
    num::Tape cached(store);
    auto b = model.score(cached, model.encode_user(cached, h), cands).value();
    CHECK(a == b);
  }

  SUBCASE("mismatched tables are rejected") {
    auto other = toy::store(cfg, w.index.word_rows() + 1, w.index.id_rows(), 3);
    CHECK_THROWS_AS(Drpn(cfg, other, w.index), ConfigError);
  }
}

TEST_CASE("variants leave excluded parameters untouched") {
  World w;
  auto cfg = toy::config();
  auto store = toy::store(cfg, w.index.word_rows(), w.index.id_rows(), 4);
  UserHistory h{history(w.index, {"N0", "N2", "N4"}), history(w.index, {"N1", "N3", "N5"})};
  const auto cands = refs(w.index, {"N5", "N0", "N9", "N3", "N7"});

  auto touched = [&](Variant v) {
    auto c = cfg;
    c.variant = v;
    Drpn model(c, store, w.index);
    num::GradBuffer buf(store);
    {
      num::Tape t(store, &buf);
      auto s = model.score(t, model.encode_user(t, h), cands);
      t.backward(training_loss(num::reshape(s, 1, 5)));
    }
    store.zero_grads();
    store.accumulate(buf);
    std::vector<std::string> names;
    for (const auto& slot : store.slots()) {
      bool any = false;
      for (double g : slot.grad.values()) any = any || g != 0.0;
      if (any) names.push_back(slot.name);
    }
    return names;
  };
  auto has = [](const std::vector<std::string>& names, const std::string& prefix) {
    return std::any_of(names.begin(), names.end(), [&](const auto& n) { return n.starts_with(prefix); });
  };

  auto full = touched(Variant::kFull);
  for (const auto& slot : store.slots()) {
    // Denoise scorer output biases shift a whole softmax row, so their gradient vanishes.
    if (slot.name.find(".da_") != std::string::npos && slot.name.ends_with(".b2")) continue;
    CHECK_MESSAGE(std::find(full.begin(), full.end(), slot.name) != full.end(), slot.name);
  }

  auto pos_only = touched(Variant::kPositiveOnly);
  for (auto p : {"sem.ca_neg", "sem.da_neg", "col.ca_neg", "col.da_neg", "fuse_sem.ns", "fuse_sem.nh",
                 "fuse_col.ns", "fuse_col.nh", "sem.da_pos.inter", "sem.da_pos.wk_x", "sem.da_pos.wv_x",
                 "col.da_pos.inter", "sem.da_pos.gamma"}) {
    CHECK_MESSAGE(!has(pos_only, p), p);
  }
  CHECK(has(pos_only, "sem.da_pos.intra"));

  auto neg_only = touched(Variant::kNegativeOnly);
  for (auto p : {"sem.ca_pos", "sem.da_pos", "col.ca_pos", "col.da_pos", "fuse_sem.ps", "fuse_sem.ph",
                 "fuse_col.ps", "fuse_col.ph", "sem.da_neg.inter"}) {
    CHECK_MESSAGE(!has(neg_only, p), p);
  }

  auto no_graph = touched(Variant::kNoGraph);
  for (auto p : {"graph.", "col.", "fuse_col.", "emb.news"}) CHECK_MESSAGE(!has(no_graph, p), p);

  auto no_denoise = touched(Variant::kNoDenoise);
  for (auto p : {"sem.da_", "col.da_", "fuse_sem.ph", "fuse_sem.nh", "fuse_col.ph", "fuse_col.nh"}) {
    CHECK_MESSAGE(!has(no_denoise, p), p);
  }
  CHECK(has(no_denoise, "graph."));

  auto neither = touched(Variant::kNoDenoiseNoGraph);
  for (auto p : {"sem.da_", "col.", "graph.", "fuse_col.", "fuse_sem.ph"}) CHECK_MESSAGE(!has(neither, p), p);
}

TEST_CASE("gradient check of the complete model at toy size") {
  World w;
  auto cfg = toy::config();
  auto store = toy::store(cfg, w.index.word_rows(), w.index.id_rows(), 5);
  Drpn model(cfg, store, w.index);
  const auto& pad = ingest::kPadNewsId;
  UserHistory h{history(w.index, {"N0", "N2", pad}, {1, 1, 0}), history(w.index, {"N1", "N3", "N5", "N6"})};
  const auto cands = refs(w.index, {"N4", "N9", "N3", "N7", "N8", "N2", "N1", "N6", "N5", "N0"});
  auto loss = [&](num::Tape& t) {
    auto s = model.score(t, model.encode_user(t, h), cands);
    return training_loss(num::reshape(s, 2, 5));
  };
  auto report = num::grad_check_params(store, loss, 1e-5, 1e-4);
  INFO(report.worst);
  CHECK(report.passed());
  CHECK(report.checked > 5000);
}
