#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "data_support.hpp"
#include "doctest.h"
#include "drpn/errors.hpp"
#include "drpn/eval/ablation.hpp"
#include "drpn/eval/attention.hpp"
#include "drpn/eval/evaluate.hpp"
#include "drpn/eval/metrics.hpp"
#include "drpn/training/trainer.hpp"
#include "metric_oracle.hpp"
#include "model_support.hpp"

using namespace drpn;
using namespace drpn::eval;

namespace {

ImpressionScores impression(const std::string& id, const std::vector<double>& s, const std::vector<int>& l) {
  ImpressionScores imp{id, {}};
  for (std::size_t i = 0; i < s.size(); ++i) imp.items.push_back({"N" + std::to_string(i), l[i], s[i]});
  return imp;
}

}  // namespace

TEST_CASE("metric examples") {
  using V = std::vector<double>;
  using L = std::vector<int>;
  CHECK(*auc(V{3, 2, 1, 0}, L{1, 1, 0, 0}) == 1.0);
  CHECK(*auc(V{1, 1, 1, 1}, L{1, 0, 1, 0}) == 0.5);
  CHECK(!auc(V{1, 2}, L{1, 1}));
  CHECK(!auc(V{1, 2}, L{0, 0}));
  CHECK(*mrr(V{5, 1, 2}, L{1, 0, 0}) == 1.0);
  CHECK(*mrr(V{3, 2, 1, 0}, L{0, 0, 1, 0}) == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(*mrr(V{9, 5, 4, 3, 1}, L{1, 0, 0, 1, 0}) == (1.0 + 0.25) / 2);
  CHECK(!mrr(V{1, 2}, L{0, 0}));
  CHECK(*ndcg(V{3, 2, 1}, L{1, 1, 0}, 5) == 1.0);
  CHECK(std::abs(*ndcg(V{3, 2, 1, 0}, L{0, 1, 0, 0}, 5) - 1.0 / std::log2(3.0)) < 1e-15);
  CHECK(std::abs(*ndcg(V{3, 2, 1, 0}, L{0, 1, 0, 0}, 5) - 0.6309) < 1e-4);
  CHECK(*ndcg(V{9, 8, 7, 6, 5, 4}, L{0, 0, 0, 0, 0, 1}, 5) == 0.0);
  // Ties keep input order.
  CHECK(*mrr(V{1, 1, 1}, L{0, 1, 0}) == 0.5);
  CHECK_THROWS_AS(auc(V{1, 2}, L{1}), ShapeError);
}

TEST_CASE("metrics agree with brute force on random impressions") {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::size_t compared = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng() % 11;
    std::vector<double> s(n);
    std::vector<int> l(n);
    // Coarse scores force ties.
    for (auto& v : s) v = double(rng() % 6) - 2.0;
    for (auto& v : l) v = int(rng() % 3 == 0);
    l[rng() % n] = 1;
    if (!auc(s, l)) continue;
    ++compared;
    CHECK(*auc(s, l) == brute::auc(s, l));
    CHECK(*mrr(s, l) == brute::mrr(s, l));
    CHECK(std::abs(*ndcg(s, l, 5) - brute::ndcg(s, l, 5)) <= 1e-12);
    CHECK(std::abs(*ndcg(s, l, 10) - brute::ndcg(s, l, 10)) <= 1e-12);
    // Strictly monotone maps that stay exact on these small integers.
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = 3 * s[i] * s[i] * s[i] + 7;
    CHECK(*auc(m, l) == *auc(s, l));
    CHECK(*mrr(m, l) == *mrr(s, l));
    CHECK(*ndcg(m, l, 10) == *ndcg(s, l, 10));
    for (double v : {*auc(s, l), *mrr(s, l), *ndcg(s, l, 5), *ndcg(s, l, 10)}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(compared > 900);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
}

TEST_CASE("summaries") {
  std::vector<ImpressionScores> imps{impression("a", {3, 2, 1}, {1, 0, 0}), impression("b", {1, 2, 3}, {1, 0, 0}),
                                     impression("c", {1, 2}, {0, 0}), impression("d", {2, 1}, {1, 0})};
  const auto r = summarize(imps);
  CHECK(r.evaluated == 3);
  CHECK(r.skipped == 1);
  CHECK(r.auc == doctest::Approx(2.0 / 3).epsilon(1e-15));
  std::reverse(imps.begin(), imps.end());
  CHECK(summarize(imps) == r);

  SUBCASE("oracle scorer is perfect") {
    std::mt19937_64 rng(3);
    std::vector<ImpressionScores> oracle;
    for (int i = 0; i < 50; ++i) {
      std::vector<int> l(8, 0);
      l[rng() % 8] = 1;
      std::vector<double> s(l.begin(), l.end());
      oracle.push_back(impression(std::to_string(i), s, l));
    }
    const auto p = summarize(oracle);
    CHECK(p.auc == 1.0);
    CHECK(p.mrr == 1.0);
    CHECK(p.ndcg5 == 1.0);
    CHECK(p.ndcg10 == 1.0);
    // With two positives, perfect order still averages 1/1 and 1/2.
    const auto two = summarize({impression("x", {1, 1, 0}, {1, 1, 0})});
    CHECK(two.auc == 1.0);
    CHECK(two.mrr == 0.75);
    CHECK(two.ndcg10 == 1.0);
  }
  SUBCASE("report TSV round trip and table") {
    std::vector<std::pair<std::string, MetricReport>> rows{{"DRPN", r}, {"DRPN-D", summarize({imps[0]})}};
    std::stringstream ss;
    write_report_tsv(ss, rows);
    CHECK(read_report_tsv(ss, "report") == rows);
    const auto table = format_report_table(rows);
    CHECK(table.find("DRPN-D") != std::string::npos);
    CHECK(table.find("nDCG@10") != std::string::npos);
  }
}

TEST_CASE("evaluation of a model") {
  auto cfg = toy::config();
  const auto data = toy::small_dataset(cfg);
  const auto index = training::build_index(data, cfg.k_nbr);
  auto store = model::init_model(cfg, index, 5);
  const model::Drpn net(cfg, store, index);
  const auto& logs = data.splits.test;
  REQUIRE(logs.size() > 10);

  const auto scores = score_impressions(net, store, data.profiles, logs);
  REQUIRE(scores.size() == logs.size());
  const auto report = summarize(scores);
  CHECK(report.evaluated + report.skipped == logs.size());

  SUBCASE("matches live scoring and is repeatable") {
    CHECK(summarize(score_impressions(net, store, data.profiles, logs)) == report);
    num::Tape tape(store);
    const auto& imp = logs[3];
    const auto user = net.encode_user(tape, model::make_history(index, data.profiles.lookup(imp.user_id)));
    std::vector<model::NewsRef> refs;
    for (const auto& item : imp.displayed) refs.push_back(index.lookup(item.news_id));
    const auto live = net.score(tape, user, refs).value();
    for (std::size_t c = 0; c < refs.size(); ++c) CHECK(scores[3].items[c].score == live(c, 0));
  }
  SUBCASE("threads and impression order do not change the report") {
    CHECK(summarize(score_impressions(net, store, data.profiles, logs, 4)) == report);
    auto shuffled = logs;
    std::mt19937_64 rng(1);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(summarize(score_impressions(net, store, data.profiles, shuffled)) == report);
  }
  SUBCASE("score dump round trip") {
    std::stringstream ss;
    write_score_dump(ss, scores);
    const auto dump = read_score_dump(ss, "dump");
    CHECK(summarize(rescore(dump, logs)) == report);
    auto broken = dump;
    broken.begin()->second.pop_back();
    CHECK_THROWS_AS(rescore(broken, logs), DataError);
    std::stringstream bad("1\tN1\tx\n");
    CHECK_THROWS_AS(read_score_dump(bad, "bad"), DataError);
  }
  SUBCASE("cold users are scored") {
    auto cold = logs;
    for (auto& l : cold) l.user_id = "never-seen-" + l.user_id;
    CHECK(summarize(score_impressions(net, store, data.profiles, cold)).evaluated == report.evaluated);
  }
  SUBCASE("untrained model is near chance") {
    // Small sample, so a loose band.
    CHECK(std::abs(report.auc - 0.5) < 0.15);
  }
}

TEST_CASE("attention export") {
  auto cfg = toy::config();
  cfg.l_p = 6;
  cfg.l_n = 8;
  const auto data = toy::small_dataset(cfg);
  const auto index = training::build_index(data, cfg.k_nbr);
  auto store = toy::store(cfg, index.word_rows(), index.id_rows(), 9, 1.0);
  const model::Drpn net(cfg, store, index);

  std::string user;
  for (const auto& [id, p] : data.profiles.users())
    if (p.pos_count() >= 3 && p.neg_count() >= 3) {
      user = id;
      break;
    }
  REQUIRE(!user.empty());
  const auto entries = attention_weights(net, store, data.profiles, user, &data.catalog);
  std::map<std::string, std::vector<const AttentionEntry*>> by_seq;
  for (const auto& e : entries) by_seq[e.sequence].push_back(&e);
  CHECK(by_seq.size() == 4);
  for (const auto& [name, list] : by_seq) {
    double sum = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      sum += list[i]->alpha;
      if (i > 0) CHECK(list[i - 1]->alpha >= list[i]->alpha);
      CHECK(!list[i]->category.empty());
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  const auto& profile = data.profiles.users().at(user);
  CHECK(by_seq["sem_pos"].size() == profile.pos_count());
  CHECK(by_seq["col_neg"].size() == profile.neg_count());

  std::stringstream tsv;
  write_attention_tsv(tsv, entries);
  std::string line;
  std::getline(tsv, line);
  CHECK(line == "user_id\tsequence\tposition\tnews_id\talpha\tcategory");
  std::size_t rows = 0;
  while (std::getline(tsv, line)) ++rows;
  CHECK(rows == entries.size());

  const auto svg = attention_svg(entries);
  CHECK(svg.starts_with("<svg"));
  CHECK(std::size_t(std::count(svg.begin(), svg.end(), '\n')) > entries.size());

  CHECK_THROWS_AS(attention_weights(net, store, data.profiles, "nobody"), DataError);
  auto nd = cfg;
  nd.variant = model::Variant::kNoDenoise;
  CHECK_THROWS_AS(attention_weights(model::Drpn(nd, store, index), store, data.profiles, user), ConfigError);

  SUBCASE("noise statistics cover the truth entries") {
    const auto syn = ingest::generate_synthetic(toy::small_synthetic());
    const auto stats = noise_attention(net, store, data.profiles, syn.truth.entries);
    CHECK(stats.noise_count > 0);
    CHECK(stats.clean_count > stats.noise_count);
    CHECK(stats.noise_mean > 0.0);
    CHECK(stats.noise_lower_half >= 0.0);
    CHECK(stats.noise_lower_half <= 1.0);
    CHECK(noise_attention(net, store, data.profiles, syn.truth.entries, 3).noise_mean == stats.noise_mean);
  }
}

TEST_CASE("ablation table") {
  CHECK(ablation_name(model::Variant::kPositiveOnly) == "DRPN-N");
  CHECK(ablation_name(model::Variant::kNegativeOnly) == "DRPN-P");
  CHECK(all_variants().size() == 6);

  auto cfg = toy::config();
  const auto data = toy::small_dataset(cfg);
  training::TrainOptions o;
  o.model = cfg;
  o.epochs = 1;
  o.max_steps = 2;
  o.lr = 1e-3;
  const auto dir = std::filesystem::temp_directory_path() / "drpn_test_ablation";
  std::filesystem::remove_all(dir);
  const auto rows = compare_ablations(o, data, dir, {model::Variant::kFull, model::Variant::kNoDenoise});
  REQUIRE(rows.size() == 2);
  const auto table = ablation_table(rows);
  CHECK(table[0].first == "DRPN");
  CHECK(table[1].first == "DRPN-D");
  CHECK(table[0].second.evaluated > 0);
  CHECK(std::filesystem::exists(dir / "full" / "best.ckpt"));
  CHECK(std::filesystem::exists(dir / "no-denoise" / "train_log.tsv"));
  std::filesystem::remove_all(dir);
}
