// Runs the acceptance criteria end to end and prints one PASS/FAIL line per
// check. Exit status is 0 only when every check passes.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "drpn/cli/app.hpp"
#include "drpn/cli/gradcheck_suite.hpp"
#include "drpn/cli/run_config.hpp"
#include "drpn/eval/metrics.hpp"
#include "drpn/ingest/dataset.hpp"
#include "drpn/model/drpn.hpp"
#include "drpn/model/interest.hpp"
#include "drpn/training/trainer.hpp"
#include "fixture_expectations.hpp"
#include "metric_oracle.hpp"

using namespace drpn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Outcome {
  std::string id;
  bool pass;
  std::string detail;
};

class Suite {
 public:
  explicit Suite(fs::path work, std::size_t threads) : work_(std::move(work)), threads_(threads) {}

  void check(const std::string& id, bool pass, const std::string& detail) {
    results_.push_back({id, pass, detail});
    std::cout << (pass ? "PASS  " : "FAIL  ") << id << "  " << detail << std::endl;
  }

  // Runs a criterion; an exception fails it with the message.
  void run(const std::string& id, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      check(id, false, std::string("aborted: ") + e.what());
    }
  }

  // In-process drpn invocation; throws on a non-zero exit.
  std::string drpn(std::vector<std::string> args) {
    args.insert(args.begin(), "drpn");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) {
      std::string cmd;
      for (const auto& a : args) cmd += a + " ";
      throw std::runtime_error(cmd + "exited " + std::to_string(code) + ": " + err.str());
    }
    return out.str();
  }

  const fs::path& work() const { return work_; }
  std::size_t threads() const { return threads_; }
  std::string config() const { return (fs::path(DRPN_CONFIGS) / "synthetic.conf").string(); }

  // The planted-noise dataset, generated once.
  const fs::path& synthetic() {
    if (synthetic_.empty()) {
      synthetic_ = work_ / "synthetic";
      drpn({"synth", "--users", "2000", "--news", "1000", "--topics", "8", "--noise-rate", "0.2", "--seed", "7",
            "--out", synthetic_.string()});
    }
    return synthetic_;
  }

  const ingest::Dataset& dataset() {
    if (!data_) {
      cli::RunConfig cfg;
      cfg.merge_file(config());
      data_ = ingest::load_dataset(synthetic(), cfg.rebuild());
    }
    return *data_;
  }

  // Trains one variant under the synthetic config and scores its best
  // checkpoint on the test split. Cached per variant.
  struct Trained {
    fs::path dir;
    eval::MetricReport test;
    double train_seconds = 0.0;
  };
  const Trained& trained(const std::string& variant, std::size_t threads) {
    auto it = trained_.find(variant);
    if (it != trained_.end()) return it->second;
    Trained t;
    t.dir = work_ / ("train_" + variant);
    const auto start = Clock::now();
    std::cout << "      training " << variant << " ..." << std::flush;
    drpn({"train", "--config", config(), "--data", synthetic().string(), "--variant", variant, "--threads",
          std::to_string(threads), "--out", t.dir.string()});
    t.train_seconds = seconds_since(start);
    std::cout << fmt(" %.0f s", t.train_seconds) << std::endl;
    drpn({"evaluate", "--checkpoint", (t.dir / "best.ckpt").string(), "--split", "test", "--threads",
          std::to_string(threads_), "--out", (t.dir / "test").string()});
    std::istringstream report(slurp(t.dir / "test" / "report.tsv"));
    t.test = eval::read_report_tsv(report, "report.tsv").at(0).second;
    return trained_.emplace(variant, t).first->second;
  }

  int summary() const {
    std::size_t passed = 0;
    for (const auto& r : results_) passed += r.pass;
    std::cout << "\n" << passed << " of " << results_.size() << " checks passed\n";
    return passed == results_.size() ? 0 : 1;
  }

 private:
  fs::path work_;
  std::size_t threads_;
  fs::path synthetic_;
  std::optional<ingest::Dataset> data_;
  std::map<std::string, Trained> trained_;
  std::vector<Outcome> results_;
};

// 1. Complete-model gradient check at toy size.
void gradient_integrity(Suite& s) {
  const auto start = Clock::now();
  const auto out = s.drpn({"gradcheck", "--scope", "full", "--tol", "1e-4"});
  const double secs = seconds_since(start);
  const auto cases = cli::run_gradchecks(cli::GradcheckScope::kFull, 1e-4);
  std::size_t coords = 0;
  double worst = 0.0;
  bool ok = true;
  for (const auto& c : cases) {
    coords += c.report.checked;
    worst = std::max(worst, c.report.max_rel_error);
    ok = ok && c.report.passed();
  }
  s.check("1   gradient integrity", ok && worst < 1e-4 && secs < 60.0,
          fmt("%zu coordinates, max rel error %.2e (< 1e-4), %.1f s (< 60 s)", coords, worst, secs));
}

// 2. Metrics against brute force on 1,000 random impressions.
void metric_oracles(Suite& s) {
  const auto start = Clock::now();
  std::mt19937_64 rng(77);
  std::size_t mismatches = 0;
  double worst_ndcg = 0.0;
  std::vector<eval::ImpressionScores> imps;
  std::vector<std::array<double, 4>> brute_values;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng() % 30;
    std::vector<double> sc(n);
    std::vector<int> lab(n, 0);
    for (auto& v : sc) v = (rng() % 4 == 0) ? double(rng() % 5) : std::uniform_real_distribution<>(-3, 3)(rng);
    for (auto& v : lab) v = int(rng() % 4 == 0);
    lab[0] = 1;
    lab[1] = 0;
    std::shuffle(lab.begin(), lab.end(), rng);
    const std::array<double, 4> b{brute::auc(sc, lab), brute::mrr(sc, lab), brute::ndcg(sc, lab, 5),
                                  brute::ndcg(sc, lab, 10)};
    mismatches += *eval::auc(sc, lab) != b[0];
    mismatches += *eval::mrr(sc, lab) != b[1];
    worst_ndcg = std::max({worst_ndcg, std::abs(*eval::ndcg(sc, lab, 5) - b[2]),
                           std::abs(*eval::ndcg(sc, lab, 10) - b[3])});
    eval::ImpressionScores imp{std::to_string(t), {}};
    for (std::size_t i = 0; i < n; ++i) imp.items.push_back({"N" + std::to_string(i), lab[i], sc[i]});
    imps.push_back(std::move(imp));
    brute_values.push_back(b);
  }
  // Aggregates are plain means over impressions.
  const auto report = eval::summarize(imps);
  std::array<double, 4> mean{};
  for (const auto& b : brute_values)
    for (int k = 0; k < 4; ++k) mean[k] += b[k] / 1000.0;
  const double agg = std::max({std::abs(report.auc - mean[0]), std::abs(report.mrr - mean[1]),
                               std::abs(report.ndcg5 - mean[2]), std::abs(report.ndcg10 - mean[3])});
  const double secs = seconds_since(start);
  s.check("2   metric oracles", mismatches == 0 && worst_ndcg <= 1e-12 && agg <= 1e-12 && secs < 10.0,
          fmt("AUC/MRR mismatches %zu (exact), nDCG max diff %.1e (<= 1e-12), mean diff %.1e, %.2f s (< 10 s)",
              mismatches, worst_ndcg, agg, secs));
}

model::History padded_history(const model::NewsIndex& index, const std::vector<std::string>& ids) {
  model::History h;
  for (const auto& id : ids) {
    h.news_ids.push_back(id);
    h.refs.push_back(index.lookup(id));
    h.mask.push_back(id == ingest::kPadNewsId ? 0 : 1);
  }
  return h;
}

model::History plain_history(const model::NewsIndex& index, const std::vector<std::string>& ids) {
  model::History h;
  for (const auto& id : ids) {
    h.news_ids.push_back(id);
    h.refs.push_back(index.lookup(id));
  }
  return h;
}

struct UntrainedModel {
  model::ModelConfig config;
  model::NewsIndex index;
  num::ParamStore store;
};

UntrainedModel untrained(Suite& s, model::Variant variant = model::Variant::kFull) {
  cli::RunConfig cfg;
  cfg.merge_file(s.config());
  UntrainedModel m;
  m.config = cfg.model();
  m.config.variant = variant;
  m.index = training::build_index(s.dataset(), m.config.k_nbr);
  m.store = model::init_model(m.config, m.index, 1234);
  return m;
}

// Users with both feedback sequences non-empty.
std::vector<std::string> sample_users(const ingest::Dataset& data, std::size_t n) {
  std::vector<std::string> out;
  for (const auto& [id, p] : data.profiles.users()) {
    if (p.full_positive.size() >= 2 && p.full_negative.size() >= 2) out.push_back(id);
    if (out.size() == n) break;
  }
  return out;
}

// 3. γ gate of the denoiser.
void gamma_gate(Suite& s) {
  auto m = untrained(s);
  const auto& ids = model::bind_model(m.store, m.config);
  double gammas[] = {0.0, -0.4, -1e-9, -3.0};
  int g = 0;
  for (auto* d : {&ids.sem_da_pos, &ids.sem_da_neg, &ids.col_da_pos, &ids.col_da_neg})
    m.store.slot(d->gamma).value[0] = gammas[g++];
  const model::Drpn net(m.config, m.store, m.index);
  const auto& catalog = s.dataset().catalog;
  std::mt19937_64 rng(3);
  auto random_ids = [&](std::size_t len) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < len; ++i) out.push_back(catalog.at(rng() % catalog.size()).id);
    return out;
  };
  double worst = 0.0;
  std::size_t trials = 0;
  for (const auto& user : sample_users(s.dataset(), 25)) {
    const auto history = model::make_history(m.index, s.dataset().profiles.lookup(user));
    num::Tape t(m.store);
    const auto base = net.encode_user(t, history);
    for (int k = 0; k < 4; ++k) {
      auto neg = history;
      neg.neg = plain_history(m.index, random_ids(1 + rng() % m.config.l_n));
      auto pos = history;
      pos.pos = plain_history(m.index, random_ids(1 + rng() % m.config.l_p));
      const auto a = net.encode_user(t, neg);
      const auto b = net.encode_user(t, pos);
      worst = std::max({worst, num::max_abs_diff(a.sem.ph.value(), base.sem.ph.value()),
                        num::max_abs_diff(a.col.ph.value(), base.col.ph.value()),
                        num::max_abs_diff(b.sem.nh.value(), base.sem.nh.value()),
                        num::max_abs_diff(b.col.nh.value(), base.col.nh.value())});
      trials += 2;
    }
  }
  s.check("3a  gate closed (gamma <= 0)", trials > 0 && worst < 1e-12,
          fmt("%zu perturbations of the opposite sequence, max |diff| of denoised vectors %.1e (< 1e-12)", trials,
              worst));

  num::ParamStore empty;
  num::Tape t(empty);
  std::size_t bumps = 0, violations = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 40;
    num::Tensor sp(n, 1), sn(n, 1);
    std::uniform_real_distribution<> u(-3, 3);
    for (std::size_t i = 0; i < n; ++i) sp(i, 0) = u(rng), sn(i, 0) = u(rng);
    // One masked entry, leaving at least two real ones so α_j is not pinned at 1.
    model::Mask mask(n, 1);
    if (n > 2) mask[1 + rng() % (n - 1)] = 0;
    const double gamma = std::exp(std::uniform_real_distribution<>(-4, 1.5)(rng));
    auto gv = t.constant(num::Tensor::scalar(gamma));
    const auto before = model::gated_softmax(t.constant(sp), t.constant(sn), gv, mask).value();
    for (std::size_t j = 0; j < n; ++j) {
      if (!mask[j]) continue;
      auto bumped = sn;
      bumped(j, 0) += std::exp(std::uniform_real_distribution<>(-9, 2)(rng));
      const auto after = model::gated_softmax(t.constant(sp), t.constant(bumped), gv, mask).value();
      ++bumps;
      violations += !(after(j, 0) < before(j, 0));
    }
  }
  s.check("3b  gate open (ReLU(gamma) > 0)", violations == 0,
          fmt("%zu increases of s^n_j, %zu failed to strictly lower alpha_j", bumps, violations));
}

// 4 and 5. Training on the planted-noise data.
void denoising_recovery(Suite& s) {
  const auto& full = s.trained("full", 1);
  s.check("4a  full model test AUC", full.test.auc > 0.80 && full.train_seconds < 900.0,
          fmt("AUC %.4f (> 0.80), trained to plateau in %.0f s single-threaded (< 900 s)", full.test.auc,
              full.train_seconds));

  const auto& nd = s.trained("no-denoise", s.threads());
  const double gap = 100.0 * (full.test.auc - nd.test.auc);
  s.check("4b  full vs DRPN-D", gap >= 0.5,
          fmt("AUC %.2f vs %.2f, gap %+.2f points (>= 0.5)", 100 * full.test.auc, 100 * nd.test.auc, gap));

  const auto user = sample_users(s.dataset(), 1).at(0);
  const auto dir = full.dir / "inspect";
  s.drpn({"inspect", "--checkpoint", (full.dir / "best.ckpt").string(), "--user", user, "--threads",
          std::to_string(s.threads()), "--out", dir.string()});
  std::map<std::string, double> stats;
  std::istringstream in(slurp(dir / "noise_attention.tsv"));
  std::string key;
  double v = 0.0;
  while (in >> key >> v) stats[key] = v;
  s.check("4c  noise attention", stats.at("ratio") < 0.9,
          fmt("mean alpha noise %.5f over %.0f entries, clean %.5f over %.0f, ratio %.3f (< 0.9)",
              stats.at("noise_mean"), stats.at("noise_count"), stats.at("clean_mean"), stats.at("clean_count"),
              stats.at("ratio")));
}

void ablation_direction(Suite& s) {
  const auto& full = s.trained("full", 1);
  for (const auto& [variant, name] : {std::pair{"positive-only", "DRPN-N"}, std::pair{"negative-only", "DRPN-P"}}) {
    const auto& other = s.trained(variant, s.threads());
    const double gap = 100.0 * (full.test.auc - other.test.auc);
    s.check(std::string("5   full vs ") + name, gap >= -0.2,
            fmt("AUC %.2f vs %.2f, gap %+.2f points (>= -0.2), seed 42", 100 * full.test.auc, 100 * other.test.auc,
                gap));
  }
}

// 6. Invariances of the untrained model and the loss.
void invariance(Suite& s) {
  std::mt19937_64 rng(6);
  auto m = untrained(s);
  const auto& ids = model::bind_model(m.store, m.config);

  double agg = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    num::Tensor x(n, m.config.d);
    for (auto& v : x.values()) v = std::uniform_real_distribution<>(-2, 2)(rng);
    model::Mask mask(n, 1);
    for (auto& b : mask) b = rng() % 4 != 0;
    mask[rng() % n] = 1;
    std::vector<std::ptrdiff_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    model::Mask pmask(n);
    for (std::size_t i = 0; i < n; ++i) pmask[i] = mask[std::size_t(perm[i])];
    num::Tape t(m.store);
    auto xv = t.constant(x);
    const auto a = model::gated_aggregate(t, ids.sem_ca_pos.agg, xv, mask).value();
    const auto b = model::gated_aggregate(t, ids.sem_ca_pos.agg, num::index_rows(xv, perm), pmask).value();
    agg = std::max(agg, num::max_abs_diff(a, b));
  }
  s.check("6a  gated aggregation permutation", agg < 1e-12, fmt("50 random sets, max |diff| %.1e (< 1e-12)", agg));

  const auto users = sample_users(s.dataset(), 20);
  std::vector<model::NewsRef> cands;
  for (std::size_t i = 0; i < 12; ++i) cands.push_back(m.index.lookup(s.dataset().catalog.at(i * 37).id));
  double seq_perm = 0.0, padding = 0.0;
  for (auto variant : {model::Variant::kFull, model::Variant::kNoDenoise, model::Variant::kNoGraph,
                       model::Variant::kNoDenoiseNoGraph, model::Variant::kPositiveOnly,
                       model::Variant::kNegativeOnly}) {
    auto cfg = m.config;
    cfg.variant = variant;
    const model::Drpn net(cfg, m.store, m.index);
    for (const auto& user : users) {
      const auto profile = s.dataset().profiles.lookup(user);
      num::Tape t(m.store);
      const auto trimmed = model::make_history(m.index, profile);
      const auto base = net.score(t, net.encode_user(t, trimmed), cands).value();

      auto shuffled = trimmed;
      for (auto* h : {&shuffled.pos, &shuffled.neg}) {
        std::vector<std::string> order = h->news_ids;
        std::shuffle(order.begin(), order.end(), rng);
        *h = plain_history(m.index, order);
      }
      seq_perm = std::max(seq_perm, num::max_abs_diff(net.score(t, net.encode_user(t, shuffled), cands).value(), base));

      const model::UserHistory padded{padded_history(m.index, profile.positive),
                                      padded_history(m.index, profile.negative)};
      padding = std::max(padding, num::max_abs_diff(net.score(t, net.encode_user(t, padded), cands).value(), base));
    }
  }
  s.check("6b  feedback sequence permutation", seq_perm < 1e-12,
          fmt("%zu users x 6 variants, max |score diff| %.1e (< 1e-12)", users.size(), seq_perm));
  s.check("6c  masked padding", padding < 1e-12,
          fmt("padded to l_p=%zu/l_n=%zu vs trimmed, max |score diff| %.1e (< 1e-12)", m.config.l_p, m.config.l_n,
              padding));

  num::ParamStore empty;
  num::Tape t(empty);
  double shift = 0.0, uniform = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    num::Tensor sc(n, 5);
    for (auto& v : sc.values()) v = std::uniform_real_distribution<>(-5, 5)(rng);
    const double c = std::uniform_real_distribution<>(-50, 50)(rng);
    auto moved = sc;
    for (auto& v : moved.values()) v += c;
    const double a = model::training_loss(t.constant(sc)).value()[0];
    const double b = model::training_loss(t.constant(moved)).value()[0];
    shift = std::max(shift, std::abs(a - b));
    num::Tensor flat(n, 5);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t k = 0; k < 5; ++k) flat(r, k) = c * double(r + 1);
    uniform = std::max(uniform, std::abs(model::training_loss(t.constant(flat)).value()[0] - std::log(5.0)));
  }
  s.check("6d  loss shift invariance", shift < 1e-12,
          fmt("100 batches shifted by up to 50, max |diff| %.1e (< 1e-12)", shift));
  s.check("6e  uniform-score loss", uniform < 1e-9, fmt("max |loss - ln 5| %.1e (< 1e-9)", uniform));
}

// 7. Identical seeds give identical bytes, with any thread count.
void determinism(Suite& s) {
  const auto data = s.synthetic().string();
  auto run = [&](const std::string& name, std::size_t threads) {
    const auto dir = s.work() / ("determinism_" + name);
    s.drpn({"train", "--config", s.config(), "--data", data, "--epochs", "2", "--max_steps", "25", "--threads",
            std::to_string(threads), "--out", dir.string()});
    s.drpn({"evaluate", "--checkpoint", (dir / "best.ckpt").string(), "--split", "test", "--threads",
            std::to_string(threads), "--out", (dir / "test").string()});
    return dir;
  };
  const auto a = run("a", 1), b = run("b", 1), c = run("c", 4);
  auto same = [&](const fs::path& x, const fs::path& y) {
    for (const char* f : {"best.ckpt", "last.ckpt", "train_log.tsv", "test/report.tsv", "test/scores.tsv"})
      if (slurp(x / f) != slurp(y / f)) return std::string(f);
    return std::string();
  };
  const auto rerun = same(a, b);
  s.check("7a  identical-seed runs", rerun.empty(),
          rerun.empty() ? "checkpoints, training logs, score dumps and reports are bit-identical"
                        : "differs in " + rerun);
  const auto threaded = same(a, c);
  s.check("7b  --threads 4 equals --threads 1", threaded.empty(),
          threaded.empty() ? "checkpoints, training logs, score dumps and reports are bit-identical"
                           : "differs in " + threaded);
}

// 8. Rebuild of the hand-written fixture.
void rebuild_fidelity(Suite& s) {
  const fs::path fixture = fs::path(DRPN_FIXTURES) / "rebuild";
  std::size_t lines = 0;
  {
    std::ifstream in(fixture / "behaviors.tsv");
    for (std::string l; std::getline(in, l);) ++lines;
  }
  const auto out = s.work() / "fixture_rebuild";
  s.drpn({"rebuild-dataset", "--behaviors", (fixture / "behaviors.tsv").string(), "--news",
          (fixture / "news.tsv").string(), "--l_p", "2", "--l_n", "2", "--k_nbr", "2", "--out", out.string()});
  ingest::RebuildOptions options;
  options.l_p = options.l_n = 2;
  options.k_nbr = 2;
  auto failures = fixture::check_rebuild(ingest::load_dataset(out, options));
  for (const auto& f : fixture::check_rebuild(ingest::rebuild_dataset(fixture / "behaviors.tsv",
                                                                      fixture / "news.tsv", options)))
    failures.push_back("in memory: " + f);
  std::string detail = fmt("%zu-line fixture: splits, profiles, feedback matrix and top-2 graph", lines);
  detail += failures.empty() ? " match" : "; " + failures.front();
  s.check("8   dataset rebuild fidelity", failures.empty() && lines <= 30, detail);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"End-to-end acceptance checks"};
  std::string work = "acceptance_work";
  std::size_t threads = 1;
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory, cleared first")->capture_default_str();
  app.add_option("--threads", threads, "threads for runs that are not timed")->capture_default_str();
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  fs::remove_all(work);
  fs::create_directories(work);
  Suite s(fs::absolute(work), std::max<std::size_t>(threads, 1));
  const std::vector<std::pair<int, std::function<void(Suite&)>>> criteria{
      {1, gradient_integrity}, {2, metric_oracles}, {8, rebuild_fidelity}, {6, invariance},
      {3, gamma_gate},         {7, determinism},    {4, denoising_recovery}, {5, ablation_direction}};
  const auto start = Clock::now();
  for (const auto& [n, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), n) == only.end()) continue;
    s.run(std::to_string(n), [&] { fn(s); });
  }
  std::cout << fmt("total %.0f s", seconds_since(start));
  return s.summary();
}
