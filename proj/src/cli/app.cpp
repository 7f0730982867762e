#include "drpn/cli/app.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "drpn/cli/gradcheck_suite.hpp"
#include "drpn/cli/run_config.hpp"
#include "drpn/errors.hpp"
#include "drpn/eval/ablation.hpp"
#include "drpn/eval/attention.hpp"
#include "drpn/eval/evaluate.hpp"
#include "drpn/ingest/synthetic.hpp"
#include "drpn/ingest/tsv.hpp"
#include "drpn/numerics/checkpoint.hpp"
#include "drpn/training/trainer.hpp"

namespace drpn::cli {

namespace fs = std::filesystem;

namespace {

/// --key value options bound to configuration keys.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app, const std::vector<std::string>& only = {}) {
    for (const auto& k : RunConfig::keys()) {
      const std::string name = k.name;
      if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
      std::string flags = "--" + name;
      if (name.find('_') != std::string::npos) {
        std::string dashed = name;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        flags += ",--" + dashed;
      }
      options[name] = app.add_option(flags, values[name], k.help);
    }
  }

  /// Flags override whatever the config already holds.
  void apply(RunConfig& cfg) const {
    std::map<std::string, std::string> set;
    for (const auto& [name, opt] : options)
      if (opt->count() > 0) set[name] = values.at(name);
    cfg.merge(set, "command line");
  }
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

const std::vector<ingest::ImpressionLog>& split_of(const ingest::Dataset& data, const std::string& name) {
  if (name == "test") return data.splits.test;
  if (name == "validation" || name == "valid") return data.splits.validation;
  if (name == "train") return data.splits.train;
  throw ConfigError("unknown split '" + name + "' (expected train, validation or test)");
}

ingest::Dataset load_data(const RunConfig& cfg) {
  if (cfg.text("data").empty()) throw ConfigError("no dataset: set 'data' in the config or pass --data");
  return ingest::load_dataset(cfg.text("data"), cfg.rebuild());
}

/// Config of a trained model, with optional --data/--threads overrides.
RunConfig checkpoint_config(const fs::path& checkpoint, const KeyFlags& flags) {
  const auto ckpt = num::load_checkpoint(checkpoint);
  RunConfig cfg = RunConfig::from_header(ckpt.header);
  flags.apply(cfg);
  if (!cfg.text("data").empty()) cfg.set("data", absolute(cfg.text("data")));
  cfg.validate();
  return cfg;
}

training::StepHook progress(std::ostream& err) {
  auto start = std::make_shared<std::chrono::steady_clock::time_point>(std::chrono::steady_clock::now());
  return [&err, start](std::size_t epoch, std::size_t step, double loss) {
    if (step % 50 != 0) return;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - *start).count();
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %zu step %zu loss %.4f (%.0fs)\n", epoch, step, loss, secs);
    err << buf << std::flush;
  };
}

void print_epochs(std::ostream& out, const training::TrainResult& r) {
  char buf[160];
  for (const auto& e : r.epochs) {
    std::snprintf(buf, sizeof buf, "epoch %zu  train loss %.4f  val AUC %.4f  MRR %.4f  nDCG@10 %.4f%s\n", e.epoch,
                  e.train_loss, e.validation.auc, e.validation.mrr, e.validation.ndcg10, e.improved ? "  *" : "");
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "best epoch %zu (val AUC %.4f); first batch loss %.4f\n", r.best_epoch,
                r.best_val_auc, r.first_batch_loss);
  out << buf;
}

int cmd_rebuild(const std::string& behaviors, const std::string& news, const std::string& dev, const fs::path& out_dir,
                const std::string& config, const KeyFlags& flags, std::ostream& out) {
  RunConfig cfg;
  if (!config.empty()) cfg.merge_file(config);
  flags.apply(cfg);
  cfg.validate();
  std::optional<fs::path> dev_path;
  if (!dev.empty()) dev_path = dev;
  const auto data = ingest::rebuild_dataset(behaviors, news, cfg.rebuild(), dev_path);
  ingest::write_dataset(out_dir, data);
  cfg.set("data", absolute(out_dir.string()));
  cfg.write(out_dir / "run.conf");
  out << "profile " << data.splits.profile.size() << ", train " << data.splits.train.size() << ", validation "
      << data.splits.validation.size() << ", test " << data.splits.test.size() << " impressions; "
      << data.profiles.users().size() << " profiled users; " << data.graph.node_count() << " graph nodes, "
      << data.graph.edge_count() << " edges\n";
  return kExitOk;
}

int cmd_synth(const ingest::SyntheticOptions& o, const fs::path& out_dir, std::ostream& out) {
  if (o.n_users == 0 || o.n_news == 0 || o.n_topics == 0) throw ConfigError("synth sizes must be positive");
  if (o.noise_rate < 0.0 || o.noise_rate > 1.0) throw ConfigError("noise rate must lie in [0, 1]");
  const auto data = ingest::generate_synthetic(o);
  ingest::write_synthetic(out_dir, data);
  write_text(out_dir / "run.conf", "users = " + std::to_string(o.n_users) + "\nnews = " + std::to_string(o.n_news) +
                                       "\ntopics = " + std::to_string(o.n_topics) +
                                       "\nnoise_rate = " + ingest::format_double(o.noise_rate) +
                                       "\nseed = " + std::to_string(o.seed) + "\n");
  std::size_t noisy = 0;
  for (const auto& t : data.truth.entries) noisy += t.noise;
  out << data.logs.size() << " impressions over " << o.n_users << " users and " << data.catalog.size()
      << " news; " << noisy << " of " << data.truth.entries.size() << " profile feedback entries are noise\n";
  return kExitOk;
}

int cmd_train(const std::string& config, const fs::path& out_dir, const KeyFlags& flags, std::ostream& out,
              std::ostream& err) {
  RunConfig cfg;
  if (!config.empty()) cfg.merge_file(config);
  flags.apply(cfg);
  cfg.validate();
  if (!cfg.text("data").empty()) cfg.set("data", absolute(cfg.text("data")));
  if (!cfg.text("embeddings").empty()) cfg.set("embeddings", absolute(cfg.text("embeddings")));
  const auto data = load_data(cfg);
  fs::create_directories(out_dir);
  cfg.write(out_dir / "run.conf");
  const auto result = training::train(cfg.train(), data, out_dir, progress(err));
  print_epochs(out, result);
  if (result.skipped_impressions > 0) {
    out << result.skipped_impressions << " training impressions had clicks but no skipped item and were skipped\n";
  }
  return kExitOk;
}

int cmd_evaluate(const fs::path& checkpoint, const std::string& split, const fs::path& out_dir,
                 const KeyFlags& flags, std::ostream& out) {
  RunConfig cfg = checkpoint_config(checkpoint, flags);
  const auto data = load_data(cfg);
  const auto loaded = training::load_model(checkpoint, data);
  const model::Drpn net(loaded.config, loaded.params, loaded.index);
  const auto& logs = split_of(data, split);
  const auto scores = eval::score_impressions(net, loaded.params, data.profiles, logs, cfg.count("threads"));
  const std::vector<std::pair<std::string, eval::MetricReport>> rows{
      {eval::ablation_name(loaded.config.variant), eval::summarize(scores)}};
  fs::create_directories(out_dir);
  {
    std::ofstream dump(out_dir / "scores.tsv", std::ios::binary | std::ios::trunc);
    eval::write_score_dump(dump, scores);
    if (!dump) throw DataError("cannot write scores.tsv");
  }
  std::ostringstream tsv;
  eval::write_report_tsv(tsv, rows);
  write_text(out_dir / "report.tsv", tsv.str());
  const auto table = eval::format_report_table(rows);
  write_text(out_dir / "report.txt", table);
  cfg.write(out_dir / "run.conf");
  out << split << " split, " << logs.size() << " impressions\n" << table;
  return kExitOk;
}

int cmd_ablate(const std::string& config, const fs::path& out_dir, const KeyFlags& flags, std::ostream& out,
               std::ostream& err) {
  RunConfig cfg;
  if (!config.empty()) cfg.merge_file(config);
  flags.apply(cfg);
  cfg.validate();
  if (!cfg.text("data").empty()) cfg.set("data", absolute(cfg.text("data")));
  const auto data = load_data(cfg);
  fs::create_directories(out_dir);
  cfg.write(out_dir / "run.conf");
  const auto rows = eval::compare_ablations(cfg.train(), data, out_dir, eval::all_variants(), progress(err));
  const auto table_rows = eval::ablation_table(rows);
  std::ostringstream tsv;
  eval::write_report_tsv(tsv, table_rows);
  write_text(out_dir / "ablation.tsv", tsv.str());
  const auto table = eval::format_report_table(table_rows);
  write_text(out_dir / "ablation.txt", table);
  out << "test split\n" << table;
  return kExitOk;
}

int cmd_gradcheck(const std::string& scope, double tol, std::uint64_t seed, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto cases = run_gradchecks(parse_scope(scope), tol, seed);
  bool ok = true;
  char buf[256];
  for (const auto& c : cases) {
    ok = ok && c.report.passed();
    std::snprintf(buf, sizeof buf, "%-4s %-26s %7zu coords  max rel err %.3e  %s\n",
                  c.report.passed() ? "ok" : "FAIL", c.name.c_str(), c.report.checked, c.report.max_rel_error,
                  c.report.worst.c_str());
    out << buf;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::snprintf(buf, sizeof buf, "%s: %zu checks at tol %.1e in %.1fs\n", ok ? "passed" : "FAILED", cases.size(), tol,
                secs);
  out << buf;
  return ok ? kExitOk : kExitCheck;
}

int cmd_inspect(const fs::path& checkpoint, const std::string& user, const fs::path& out_dir, const KeyFlags& flags,
                std::ostream& out) {
  RunConfig cfg = checkpoint_config(checkpoint, flags);
  const auto data = load_data(cfg);
  const auto loaded = training::load_model(checkpoint, data);
  const model::Drpn net(loaded.config, loaded.params, loaded.index);
  const auto entries = eval::attention_weights(net, loaded.params, data.profiles, user, &data.catalog);
  fs::create_directories(out_dir);
  {
    std::ofstream tsv(out_dir / "attention.tsv", std::ios::binary | std::ios::trunc);
    eval::write_attention_tsv(tsv, entries);
  }
  write_text(out_dir / "attention.svg", eval::attention_svg(entries));
  out << entries.size() << " weighted history entries for user " << user << "\n";

  const fs::path truth = fs::path(cfg.text("data")) / "truth.tsv";
  if (fs::exists(truth)) {
    const auto stats =
        eval::noise_attention(net, loaded.params, data.profiles, ingest::read_truth(truth), cfg.count("threads"));
    using ingest::format_double;
    write_text(out_dir / "noise_attention.tsv",
               "noise_mean\t" + format_double(stats.noise_mean) + "\nclean_mean\t" + format_double(stats.clean_mean) +
                   "\nratio\t" + format_double(stats.ratio()) + "\nnoise_count\t" +
                   std::to_string(stats.noise_count) + "\nclean_count\t" + std::to_string(stats.clean_count) +
                   "\nnoise_lower_half\t" + format_double(stats.noise_lower_half) + "\n");
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "mean alpha: noise %.5f over %zu entries, clean %.5f over %zu (ratio %.3f); %.1f%% of noise "
                  "entries rank in the lower half\n",
                  stats.noise_mean, stats.noise_count, stats.clean_mean, stats.clean_count, stats.ratio(),
                  100 * stats.noise_lower_half);
    out << buf;
  }
  cfg.write(out_dir / "run.conf");
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Denoising news recommendation with positive and negative implicit feedback"};
  app.require_subcommand(1);
  app.footer(RunConfig::describe() +
             "\nExit codes: 0 success, 1 usage or configuration error, 2 data error, 3 failed check.");

  std::string behaviors, news, dev, out_dir, config, checkpoint, split = "test", user, scope = "full";
  double tol = 1e-4;
  std::uint64_t check_seed = 1;
  ingest::SyntheticOptions synth;

  auto* rebuild = app.add_subcommand("rebuild-dataset", "Split raw logs, build profiles and the co-click graph");
  KeyFlags rebuild_flags;
  rebuild->add_option("--behaviors", behaviors, "behaviors TSV")->required();
  rebuild->add_option("--news", news, "news TSV")->required();
  rebuild->add_option("--dev-behaviors", dev, "extra validation-source behaviors TSV");
  rebuild->add_option("--out", out_dir, "output directory (must not exist or be empty)")->required();
  rebuild->add_option("--config", config, "config file");
  rebuild_flags.attach(*rebuild, {"profile_days", "train_days", "val_frac", "l_p", "l_n", "k_nbr", "vocab_cap",
                                  "title_len"});

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset with planted feedback noise");
  synth_cmd->add_option("--users", synth.n_users, "users")->capture_default_str();
  synth_cmd->add_option("--news", synth.n_news, "news")->capture_default_str();
  synth_cmd->add_option("--topics", synth.n_topics, "topics")->capture_default_str();
  synth_cmd->add_option("--noise-rate,--noise_rate", synth.noise_rate, "flip rate in the profile window")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "seed")->capture_default_str();
  synth_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* train = app.add_subcommand("train", "Train a model; writes best.ckpt, last.ckpt and train_log.tsv");
  KeyFlags train_flags;
  train->add_option("--config", config, "config file");
  train->add_option("--out", out_dir, "output directory")->required();
  train_flags.attach(*train);

  auto* evaluate = app.add_subcommand("evaluate", "Score a split with a checkpoint; writes scores and reports");
  KeyFlags eval_flags;
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  evaluate->add_option("--split", split, "train, validation or test")->capture_default_str();
  evaluate->add_option("--out", out_dir, "output directory")->required();
  eval_flags.attach(*evaluate, {"data", "threads"});

  auto* ablate = app.add_subcommand("ablate", "Train and test every model variant under one configuration");
  KeyFlags ablate_flags;
  ablate->add_option("--config", config, "config file");
  ablate->add_option("--out", out_dir, "output directory")->required();
  ablate_flags.attach(*ablate);

  auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  gradcheck->add_option("--scope", scope, "op, module or full")->capture_default_str();
  gradcheck->add_option("--tol", tol, "maximum relative error")->capture_default_str();
  gradcheck->add_option("--seed", check_seed, "seed for random points")->capture_default_str();

  auto* inspect = app.add_subcommand("inspect", "Export a user's denoising weights as TSV and SVG");
  KeyFlags inspect_flags;
  inspect->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  inspect->add_option("--user", user, "user id")->required();
  inspect->add_option("--out", out_dir, "output directory")->required();
  inspect_flags.attach(*inspect, {"data", "threads"});

  std::vector<std::string> rest(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (rebuild->parsed()) return cmd_rebuild(behaviors, news, dev, out_dir, config, rebuild_flags, out);
    if (synth_cmd->parsed()) return cmd_synth(synth, out_dir, out);
    if (train->parsed()) return cmd_train(config, out_dir, train_flags, out, err);
    if (evaluate->parsed()) return cmd_evaluate(checkpoint, split, out_dir, eval_flags, out);
    if (ablate->parsed()) return cmd_ablate(config, out_dir, ablate_flags, out, err);
    if (gradcheck->parsed()) return cmd_gradcheck(scope, tol, check_seed, out);
    if (inspect->parsed()) return cmd_inspect(checkpoint, user, out_dir, inspect_flags, out);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace drpn::cli
