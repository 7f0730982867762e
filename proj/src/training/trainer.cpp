#include "drpn/training/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "drpn/errors.hpp"
#include "drpn/eval/evaluate.hpp"
#include "drpn/ingest/tsv.hpp"
#include "drpn/model/encoders.hpp"
#include "drpn/numerics/checkpoint.hpp"
#include "drpn/numerics/parallel.hpp"

namespace drpn::training {

namespace fs = std::filesystem;
using ingest::format_double;

std::vector<TrainSample> sample_negatives(const ingest::ImpressionLog& impression, std::size_t l_k, num::Rng& rng) {
  std::vector<TrainSample> out;
  for (const auto& pos : impression.displayed) {
    if (!pos.clicked) continue;
    std::vector<std::string> pool;
    for (const auto& item : impression.displayed)
      if (!item.clicked && item.news_id != pos.news_id) pool.push_back(item.news_id);
    if (pool.empty()) continue;
    TrainSample s{impression.user_id, impression.impression_id, pos.news_id, {}};
    // Partial Fisher-Yates: the first min(l_k, n) entries are a uniform draw
    // without replacement; any shortfall is filled with replacement.
    const std::size_t take = std::min(l_k, pool.size());
    for (std::size_t i = 0; i < take; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    s.negatives.assign(pool.begin(), pool.begin() + long(take));
    while (s.negatives.size() < l_k) s.negatives.push_back(pool[rng.below(pool.size())]);
    out.push_back(std::move(s));
  }
  return out;
}

SampleSet epoch_samples(const std::vector<ingest::ImpressionLog>& logs, std::size_t l_k, std::uint64_t seed,
                        std::size_t epoch) {
  SampleSet set;
  num::Rng draw{seed, std::uint64_t(epoch), 1};
  for (const auto& log : logs) {
    auto samples = sample_negatives(log, l_k, draw);
    const bool clicked = std::any_of(log.displayed.begin(), log.displayed.end(), [](auto& i) { return i.clicked; });
    if (samples.empty() && clicked) ++set.skipped_impressions;
    for (auto& s : samples) set.samples.push_back(std::move(s));
  }
  num::Rng order{seed, std::uint64_t(epoch), 2};
  order.shuffle(set.samples);
  return set;
}

model::NewsIndex build_index(const ingest::Dataset& data, std::size_t k_nbr) {
  return model::NewsIndex::build(data.catalog, data.splits.profile, data.graph, k_nbr);
}

double batch_gradients(const model::Drpn& model, num::ParamStore& store, const ingest::ProfileSet& profiles,
                       const std::vector<const TrainSample*>& batch, std::size_t threads) {
  if (batch.empty()) throw DataError("empty batch");
  // Samples of one user share a single encoding of their history.
  std::vector<std::string> users;
  std::map<std::string, std::vector<const TrainSample*>> groups;
  for (const auto* s : batch) {
    auto& g = groups[s->user_id];
    if (g.empty()) users.push_back(s->user_id);
    g.push_back(s);
  }
  const double scale = 1.0 / double(batch.size());
  std::vector<num::GradBuffer> buffers(users.size(), num::GradBuffer(store));
  std::vector<double> losses(users.size(), 0.0);
  const std::size_t width = 1 + model.config().l_k;

  num::parallel_for(users.size(), threads, [&](std::size_t g) {
    const auto& members = groups.at(users[g]);
    num::Tape tape(store, &buffers[g]);
    const auto history = model::make_history(model.index(), profiles.lookup(users[g]));
    const auto user = model.encode_user(tape, history);
    std::vector<model::NewsRef> cands;
    for (const auto* s : members) {
      if (s->negatives.size() != width - 1) throw DataError("sample has the wrong number of negatives");
      cands.push_back(model.index().lookup(s->positive));
      for (const auto& n : s->negatives) cands.push_back(model.index().lookup(n));
    }
    auto scores = num::reshape(model.score(tape, user, cands), members.size(), width);
    auto loss = num::scalar_mul(model::training_loss(scores), double(members.size()) * scale);
    losses[g] = loss.value().item();
    if (!std::isfinite(losses[g])) {
      throw NumericError("non-finite loss for user " + users[g] + " (impression " + members.front()->impression_id +
                         ")");
    }
    tape.backward(loss);
  });

  store.zero_grads();
  double total = 0.0;
  for (std::size_t g = 0; g < users.size(); ++g) {
    store.accumulate(buffers[g]);
    total += losses[g];
  }
  return total;
}

std::string data_fingerprint(const ingest::Dataset& data, const model::NewsIndex& index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    h = (h ^ 0xff) * 0x100000001b3ULL;
  };
  const auto& vocab = data.catalog.vocab();
  for (std::uint32_t w = 0; w < vocab.size(); ++w) mix(vocab.word(w));
  for (std::size_t r = 0; r < index.id_rows(); ++r) mix(index.news_id(r));
  for (const auto& e : data.catalog.entries()) mix(e.id);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LoadedModel load_model(const fs::path& checkpoint, const ingest::Dataset& data) {
  auto ckpt = num::load_checkpoint(checkpoint);
  auto config = model::ModelConfig::from_header(ckpt.header);
  auto index = build_index(data, config.k_nbr);
  auto fp = ckpt.header.find("data_fingerprint");
  if (fp != ckpt.header.end() && fp->second != data_fingerprint(data, index)) {
    throw ConfigError("checkpoint " + checkpoint.string() + " was trained on a different dataset");
  }
  LoadedModel out{config, std::move(ckpt.header), std::move(ckpt.params), std::move(index)};
  // Verifies names and table sizes against the dataset.
  const auto fresh = model::init_model(config, out.index, 0);
  if (fresh.size() != out.params.size()) throw ConfigError("checkpoint slots do not match the model layout");
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    const auto& a = fresh.slot(num::SlotId(i));
    const auto& b = out.params.slot(num::SlotId(i));
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
      throw ConfigError("checkpoint slot '" + b.name + "' does not fit this dataset and configuration");
    }
  }
  return out;
}

namespace {

const char* kLogHeader = "record\tepoch\tstep\tloss\tlr\tval_auc\tval_mrr\tval_ndcg5\tval_ndcg10\n";

std::string epoch_line(const EpochRecord& r, std::size_t steps, double lr) {
  const auto& v = r.validation;
  return "epoch\t" + std::to_string(r.epoch) + '\t' + std::to_string(steps) + '\t' + format_double(r.train_loss) +
         '\t' + format_double(lr) + '\t' + format_double(v.auc) + '\t' + format_double(v.mrr) + '\t' +
         format_double(v.ndcg5) + '\t' + format_double(v.ndcg10) + '\n';
}

std::size_t header_count(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw ConfigError("checkpoint header lacks '" + key + "'");
  return std::stoul(it->second);
}

double header_double(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw ConfigError("checkpoint header lacks '" + key + "'");
  return std::stod(it->second);
}

/// Keeps log lines of completed epochs and recovers their epoch records.
std::string replay_log(const fs::path& path, std::size_t completed, std::vector<EpochRecord>& records) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot resume: missing training log " + path.string());
  std::string kept, line;
  std::getline(in, line);
  kept = kLogHeader;
  while (std::getline(in, line)) {
    const auto f = ingest::split_tabs(line);
    if (f.size() != 9) throw DataError("cannot resume: malformed training log line: " + line);
    const std::size_t epoch = std::stoul(std::string(f[1]));
    if (epoch > completed) continue;
    kept += line + '\n';
    if (f[0] == "epoch") {
      EpochRecord r;
      r.epoch = epoch;
      r.train_loss = std::stod(std::string(f[3]));
      r.validation.auc = std::stod(std::string(f[5]));
      r.validation.mrr = std::stod(std::string(f[6]));
      r.validation.ndcg5 = std::stod(std::string(f[7]));
      r.validation.ndcg10 = std::stod(std::string(f[8]));
      records.push_back(r);
    }
  }
  return kept;
}

}  // namespace

TrainResult train(const TrainOptions& options, const ingest::Dataset& data, const fs::path& out_dir,
                  const StepHook& hook) {
  const auto& cfg = options.model;
  cfg.validate();
  if (options.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(options.lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (data.profiles.l_p() != cfg.l_p || data.profiles.l_n() != cfg.l_n) {
    throw ConfigError("profiles were built with different l_p/l_n than the model config");
  }
  fs::create_directories(out_dir);

  const auto index = build_index(data, cfg.k_nbr);
  num::ParamStore store = model::init_model(cfg, index, options.seed);
  model::Drpn net(cfg, store, index);
  num::Adam adam({options.lr});

  std::map<std::string, std::string> header = options.header;
  for (const auto& [k, v] : cfg.to_header()) header[k] = v;
  header["word_rows"] = std::to_string(index.word_rows());
  header["news_rows"] = std::to_string(index.id_rows());
  header["seed"] = std::to_string(options.seed);
  header["data_fingerprint"] = data_fingerprint(data, index);
  header["lr"] = format_double(options.lr);
  header["batch_size"] = std::to_string(options.batch_size);

  TrainResult result;
  result.best_checkpoint = out_dir / "best.ckpt";
  result.log_path = out_dir / "train_log.tsv";
  const fs::path last_path = out_dir / "last.ckpt";

  std::size_t start_epoch = 1, stale = 0;
  bool finished = false;
  std::string log_text = kLogHeader;
  if (options.resume && fs::exists(last_path)) {
    auto last = num::load_checkpoint(last_path);
    for (const char* key : {"d", "agg_dim", "heads", "graph_heads", "variant", "seed", "data_fingerprint"}) {
      auto it = last.header.find(key);
      if (it == last.header.end() || it->second != header.at(key)) {
        throw ConfigError(std::string("cannot resume: checkpoint was trained with a different '") + key + "'");
      }
    }
    num::copy_values(last.params, store);
    if (last.optimizer) adam = *last.optimizer;
    adam.set_lr(options.lr);
    const std::size_t completed = header_count(last.header, "epochs_done");
    start_epoch = completed + 1;
    stale = header_count(last.header, "stale_epochs");
    finished = header_count(last.header, "finished") != 0;
    result.best_epoch = header_count(last.header, "best_epoch");
    result.best_val_auc = header_double(last.header, "best_val_auc");
    result.first_batch_loss = header_double(last.header, "first_batch_loss");
    log_text = replay_log(result.log_path, completed, result.epochs);
    for (auto& r : result.epochs) r.improved = r.epoch == result.best_epoch;
  } else if (options.embeddings) {
    model::load_pretrained_embeddings(*options.embeddings, data.catalog.vocab(), store,
                                      net.ids().title.word_table);
  }

  std::vector<ingest::ImpressionLog> val_logs = data.splits.validation;
  if (options.max_val_impressions > 0 && val_logs.size() > options.max_val_impressions) {
    val_logs.resize(options.max_val_impressions);
  }

  auto write_log = [&] {
    std::ofstream out(result.log_path, std::ios::binary | std::ios::trunc);
    out << log_text;
    if (!out) throw DataError("cannot write " + result.log_path.string());
  };
  write_log();

  for (std::size_t epoch = start_epoch; epoch <= options.epochs && !finished; ++epoch) {
    const auto set = epoch_samples(data.splits.train, cfg.l_k, options.seed, epoch);
    result.skipped_impressions = set.skipped_impressions;
    if (set.samples.empty()) throw DataError("the training split yields no samples");
    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t begin = 0; begin < set.samples.size(); begin += options.batch_size) {
      if (options.max_steps > 0 && steps == options.max_steps) break;
      const std::size_t end = std::min(set.samples.size(), begin + options.batch_size);
      std::vector<const TrainSample*> batch;
      for (std::size_t i = begin; i < end; ++i) batch.push_back(&set.samples[i]);
      double loss = 0.0;
      try {
        loss = batch_gradients(net, store, data.profiles, batch, options.threads);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " + std::to_string(steps + 1) + ": " + e.what());
      }
      adam.step(store);
      ++steps;
      loss_sum += loss;
      if (epoch == 1 && steps == 1) result.first_batch_loss = loss;
      log_text += "step\t" + std::to_string(epoch) + '\t' + std::to_string(steps) + '\t' + format_double(loss) +
                  '\t' + format_double(options.lr) + "\t\t\t\t\n";
      if (hook) hook(epoch, steps, loss);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / double(steps);
    rec.validation = eval::evaluate(net, store, data.profiles, val_logs, options.threads);
    if (result.epochs.empty() && result.best_epoch == 0) result.best_val_auc = -1.0;
    rec.improved = rec.validation.auc > result.best_val_auc;
    if (rec.improved) {
      result.best_val_auc = rec.validation.auc;
      result.best_epoch = epoch;
      stale = 0;
      auto best_header = header;
      best_header["epoch"] = std::to_string(epoch);
      best_header["val_auc"] = format_double(rec.validation.auc);
      num::save_checkpoint(result.best_checkpoint, store, best_header);
    } else {
      ++stale;
    }
    finished = stale >= options.patience;
    result.epochs.push_back(rec);
    log_text += epoch_line(rec, steps, options.lr);
    write_log();

    auto last_header = header;
    last_header["epochs_done"] = std::to_string(epoch);
    last_header["stale_epochs"] = std::to_string(stale);
    last_header["finished"] = finished ? "1" : "0";
    last_header["best_epoch"] = std::to_string(result.best_epoch);
    last_header["best_val_auc"] = format_double(result.best_val_auc);
    last_header["first_batch_loss"] = format_double(result.first_batch_loss);
    num::save_checkpoint(last_path, store, last_header, &adam);
  }
  return result;
}

}  // namespace drpn::training
