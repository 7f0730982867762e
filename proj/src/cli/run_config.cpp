#include "drpn/cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"

namespace drpn::cli {

namespace fs = std::filesystem;

namespace {

constexpr KeySpec kKeys[] = {
    {"data", "", KeyKind::kText, "dataset directory written by rebuild-dataset or synth"},
    {"embeddings", "", KeyKind::kText, "pretrained word vectors ('word v1 ... vd' per line); empty = random init"},
    {"profile_days", "5", KeyKind::kCount, "days of logs that form user profiles (raw behaviors only)"},
    {"train_days", "1", KeyKind::kCount, "days after the profile window used for training (raw behaviors only)"},
    {"val_frac", "0.1", KeyKind::kReal, "chronological share of later logs used for validation (raw behaviors only)"},
    {"vocab_cap", "0", KeyKind::kCount, "maximum vocabulary size, 0 = unlimited"},
    {"title_len", "15", KeyKind::kCount, "title tokens kept"},
    {"d", "300", KeyKind::kCount, "embedding and hidden width"},
    {"agg_dim", "200", KeyKind::kCount, "hidden width of gated aggregation"},
    {"heads", "6", KeyKind::kCount, "attention heads in title and content aggregators"},
    {"graph_heads", "2", KeyKind::kCount, "attention heads in the graph network"},
    {"l_p", "30", KeyKind::kCount, "positive sequence length"},
    {"l_n", "60", KeyKind::kCount, "negative sequence length"},
    {"l_k", "4", KeyKind::kCount, "negatives per positive"},
    {"k_nbr", "5", KeyKind::kCount, "neighbors kept per graph node"},
    {"ln_eps", "1e-05", KeyKind::kReal, "layer-norm epsilon"},
    {"variant", "full", KeyKind::kVariant,
     "full, no-denoise, no-graph, no-denoise-no-graph, positive-only or negative-only"},
    {"lr", "0.0001", KeyKind::kReal, "Adam learning rate"},
    {"epochs", "10", KeyKind::kCount, "maximum epochs"},
    {"batch_size", "32", KeyKind::kCount, "samples per optimizer step"},
    {"patience", "2", KeyKind::kCount, "epochs without validation AUC gain before stopping"},
    {"seed", "42", KeyKind::kCount, "seed for initialization, sampling and shuffling"},
    {"threads", "1", KeyKind::kCount, "worker threads; results do not depend on it"},
    {"max_steps", "0", KeyKind::kCount, "optimizer steps per epoch, 0 = whole epoch"},
    {"max_val_impressions", "0", KeyKind::kCount, "validation impressions used for model selection, 0 = all"},
    {"resume", "false", KeyKind::kBool, "continue from last.ckpt in the output directory"},
};

const KeySpec* find_key(const std::string& name) {
  for (const auto& k : kKeys)
    if (name == k.name) return &k;
  return nullptr;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_count(const std::string& s, std::uint64_t& v) {
  return !s.empty() && std::from_chars(s.data(), s.data() + s.size(), v).ptr == s.data() + s.size();
}

bool parse_real(const std::string& s, double& v) {
  if (s.empty()) return false;
  try {
    std::size_t used = 0;
    v = std::stod(s, &used);
    return used == s.size() && std::isfinite(v);
  } catch (const std::logic_error&) {
    return false;
  }
}

bool parse_bool(const std::string& s, bool& v) {
  if (s == "true" || s == "1" || s == "yes") return v = true, true;
  if (s == "false" || s == "0" || s == "no") return v = false, true;
  return false;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& i : items) out += "\n  " + i;
  return out;
}

}  // namespace

std::span<const KeySpec> RunConfig::keys() { return kKeys; }

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_[k.name] = k.fallback;
}

void RunConfig::merge_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::map<std::string, std::string> values;
  std::vector<std::string> errors;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(ingest::where(path.string(), n) + "expected key = value");
      continue;
    }
    values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  for (const auto& [k, v] : values)
    if (!find_key(k)) errors.push_back(path.string() + ": unknown key '" + k + "'");
  if (!errors.empty()) throw ConfigError("invalid configuration:" + join(errors));
  merge(values, path.string());
}

void RunConfig::merge(const std::map<std::string, std::string>& values, const std::string& source) {
  std::vector<std::string> errors;
  for (const auto& [k, v] : values)
    if (!find_key(k)) errors.push_back(source + ": unknown key '" + k + "'");
  if (!errors.empty()) throw ConfigError("invalid configuration:" + join(errors));
  for (const auto& [k, v] : values) values_[k] = v;
}

const std::string& RunConfig::text(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

std::size_t RunConfig::count(const std::string& key) const {
  std::uint64_t v = 0;
  if (!parse_count(text(key), v)) throw ConfigError(key + " must be a non-negative integer, got '" + text(key) + "'");
  return std::size_t(v);
}

double RunConfig::real(const std::string& key) const {
  double v = 0.0;
  if (!parse_real(text(key), v)) throw ConfigError(key + " must be a finite number, got '" + text(key) + "'");
  return v;
}

bool RunConfig::flag(const std::string& key) const {
  bool v = false;
  if (!parse_bool(text(key), v)) throw ConfigError(key + " must be true or false, got '" + text(key) + "'");
  return v;
}

void RunConfig::set(const std::string& key, const std::string& value) { merge({{key, value}}, "flag"); }

void RunConfig::validate() const {
  std::vector<std::string> errors;
  for (const auto& k : kKeys) {
    const auto& v = text(k.name);
    std::uint64_t c = 0;
    double r = 0.0;
    bool b = false;
    switch (k.kind) {
      case KeyKind::kText: break;
      case KeyKind::kCount:
        if (!parse_count(v, c)) errors.push_back(std::string(k.name) + " = '" + v + "' is not a non-negative integer");
        break;
      case KeyKind::kReal:
        if (!parse_real(v, r)) errors.push_back(std::string(k.name) + " = '" + v + "' is not a finite number");
        break;
      case KeyKind::kBool:
        if (!parse_bool(v, b)) errors.push_back(std::string(k.name) + " = '" + v + "' is not true or false");
        break;
      case KeyKind::kVariant:
        try {
          model::parse_variant(v);
        } catch (const ConfigError& e) {
          errors.push_back(std::string(k.name) + ": " + e.what());
        }
        break;
    }
  }
  if (!errors.empty()) throw ConfigError("invalid configuration:" + join(errors));
  std::vector<std::string> range;
  for (const char* k : {"d", "agg_dim", "heads", "graph_heads", "l_p", "l_n", "l_k", "title_len", "batch_size",
                        "threads", "profile_days", "train_days"})
    if (count(k) == 0) range.push_back(std::string(k) + " must be positive");
  if (real("lr") < 0.0) range.push_back("lr must be non-negative");
  if (real("ln_eps") <= 0.0) range.push_back("ln_eps must be positive");
  if (real("val_frac") < 0.0 || real("val_frac") > 1.0) range.push_back("val_frac must lie in [0, 1]");
  if (count("heads") > 0 && count("d") % count("heads") != 0) range.push_back("d must be divisible by heads");
  if (count("graph_heads") > 0 && count("d") % count("graph_heads") != 0) {
    range.push_back("d must be divisible by graph_heads");
  }
  if (!range.empty()) throw ConfigError("invalid configuration:" + join(range));
}

model::ModelConfig RunConfig::model() const {
  validate();
  model::ModelConfig c;
  c.d = count("d");
  c.agg_dim = count("agg_dim");
  c.heads = count("heads");
  c.graph_heads = count("graph_heads");
  c.l_p = count("l_p");
  c.l_n = count("l_n");
  c.title_len = count("title_len");
  c.l_k = count("l_k");
  c.k_nbr = count("k_nbr");
  c.ln_eps = real("ln_eps");
  c.variant = model::parse_variant(text("variant"));
  return c;
}

ingest::RebuildOptions RunConfig::rebuild() const {
  validate();
  ingest::RebuildOptions o;
  o.splits.profile_days = int(count("profile_days"));
  o.splits.train_days = int(count("train_days"));
  o.splits.val_frac = real("val_frac");
  o.l_p = count("l_p");
  o.l_n = count("l_n");
  o.k_nbr = count("k_nbr");
  o.vocab_cap = count("vocab_cap");
  o.max_title = count("title_len");
  return o;
}

training::TrainOptions RunConfig::train() const {
  training::TrainOptions o;
  o.model = model();
  o.lr = real("lr");
  o.epochs = count("epochs");
  o.batch_size = count("batch_size");
  o.patience = count("patience");
  o.seed = count("seed");
  o.threads = count("threads");
  o.max_steps = count("max_steps");
  o.max_val_impressions = count("max_val_impressions");
  o.resume = flag("resume");
  if (!text("embeddings").empty()) o.embeddings = text("embeddings");
  o.header = header();
  return o;
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& k : kKeys) out += std::string(k.name) + " = " + text(k.name) + "\n";
  return out;
}

void RunConfig::write(const fs::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << resolved();
  if (!out) throw DataError("cannot write " + path.string());
}

std::map<std::string, std::string> RunConfig::header() const {
  std::map<std::string, std::string> h;
  for (const auto& k : kKeys) {
    const std::string name = k.name;
    if (name == "threads" || name == "resume") continue;
    h["run." + name] = text(name);
  }
  return h;
}

RunConfig RunConfig::from_header(const std::map<std::string, std::string>& header) {
  RunConfig c;
  for (const auto& [k, v] : header)
    if (k.starts_with("run.") && find_key(k.substr(4))) c.values_[k.substr(4)] = v;
  return c;
}

std::string RunConfig::describe() {
  std::size_t width = 0;
  for (const auto& k : kKeys) width = std::max(width, std::string(k.name).size());
  std::string out = "Configuration keys (key = value in --config files, or --key value on the command line):\n";
  for (const auto& k : kKeys) {
    std::string name = k.name;
    name.resize(width, ' ');
    out += "  " + name + "  " + k.help + " [default: " + (k.fallback[0] ? k.fallback : "\"\"") + "]\n";
  }
  return out;
}

}  // namespace drpn::cli
