#include "drpn/model/config.hpp"

#include <charconv>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"

namespace drpn::model {

namespace {

constexpr std::pair<Variant, const char*> kNames[] = {
    {Variant::kFull, "full"},
    {Variant::kNoDenoise, "no-denoise"},
    {Variant::kNoGraph, "no-graph"},
    {Variant::kNoDenoiseNoGraph, "no-denoise-no-graph"},
    {Variant::kPositiveOnly, "positive-only"},
    {Variant::kNegativeOnly, "negative-only"},
};

std::size_t header_size(const std::map<std::string, std::string>& h, const std::string& key) {
  auto it = h.find(key);
  if (it == h.end()) throw ConfigError("checkpoint header lacks '" + key + "'");
  std::size_t v = 0;
  const auto& s = it->second;
  if (std::from_chars(s.data(), s.data() + s.size(), v).ptr != s.data() + s.size()) {
    throw ConfigError("checkpoint header '" + key + "' is not a count: " + s);
  }
  return v;
}

}  // namespace

std::string to_string(Variant v) {
  for (const auto& [var, name] : kNames)
    if (var == v) return name;
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  for (const auto& [var, n] : kNames)
    if (name == n) return var;
  // Short forms D, G, DG, N, P.
  if (name == "D") return Variant::kNoDenoise;
  if (name == "G") return Variant::kNoGraph;
  if (name == "DG") return Variant::kNoDenoiseNoGraph;
  if (name == "N") return Variant::kPositiveOnly;
  if (name == "P") return Variant::kNegativeOnly;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected full, no-denoise, no-graph, no-denoise-no-graph, positive-only, negative-only)");
}

void ModelConfig::validate() const {
  if (d == 0 || agg_dim == 0 || heads == 0 || graph_heads == 0) throw ConfigError("model sizes must be positive");
  if (d % heads != 0) {
    throw ConfigError("d (" + std::to_string(d) + ") is not divisible by heads (" + std::to_string(heads) + ")");
  }
  if (d % graph_heads != 0) {
    throw ConfigError("d (" + std::to_string(d) + ") is not divisible by graph_heads (" +
                      std::to_string(graph_heads) + ")");
  }
  if (l_p == 0 || l_n == 0 || title_len == 0) throw ConfigError("sequence lengths must be positive");
  if (l_k == 0) throw ConfigError("l_k must be positive");
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be positive");
}

std::map<std::string, std::string> ModelConfig::to_header() const {
  return {
      {"d", std::to_string(d)},
      {"agg_dim", std::to_string(agg_dim)},
      {"heads", std::to_string(heads)},
      {"graph_heads", std::to_string(graph_heads)},
      {"l_p", std::to_string(l_p)},
      {"l_n", std::to_string(l_n)},
      {"title_len", std::to_string(title_len)},
      {"l_k", std::to_string(l_k)},
      {"k_nbr", std::to_string(k_nbr)},
      {"ln_eps", ingest::format_double(ln_eps)},
      {"variant", to_string(variant)},
  };
}

ModelConfig ModelConfig::from_header(const std::map<std::string, std::string>& h) {
  ModelConfig c;
  c.d = header_size(h, "d");
  c.agg_dim = header_size(h, "agg_dim");
  c.heads = header_size(h, "heads");
  c.graph_heads = header_size(h, "graph_heads");
  c.l_p = header_size(h, "l_p");
  c.l_n = header_size(h, "l_n");
  c.title_len = header_size(h, "title_len");
  c.l_k = header_size(h, "l_k");
  c.k_nbr = header_size(h, "k_nbr");
  auto eps = h.find("ln_eps");
  if (eps == h.end()) throw ConfigError("checkpoint header lacks 'ln_eps'");
  c.ln_eps = std::stod(eps->second);
  auto var = h.find("variant");
  if (var == h.end()) throw ConfigError("checkpoint header lacks 'variant'");
  c.variant = parse_variant(var->second);
  c.validate();
  return c;
}

}  // namespace drpn::model
