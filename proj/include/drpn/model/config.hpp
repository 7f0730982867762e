#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>

namespace drpn::model {

enum class Variant {
  kFull,
  kNoDenoise,         // drops p_h and n_h from both fusion nets
  kNoGraph,           // drops the collaborative view: score = u^t · r_c^t
  kNoDenoiseNoGraph,
  kPositiveOnly,      // negative sequence masked everywhere
  kNegativeOnly,      // positive sequence masked everywhere
};

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  std::size_t d = 300;           // embedding and hidden width
  std::size_t agg_dim = 200;     // gated aggregation hidden width d'
  std::size_t heads = 6;         // title and content aggregator heads
  std::size_t graph_heads = 2;
  std::size_t l_p = 30;
  std::size_t l_n = 60;
  std::size_t title_len = 15;
  std::size_t l_k = 4;
  std::size_t k_nbr = 5;
  double ln_eps = 1e-5;
  Variant variant = Variant::kFull;

  bool uses_graph() const { return variant != Variant::kNoGraph && variant != Variant::kNoDenoiseNoGraph; }
  bool uses_denoise() const { return variant != Variant::kNoDenoise && variant != Variant::kNoDenoiseNoGraph; }
  bool uses_positive() const { return variant != Variant::kNegativeOnly; }
  bool uses_negative() const { return variant != Variant::kPositiveOnly; }

  /// Throws ConfigError for inconsistent sizes.
  void validate() const;

  /// Flat string form stored in checkpoint headers.
  std::map<std::string, std::string> to_header() const;
  static ModelConfig from_header(const std::map<std::string, std::string>& header);
};

}  // namespace drpn::model
