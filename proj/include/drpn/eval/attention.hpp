#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "drpn/ingest/catalog.hpp"
#include "drpn/ingest/profiles.hpp"
#include "drpn/ingest/synthetic.hpp"
#include "drpn/model/drpn.hpp"

namespace drpn::eval {

struct AttentionEntry {
  std::string user_id;
  std::string sequence;   // sem_pos, sem_neg, col_pos or col_neg
  std::size_t position = 0;  // index in the user's (unpadded) sequence, oldest first
  std::string news_id;
  double alpha = 0.0;
  std::string category;
};

/// Denoising weights of one user's feedback sequences, each sequence sorted by
/// descending α (ties by position). Throws DataError for a user without a
/// profile and ConfigError for variants without a denoiser.
std::vector<AttentionEntry> attention_weights(const model::Drpn& model, const num::ParamStore& store,
                                              const ingest::ProfileSet& profiles, const std::string& user_id,
                                              const ingest::NewsCatalog* catalog = nullptr);

/// user_id, sequence, position, news_id, alpha, category.
void write_attention_tsv(std::ostream& out, const std::vector<AttentionEntry>& entries);
/// One heatmap row per sequence, cells in the listed (ranked) order.
std::string attention_svg(const std::vector<AttentionEntry>& entries);

struct NoiseAttention {
  double noise_mean = 0.0;  // mean α over noise-flagged entries
  double clean_mean = 0.0;
  std::size_t noise_count = 0;
  std::size_t clean_count = 0;
  /// Share of noise entries ranked in the lower half of their sequence.
  double noise_lower_half = 0.0;
  double ratio() const { return clean_mean == 0.0 ? 0.0 : noise_mean / clean_mean; }
};

/// Compares semantic-view denoising weights of known-noise and clean history
/// entries over every profiled user. Entries without a truth record are ignored.
NoiseAttention noise_attention(const model::Drpn& model, const num::ParamStore& store,
                               const ingest::ProfileSet& profiles, const std::vector<ingest::TruthEntry>& truth,
                               std::size_t threads = 1);

}  // namespace drpn::eval
