#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "drpn/ingest/profiles.hpp"
#include "drpn/model/config.hpp"
#include "drpn/model/fusion.hpp"
#include "drpn/model/graphnet.hpp"
#include "drpn/model/news_index.hpp"

namespace drpn::model {

using NewsRef = NewsIndex::Ref;

/// One feedback sequence as model input. An empty mask means every entry is real.
struct History {
  std::vector<std::string> news_ids;
  std::vector<NewsRef> refs;
  Mask mask;

  std::size_t real_count() const;
};

struct UserHistory {
  History pos, neg;
};

/// The profile's real entries only (padding trimmed).
UserHistory make_history(const NewsIndex& index, const ingest::UserProfile& profile);

struct UserEncoding {
  Sequence pos_t, neg_t;  // title vectors
  Sequence pos_o, neg_o;  // raw ID embeddings
  Sequence pos_g, neg_g;  // graph-encoded ID embeddings
  InterestBundle sem, col;
  Var sem_pair, col_pair;  // Aggregate([P | N]) of each view
};

/// The full forward pass. Stateless apart from the optional title cache,
/// which must match the parameter values on the tape.
class Drpn {
 public:
  Drpn(const ModelConfig& config, const num::ParamStore& store, const NewsIndex& index);

  const ModelConfig& config() const noexcept { return config_; }
  const ModelIds& ids() const noexcept { return ids_; }
  const NewsIndex& index() const noexcept { return *index_; }

  /// One title vector per ref.
  Var titles(Tape& tape, std::span<const NewsRef> refs) const;
  UserEncoding encode_user(Tape& tape, const UserHistory& history) const;
  /// One score per candidate (C×1).
  Var score(Tape& tape, const UserEncoding& user, std::span<const NewsRef> candidates) const;

  /// Encodes every catalog title plus the PAD title (last row) in chunks.
  num::Tensor build_title_cache(const num::ParamStore& store, std::size_t chunk = 256) const;
  /// Serves titles() from cache on non-recording tapes; nullptr disables.
  void set_title_cache(const num::Tensor* cache) noexcept { cache_ = cache; }

 private:
  Sequence sequence_of(Tape& tape, const History& h, bool titles) const;
  Sequence graph_sequence(Tape& tape, const History& h) const;

  ModelConfig config_;
  ModelIds ids_;
  const NewsIndex* index_;
  const num::Tensor* cache_ = nullptr;
};

/// Parameter layout for a model over this index.
num::ParamStore init_model(const ModelConfig& config, const NewsIndex& index, std::uint64_t seed);

}  // namespace drpn::model
