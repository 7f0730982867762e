#include "drpn/model/drpn.hpp"

#include <algorithm>

#include "drpn/errors.hpp"

namespace drpn::model {

std::size_t History::real_count() const {
  if (mask.empty()) return refs.size();
  return std::size_t(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
}

UserHistory make_history(const NewsIndex& index, const ingest::UserProfile& profile) {
  UserHistory h;
  auto fill = [&](History& out, const std::vector<std::string>& ids, const std::vector<std::uint8_t>& mask) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (!mask[i]) continue;
      out.news_ids.push_back(ids[i]);
      out.refs.push_back(index.lookup(ids[i]));
    }
  };
  fill(h.pos, profile.positive, profile.pos_mask);
  fill(h.neg, profile.negative, profile.neg_mask);
  return h;
}

Drpn::Drpn(const ModelConfig& config, const num::ParamStore& store, const NewsIndex& index)
    : config_(config), ids_(bind_model(store, config)), index_(&index) {
  config_.validate();
  const auto& words = store.slot(ids_.title.word_table).value;
  const auto& news = store.slot(ids_.graph.news_table).value;
  if (words.rows() != index.word_rows() || news.rows() != index.id_rows()) {
    throw ConfigError("parameter tables (" + std::to_string(words.rows()) + " words, " +
                      std::to_string(news.rows()) + " news) do not match the dataset (" +
                      std::to_string(index.word_rows()) + " words, " + std::to_string(index.id_rows()) + " news)");
  }
  if (words.cols() != config.d) throw ConfigError("parameter width does not match d = " + std::to_string(config.d));
}

Var Drpn::titles(Tape& tape, std::span<const NewsRef> refs) const {
  if (cache_ != nullptr && !tape.recording()) {
    num::Tensor out(refs.size(), cache_->cols());
    const std::size_t pad = cache_->rows() - 1;
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const auto src = cache_->row(refs[i].title < 0 ? pad : std::size_t(refs[i].title));
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return tape.constant(std::move(out));
  }
  TitleBatch batch;
  for (const auto& r : refs) batch.add(index_->title_tokens(r.title));
  return encode_titles(tape, ids_.title, batch);
}

Sequence Drpn::sequence_of(Tape& tape, const History& h, bool titles) const {
  if (h.real_count() == 0) return Sequence::placeholder(tape, config_.d);
  Mask mask = h.mask.empty() ? Mask(h.refs.size(), 1) : h.mask;
  if (titles) return {this->titles(tape, h.refs), std::move(mask), false};
  std::vector<std::size_t> rows;
  for (const auto& r : h.refs) rows.push_back(r.id_row);
  return {tape.table_rows(ids_.graph.news_table, rows), std::move(mask), false};
}

Sequence Drpn::graph_sequence(Tape& tape, const History& h) const {
  if (h.real_count() == 0) return Sequence::placeholder(tape, config_.d);
  NodeBatch batch;
  for (std::size_t i = 0; i < h.refs.size(); ++i) {
    batch.centers.push_back(h.refs[i].id_row);
    const bool real = h.mask.empty() || h.mask[i];
    batch.neighbors.push_back(real ? index_->neighbors(h.refs[i].id_row) : std::vector<std::size_t>{});
  }
  Mask mask = h.mask.empty() ? Mask(h.refs.size(), 1) : h.mask;
  return {encode_graph_nodes(tape, ids_.graph, batch), std::move(mask), false};
}

UserEncoding Drpn::encode_user(Tape& tape, const UserHistory& history) const {
  const bool use_pos = config_.uses_positive();
  const bool use_neg = config_.uses_negative();
  const BundleOptions options{use_pos, use_neg, config_.uses_denoise()};
  UserEncoding u;
  if (use_pos) u.pos_t = sequence_of(tape, history.pos, true);
  if (use_neg) u.neg_t = sequence_of(tape, history.neg, true);
  u.sem = encode_interests(tape, {ids_.sem_ca_pos, ids_.sem_ca_neg, ids_.sem_da_pos, ids_.sem_da_neg}, u.pos_t,
                           u.neg_t, options);
  u.sem_pair = pair_aggregate(tape, ids_.fuse_sem.pair_agg, use_pos ? &u.pos_t : nullptr,
                              use_neg ? &u.neg_t : nullptr);
  if (!config_.uses_graph()) return u;

  if (use_pos) {
    u.pos_o = sequence_of(tape, history.pos, false);
    u.pos_g = graph_sequence(tape, history.pos);
  }
  if (use_neg) {
    u.neg_o = sequence_of(tape, history.neg, false);
    u.neg_g = graph_sequence(tape, history.neg);
  }
  u.col = encode_interests(tape, {ids_.col_ca_pos, ids_.col_ca_neg, ids_.col_da_pos, ids_.col_da_neg}, u.pos_g,
                           u.neg_g, options);
  u.col_pair = pair_aggregate(tape, ids_.fuse_col.pair_agg, use_pos ? &u.pos_o : nullptr,
                              use_neg ? &u.neg_o : nullptr);
  return u;
}

Var Drpn::score(Tape& tape, const UserEncoding& user, std::span<const NewsRef> candidates) const {
  if (candidates.empty()) throw DataError("no candidates to score");
  Var r_t = titles(tape, candidates);
  Var u_t = fuse_user(tape, ids_.fuse_sem, user.sem, pair_context(user.sem_pair, r_t));
  Var s = dot_rows(u_t, r_t);
  if (!config_.uses_graph()) return s;
  std::vector<std::size_t> rows;
  for (const auto& c : candidates) rows.push_back(c.id_row);
  Var r_o = tape.table_rows(ids_.graph.news_table, rows);
  Var u_o = fuse_user(tape, ids_.fuse_col, user.col, pair_context(user.col_pair, r_o));
  return num::add(s, dot_rows(u_o, r_o));
}

num::Tensor Drpn::build_title_cache(const num::ParamStore& store, std::size_t chunk) const {
  const std::size_t n = index_->title_count();
  num::Tensor cache(n + 1, config_.d);
  for (std::size_t begin = 0; begin <= n; begin += chunk) {
    const std::size_t end = std::min(n + 1, begin + chunk);
    std::vector<NewsRef> refs;
    for (std::size_t i = begin; i < end; ++i) refs.push_back({i == n ? -1 : std::ptrdiff_t(i), NewsIndex::kUnkRow});
    Tape tape(store);
    TitleBatch batch;
    for (const auto& r : refs) batch.add(index_->title_tokens(r.title));
    const auto& v = encode_titles(tape, ids_.title, batch).value();
    for (std::size_t i = begin; i < end; ++i) {
      std::copy(v.row(i - begin).begin(), v.row(i - begin).end(), cache.row(i).begin());
    }
  }
  return cache;
}

num::ParamStore init_model(const ModelConfig& config, const NewsIndex& index, std::uint64_t seed) {
  const auto specs = model_param_specs(config, index.word_rows(), index.id_rows());
  return num::init_params(specs, seed);
}

}  // namespace drpn::model
