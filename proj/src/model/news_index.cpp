#include "drpn/model/news_index.hpp"

#include <algorithm>

#include "drpn/ingest/profiles.hpp"

namespace drpn::model {

NewsIndex NewsIndex::build(const ingest::NewsCatalog& catalog,
                           const std::vector<ingest::ImpressionLog>& profile_logs, const ingest::CollabGraph& graph,
                           std::size_t k_nbr) {
  NewsIndex idx;
  idx.word_rows_ = catalog.vocab().size() + 1;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    idx.titles_.push_back(catalog.at(i).title_tokens);
    idx.title_of_.emplace(catalog.at(i).id, std::ptrdiff_t(i));
  }
  idx.row_ids_ = {ingest::kPadNewsId, "<unk>"};

  std::vector<const ingest::ImpressionLog*> logs;
  for (const auto& l : profile_logs) logs.push_back(&l);
  std::stable_sort(logs.begin(), logs.end(), [](auto* a, auto* b) { return a->timestamp < b->timestamp; });
  for (const auto* l : logs) {
    for (const auto& item : l->displayed) {
      if (idx.row_of_.emplace(item.news_id, idx.row_ids_.size()).second) idx.row_ids_.push_back(item.news_id);
    }
  }

  idx.neighbors_.resize(idx.row_ids_.size());
  for (std::size_t row = 2; row < idx.row_ids_.size(); ++row) {
    for (const auto& nb : graph.neighbors(idx.row_ids_[row])) {
      if (idx.neighbors_[row].size() >= k_nbr) break;
      auto it = idx.row_of_.find(nb.news_id);
      if (it != idx.row_of_.end()) idx.neighbors_[row].push_back(it->second);
    }
  }
  return idx;
}

NewsIndex::Ref NewsIndex::lookup(std::string_view news_id) const {
  const std::string id(news_id);
  if (id == ingest::kPadNewsId) return {-1, kPadRow};
  Ref ref;
  if (auto t = title_of_.find(id); t != title_of_.end()) ref.title = t->second;
  if (auto r = row_of_.find(id); r != row_of_.end()) ref.id_row = r->second;
  return ref;
}

std::span<const std::uint32_t> NewsIndex::title_tokens(std::ptrdiff_t title) const {
  if (title < 0) return {};
  return titles_.at(std::size_t(title));
}

}  // namespace drpn::model
