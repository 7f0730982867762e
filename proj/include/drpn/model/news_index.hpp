#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "drpn/ingest/catalog.hpp"
#include "drpn/ingest/collab_graph.hpp"

namespace drpn::model {

/// Maps news ids to their title and ID-embedding rows.
///
/// ID rows: 0 is PAD, 1 is UNK, and every news displayed in the profile
/// window gets its own row from 2 on, in order of first exposure. Catalog news
/// never shown in that window share UNK but keep their title.
class NewsIndex {
 public:
  static constexpr std::size_t kPadRow = 0;
  static constexpr std::size_t kUnkRow = 1;

  struct Ref {
    std::ptrdiff_t title = -1;  // catalog position; -1 encodes the PAD title
    std::size_t id_row = kUnkRow;
    friend bool operator==(const Ref&, const Ref&) = default;
  };

  static NewsIndex build(const ingest::NewsCatalog& catalog, const std::vector<ingest::ImpressionLog>& profile_logs,
                         const ingest::CollabGraph& graph, std::size_t k_nbr);

  /// The PAD id maps to {-1, kPadRow}; unknown ids to {-1, kUnkRow}.
  Ref lookup(std::string_view news_id) const;

  std::size_t id_rows() const noexcept { return row_ids_.size(); }
  std::size_t title_count() const noexcept { return titles_.size(); }
  /// Rows of the word table: vocabulary plus PAD.
  std::size_t word_rows() const noexcept { return word_rows_; }

  std::span<const std::uint32_t> title_tokens(std::ptrdiff_t title) const;
  const std::vector<std::size_t>& neighbors(std::size_t id_row) const { return neighbors_.at(id_row); }
  const std::string& news_id(std::size_t id_row) const { return row_ids_.at(id_row); }

 private:
  std::vector<std::vector<std::uint32_t>> titles_;
  std::unordered_map<std::string, std::ptrdiff_t> title_of_;
  std::unordered_map<std::string, std::size_t> row_of_;
  std::vector<std::string> row_ids_;
  std::vector<std::vector<std::size_t>> neighbors_;
  std::size_t word_rows_ = 1;
};

}  // namespace drpn::model
