#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "drpn/ingest/profiles.hpp"

namespace drpn::ingest {

inline constexpr std::size_t kDefaultNeighbors = 5;

struct Neighbor {
  std::string news_id;
  std::uint32_t count = 0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Co-click graph with each node's neighbor list pruned to the top k by
/// co-click count (ties by ascending news id).
class CollabGraph {
 public:
  const std::map<std::string, std::vector<Neighbor>>& adjacency() const noexcept { return adj_; }
  /// Empty for isolated or unknown nodes.
  const std::vector<Neighbor>& neighbors(const std::string& news) const;
  std::size_t node_count() const noexcept { return adj_.size(); }
  std::size_t edge_count() const;
  void set_neighbors(const std::string& news, std::vector<Neighbor> list);

  friend bool operator==(const CollabGraph& a, const CollabGraph& b) { return a.adj_ == b.adj_; }

 private:
  std::map<std::string, std::vector<Neighbor>> adj_;
};

/// Symmetric raw counts: for every unordered pair of news both clicked by
/// some user, the number of such users. Keys are ordered (a < b).
std::map<std::pair<std::string, std::string>, std::uint32_t> co_click_counts(const FeedbackMatrix& matrix);

CollabGraph build_collab_graph(const FeedbackMatrix& matrix, std::size_t k_nbr = kDefaultNeighbors);

/// src, dst, count; one line per kept neighbor in list order.
void write_edge_list(std::ostream& out, const CollabGraph& graph);
CollabGraph read_edge_list(std::istream& in, const std::string& source);
CollabGraph read_edge_list(const std::filesystem::path& path);

/// degree, node count.
void write_degree_histogram(std::ostream& out, const CollabGraph& graph);

}  // namespace drpn::ingest
