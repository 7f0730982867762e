#include "drpn/ingest/collab_graph.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_map>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"

namespace drpn::ingest {

const std::vector<Neighbor>& CollabGraph::neighbors(const std::string& news) const {
  static const std::vector<Neighbor> kNone;
  auto it = adj_.find(news);
  return it == adj_.end() ? kNone : it->second;
}

std::size_t CollabGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& [k, v] : adj_) n += v.size();
  return n;
}

void CollabGraph::set_neighbors(const std::string& news, std::vector<Neighbor> list) {
  for (const auto& nb : list)
    if (nb.news_id == news) throw DataError("self-loop on news '" + news + "'");
  adj_[news] = std::move(list);
}

std::map<std::pair<std::string, std::string>, std::uint32_t> co_click_counts(const FeedbackMatrix& matrix) {
  // Intern ids so the pair table is keyed by integers.
  std::map<std::string, std::uint32_t> ids;
  for (const auto& [user, row] : matrix.rows())
    for (const auto& [news, v] : row)
      if (v == 1) ids.emplace(news, 0);
  std::vector<std::string> names;
  for (auto& [name, id] : ids) {
    id = static_cast<std::uint32_t>(names.size());
    names.push_back(name);
  }
  std::unordered_map<std::uint64_t, std::uint32_t> counts;
  std::vector<std::uint32_t> clicked;
  for (const auto& [user, row] : matrix.rows()) {
    clicked.clear();
    for (const auto& [news, v] : row)
      if (v == 1) clicked.push_back(ids.at(news));
    for (std::size_t i = 0; i < clicked.size(); ++i)
      for (std::size_t j = i + 1; j < clicked.size(); ++j) {
        const auto a = std::min(clicked[i], clicked[j]), b = std::max(clicked[i], clicked[j]);
        ++counts[(static_cast<std::uint64_t>(a) << 32) | b];
      }
  }
  std::map<std::pair<std::string, std::string>, std::uint32_t> out;
  for (const auto& [key, c] : counts) out.emplace(std::make_pair(names[key >> 32], names[key & 0xFFFFFFFFu]), c);
  return out;
}

CollabGraph build_collab_graph(const FeedbackMatrix& matrix, std::size_t k_nbr) {
  std::map<std::string, std::vector<Neighbor>> lists;
  for (const auto& [pair, c] : co_click_counts(matrix)) {
    lists[pair.first].push_back({pair.second, c});
    lists[pair.second].push_back({pair.first, c});
  }
  CollabGraph g;
  for (auto& [news, list] : lists) {
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) {
      if (a.count != b.count) return a.count > b.count;
      return a.news_id < b.news_id;
    });
    if (list.size() > k_nbr) list.resize(k_nbr);
    g.set_neighbors(news, std::move(list));
  }
  return g;
}

void write_edge_list(std::ostream& out, const CollabGraph& graph) {
  for (const auto& [src, list] : graph.adjacency())
    for (const auto& nb : list) out << src << '\t' << nb.news_id << '\t' << nb.count << '\n';
}

CollabGraph read_edge_list(std::istream& in, const std::string& source) {
  std::map<std::string, std::vector<Neighbor>> lists;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    std::uint32_t count = 0;
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty() ||
        std::from_chars(cols[2].data(), cols[2].data() + cols[2].size(), count).ptr !=
            cols[2].data() + cols[2].size()) {
      throw DataError(where(source, lineno) + "expected src, dst, count");
    }
    if (cols[0] == cols[1]) throw DataError(where(source, lineno) + "self-loop");
    lists[std::string(cols[0])].push_back({std::string(cols[1]), count});
  }
  CollabGraph g;
  for (auto& [news, list] : lists) g.set_neighbors(news, std::move(list));
  return g;
}

CollabGraph read_edge_list(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_edge_list(in, path.string());
}

void write_degree_histogram(std::ostream& out, const CollabGraph& graph) {
  std::map<std::size_t, std::size_t> hist;
  for (const auto& [news, list] : graph.adjacency()) ++hist[list.size()];
  out << "degree\tnodes\n";
  for (const auto& [deg, n] : hist) out << deg << '\t' << n << '\n';
}

}  // namespace drpn::ingest
