#include "drpn/ingest/catalog.hpp"

#include <cctype>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"

namespace drpn::ingest {

std::optional<std::uint32_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::intern(std::string_view word, std::size_t cap) {
  std::string key(word);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  if (cap != 0 && words_.size() >= cap) return std::nullopt;
  const auto id = static_cast<std::uint32_t>(words_.size());
  words_.push_back(key);
  index_.emplace(std::move(key), id);
  return id;
}

std::optional<std::size_t> NewsCatalog::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

double NewsCatalog::mean_title_length() const {
  if (entries_.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.title_tokens.size();
  return static_cast<double>(total) / static_cast<double>(entries_.size());
}

void NewsCatalog::add(std::string id, std::string category, std::string subcategory, std::string title,
                      std::size_t vocab_cap, std::size_t max_title) {
  if (id.empty()) throw DataError("news entry with an empty id");
  if (index_.contains(id)) throw DataError("duplicate news id '" + id + "'");
  NewsEntry e;
  e.id = std::move(id);
  e.category = std::move(category);
  e.subcategory = std::move(subcategory);
  auto words = tokenize_title(title);
  if (words.size() > max_title) words.resize(max_title);
  for (const auto& w : words) {
    if (auto wid = vocab_.intern(w, vocab_cap)) e.title_tokens.push_back(*wid);
  }
  e.raw_title = std::move(title);
  index_.emplace(e.id, entries_.size());
  entries_.push_back(std::move(e));
}

std::vector<std::string> tokenize_title(std::string_view title) {
  std::vector<std::string> out;
  for (auto tok : split_ws(title)) {
    std::string w(tok);
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(std::move(w));
  }
  return out;
}

NewsCatalog parse_news_catalog(std::istream& in, const std::string& source, std::size_t vocab_cap,
                               std::size_t max_title) {
  NewsCatalog catalog;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() < 4) {
      throw DataError(where(source, lineno) + "expected at least 4 tab-separated columns, found " +
                      std::to_string(cols.size()));
    }
    try {
      catalog.add(std::string(cols[0]), std::string(cols[1]), std::string(cols[2]), std::string(cols[3]),
                  vocab_cap, max_title);
    } catch (const DataError& e) {
      throw DataError(where(source, lineno) + e.what());
    }
  }
  return catalog;
}

NewsCatalog parse_news_catalog(const std::filesystem::path& path, std::size_t vocab_cap,
                               std::size_t max_title) {
  auto in = open_input(path);
  return parse_news_catalog(in, path.string(), vocab_cap, max_title);
}

void write_news_catalog(std::ostream& out, const NewsCatalog& catalog) {
  for (const auto& e : catalog.entries()) {
    out << e.id << '\t' << e.category << '\t' << e.subcategory << '\t' << e.raw_title << "\t\t\t\t\n";
  }
}

}  // namespace drpn::ingest
