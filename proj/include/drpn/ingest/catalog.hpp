#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace drpn::ingest {

inline constexpr std::size_t kDefaultTitleLength = 15;

/// Word ids are dense and 0-based in first-seen order.
class Vocabulary {
 public:
  std::size_t size() const noexcept { return words_.size(); }
  const std::string& word(std::uint32_t id) const { return words_.at(id); }
  std::optional<std::uint32_t> find(std::string_view word) const;
  /// Returns the id of word, adding it when there is room under cap (0 = no cap).
  std::optional<std::uint32_t> intern(std::string_view word, std::size_t cap);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct NewsEntry {
  std::string id;
  std::string category;
  std::string subcategory;
  std::string raw_title;
  std::vector<std::uint32_t> title_tokens;
};

class NewsCatalog {
 public:
  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<NewsEntry>& entries() const noexcept { return entries_; }
  const NewsEntry& at(std::size_t i) const { return entries_.at(i); }
  /// Position of a news id in file order.
  std::optional<std::size_t> find(std::string_view id) const;
  const Vocabulary& vocab() const noexcept { return vocab_; }
  double mean_title_length() const;

  /// Adds an entry, tokenising its title. Throws DataError on a duplicate id.
  void add(std::string id, std::string category, std::string subcategory, std::string title,
           std::size_t vocab_cap = 0, std::size_t max_title = kDefaultTitleLength);

 private:
  std::vector<NewsEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  Vocabulary vocab_;
};

/// Lowercases and splits on whitespace.
std::vector<std::string> tokenize_title(std::string_view title);

/// Columns: id, category, subcategory, title, then any MIND extras (ignored).
NewsCatalog parse_news_catalog(std::istream& in, const std::string& source, std::size_t vocab_cap = 0,
                               std::size_t max_title = kDefaultTitleLength);
NewsCatalog parse_news_catalog(const std::filesystem::path& path, std::size_t vocab_cap = 0,
                               std::size_t max_title = kDefaultTitleLength);

/// Writes the four leading MIND columns plus empty abstract/url/entity columns.
void write_news_catalog(std::ostream& out, const NewsCatalog& catalog);

}  // namespace drpn::ingest
