#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

// Brute-force references straight from the definitions.
namespace brute {

inline double auc(const std::vector<double>& s, const std::vector<int>& l) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] > 0 && l[j] <= 0) {
        ++pairs;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / double(pairs);
}

// 1-based rank: items scoring higher, plus equal-scored items listed earlier.
inline std::size_t rank_of(const std::vector<double>& s, std::size_t i) {
  std::size_t r = 1;
  for (std::size_t j = 0; j < s.size(); ++j)
    if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++r;
  return r;
}

inline std::vector<std::size_t> positive_ranks(const std::vector<double>& s, const std::vector<int>& l) {
  std::vector<std::size_t> r;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (l[i] > 0) r.push_back(rank_of(s, i));
  std::sort(r.begin(), r.end());
  return r;
}

inline double mrr(const std::vector<double>& s, const std::vector<int>& l) {
  double sum = 0.0;
  const auto ranks = positive_ranks(s, l);
  for (auto r : ranks) sum += 1.0 / double(r);
  return sum / double(ranks.size());
}

inline double ndcg(const std::vector<double>& s, const std::vector<int>& l, std::size_t k) {
  double dcg = 0.0, ideal = 0.0;
  const auto ranks = positive_ranks(s, l);
  for (auto r : ranks)
    if (r <= k) dcg += 1.0 / std::log2(double(r) + 1.0);
  for (std::size_t i = 1; i <= std::min(k, ranks.size()); ++i) ideal += 1.0 / std::log2(double(i) + 1.0);
  return dcg / ideal;
}

}  // namespace brute
