#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace drpn::eval {

struct ScoredItem {
  std::string news_id;
  int label = 0;  // 1 clicked, 0 skipped
  double score = 0.0;
};

struct ImpressionScores {
  std::string impression_id;
  std::vector<ScoredItem> items;
};

/// Probability that a positive outscores a negative; a tie counts 0.5.
/// nullopt unless there is at least one positive and one negative.
std::optional<double> auc(std::span<const double> scores, std::span<const int> labels);
/// Mean over positives of 1 / rank. Ranks follow descending score with ties
/// kept in input order.
std::optional<double> mrr(std::span<const double> scores, std::span<const int> labels);
/// DCG@k with gain 2^label - 1 and log2(rank + 1) discount over the ideal DCG@k.
std::optional<double> ndcg(std::span<const double> scores, std::span<const int> labels, std::size_t k);

struct MetricReport {
  double auc = 0.0;
  double mrr = 0.0;
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // impressions without both a positive and a negative

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Impression-level means. Impressions are reduced in impression-id order, so
/// the result does not depend on the order of the input.
MetricReport summarize(const std::vector<ImpressionScores>& impressions);

/// Header plus one row per named report: name, auc, mrr, ndcg5, ndcg10, evaluated, skipped.
void write_report_tsv(std::ostream& out, const std::vector<std::pair<std::string, MetricReport>>& rows);
std::vector<std::pair<std::string, MetricReport>> read_report_tsv(std::istream& in, const std::string& source);
/// Fixed-width table with metrics in percent.
std::string format_report_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

}  // namespace drpn::eval
