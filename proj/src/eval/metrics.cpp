#include "drpn/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"

namespace drpn::eval {

namespace {

void check_sizes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
}

bool has_both(std::span<const int> labels) {
  const bool pos = std::any_of(labels.begin(), labels.end(), [](int l) { return l > 0; });
  const bool neg = std::any_of(labels.begin(), labels.end(), [](int l) { return l <= 0; });
  return pos && neg;
}

std::vector<std::size_t> ranking(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

std::optional<double> auc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  if (!has_both(labels)) return std::nullopt;
  // Mid-ranks over ascending scores; the positive rank sum minus its minimum
  // counts wins plus half the ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = 0.5 * double(i + 1 + j);  // mean of ranks i+1 .. j
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] > 0) {
        rank_sum += mid;
        ++n_pos;
      }
    i = j;
  }
  const double n_neg = double(labels.size() - n_pos);
  return (rank_sum - double(n_pos) * double(n_pos + 1) / 2.0) / (double(n_pos) * n_neg);
}

std::optional<double> mrr(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores, labels);
  const auto order = ranking(scores);
  double sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (labels[order[r]] > 0) {
      sum += 1.0 / double(r + 1);
      ++n_pos;
    }
  if (n_pos == 0) return std::nullopt;
  return sum / double(n_pos);
}

std::optional<double> ndcg(std::span<const double> scores, std::span<const int> labels, std::size_t k) {
  check_sizes(scores, labels);
  const auto order = ranking(scores);
  auto gain = [](int label) { return std::exp2(double(std::max(label, 0))) - 1.0; };
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, order.size()); ++r) dcg += gain(labels[order[r]]) / std::log2(double(r + 2));
  std::vector<int> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double best = 0.0;
  for (std::size_t r = 0; r < std::min(k, ideal.size()); ++r) best += gain(ideal[r]) / std::log2(double(r + 2));
  if (best == 0.0) return std::nullopt;
  return dcg / best;
}

MetricReport summarize(const std::vector<ImpressionScores>& impressions) {
  std::vector<const ImpressionScores*> sorted;
  for (const auto& imp : impressions) sorted.push_back(&imp);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](auto a, auto b) { return a->impression_id < b->impression_id; });
  MetricReport r;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto* imp : sorted) {
    scores.clear();
    labels.clear();
    for (const auto& item : imp->items) {
      scores.push_back(item.score);
      labels.push_back(item.label);
    }
    const auto a = auc(scores, labels);
    if (!a) {
      ++r.skipped;
      continue;
    }
    r.auc += *a;
    r.mrr += *mrr(scores, labels);
    r.ndcg5 += *ndcg(scores, labels, 5);
    r.ndcg10 += *ndcg(scores, labels, 10);
    ++r.evaluated;
  }
  if (r.evaluated > 0) {
    const double n = double(r.evaluated);
    r.auc /= n;
    r.mrr /= n;
    r.ndcg5 /= n;
    r.ndcg10 /= n;
  }
  return r;
}

void write_report_tsv(std::ostream& out, const std::vector<std::pair<std::string, MetricReport>>& rows) {
  using ingest::format_double;
  out << "name\tauc\tmrr\tndcg5\tndcg10\tevaluated\tskipped\n";
  for (const auto& [name, r] : rows) {
    out << name << '\t' << format_double(r.auc) << '\t' << format_double(r.mrr) << '\t' << format_double(r.ndcg5)
        << '\t' << format_double(r.ndcg10) << '\t' << r.evaluated << '\t' << r.skipped << '\n';
  }
}

std::vector<std::pair<std::string, MetricReport>> read_report_tsv(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, MetricReport>> rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (n == 1 || line.empty()) continue;
    const auto f = ingest::split_tabs(line);
    if (f.size() != 7) throw DataError(ingest::where(source, n) + ": expected 7 columns");
    try {
      MetricReport r;
      r.auc = std::stod(std::string(f[1]));
      r.mrr = std::stod(std::string(f[2]));
      r.ndcg5 = std::stod(std::string(f[3]));
      r.ndcg10 = std::stod(std::string(f[4]));
      r.evaluated = std::stoul(std::string(f[5]));
      r.skipped = std::stoul(std::string(f[6]));
      rows.emplace_back(std::string(f[0]), r);
    } catch (const std::logic_error&) {
      throw DataError(ingest::where(source, n) + ": bad number");
    }
  }
  return rows;
}

std::string format_report_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
  std::size_t width = 7;
  for (const auto& [name, r] : rows) width = std::max(width, name.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %7s  %7s  %7s  %7s  %9s  %7s\n", int(width), "model", "AUC", "MRR", "nDCG@5",
                "nDCG@10", "evaluated", "skipped");
  out += buf;
  out += std::string(width + 62, '-') + "\n";
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %7.2f  %7.2f  %7.2f  %7.2f  %9zu  %7zu\n", int(width), name.c_str(),
                  100 * r.auc, 100 * r.mrr, 100 * r.ndcg5, 100 * r.ndcg10, r.evaluated, r.skipped);
    out += buf;
  }
  return out;
}

}  // namespace drpn::eval
