#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "drpn/eval/metrics.hpp"
#include "drpn/ingest/behaviors.hpp"
#include "drpn/ingest/profiles.hpp"
#include "drpn/model/drpn.hpp"

namespace drpn::eval {

/// Scores every displayed item of every impression with frozen parameters.
/// Each user is encoded once; users absent from the profiles get the
/// all-padding path. Output order follows logs and is independent of threads.
std::vector<ImpressionScores> score_impressions(const model::Drpn& model, const num::ParamStore& store,
                                                const ingest::ProfileSet& profiles,
                                                const std::vector<ingest::ImpressionLog>& logs,
                                                std::size_t threads = 1);

inline MetricReport evaluate(const model::Drpn& model, const num::ParamStore& store,
                             const ingest::ProfileSet& profiles, const std::vector<ingest::ImpressionLog>& logs,
                             std::size_t threads = 1) {
  return summarize(score_impressions(model, store, profiles, logs, threads));
}

/// impression_id, news_id, score (round-trip precision).
void write_score_dump(std::ostream& out, const std::vector<ImpressionScores>& scores);

using ScoreDump = std::map<std::string, std::vector<std::pair<std::string, double>>>;
ScoreDump read_score_dump(std::istream& in, const std::string& source);
ScoreDump read_score_dump(const std::filesystem::path& path);

/// Attaches labels from logs to dumped scores. Every displayed item must have
/// exactly one dumped score.
std::vector<ImpressionScores> rescore(const ScoreDump& dump, const std::vector<ingest::ImpressionLog>& logs);

}  // namespace drpn::eval
