#include "drpn/eval/evaluate.hpp"

#include <cmath>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"
#include "drpn/numerics/parallel.hpp"

namespace drpn::eval {

std::vector<ImpressionScores> score_impressions(const model::Drpn& model, const num::ParamStore& store,
                                                const ingest::ProfileSet& profiles,
                                                const std::vector<ingest::ImpressionLog>& logs,
                                                std::size_t threads) {
  model::Drpn cached = model;
  const num::Tensor titles = cached.build_title_cache(store);
  cached.set_title_cache(&titles);

  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < logs.size(); ++i) by_user[logs[i].user_id].push_back(i);
  std::vector<const std::pair<const std::string, std::vector<std::size_t>>*> users;
  for (const auto& entry : by_user) users.push_back(&entry);

  std::vector<ImpressionScores> out(logs.size());
  num::parallel_for(users.size(), threads, [&](std::size_t u) {
    const auto& [user_id, members] = *users[u];
    num::Tape tape(store);
    const auto history = model::make_history(cached.index(), profiles.lookup(user_id));
    const auto user = cached.encode_user(tape, history);
    for (std::size_t i : members) {
      const auto& log = logs[i];
      auto& result = out[i];
      result.impression_id = log.impression_id;
      if (log.displayed.empty()) continue;
      std::vector<model::NewsRef> refs;
      for (const auto& item : log.displayed) refs.push_back(cached.index().lookup(item.news_id));
      const auto scores = cached.score(tape, user, refs).value();
      for (std::size_t c = 0; c < refs.size(); ++c) {
        const double s = scores(c, 0);
        if (!std::isfinite(s)) {
          throw NumericError("non-finite score for " + log.displayed[c].news_id + " in impression " +
                             log.impression_id);
        }
        result.items.push_back({log.displayed[c].news_id, log.displayed[c].clicked ? 1 : 0, s});
      }
    }
  });
  return out;
}

void write_score_dump(std::ostream& out, const std::vector<ImpressionScores>& scores) {
  for (const auto& imp : scores)
    for (const auto& item : imp.items)
      out << imp.impression_id << '\t' << item.news_id << '\t' << ingest::format_double(item.score) << '\n';
}

ScoreDump read_score_dump(std::istream& in, const std::string& source) {
  ScoreDump dump;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto f = ingest::split_tabs(line);
    if (f.size() != 3) throw DataError(ingest::where(source, n) + ": expected impression_id, news_id, score");
    double s = 0.0;
    try {
      std::size_t used = 0;
      s = std::stod(std::string(f[2]), &used);
      if (used != f[2].size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw DataError(ingest::where(source, n) + ": bad score '" + std::string(f[2]) + "'");
    }
    dump[std::string(f[0])].emplace_back(std::string(f[1]), s);
  }
  return dump;
}

ScoreDump read_score_dump(const std::filesystem::path& path) {
  auto in = ingest::open_input(path);
  return read_score_dump(in, path.string());
}

std::vector<ImpressionScores> rescore(const ScoreDump& dump, const std::vector<ingest::ImpressionLog>& logs) {
  std::vector<ImpressionScores> out;
  for (const auto& log : logs) {
    ImpressionScores imp{log.impression_id, {}};
    if (!log.displayed.empty()) {
      auto it = dump.find(log.impression_id);
      if (it == dump.end()) throw DataError("score dump lacks impression " + log.impression_id);
      if (it->second.size() != log.displayed.size()) {
        throw DataError("score dump has " + std::to_string(it->second.size()) + " items for impression " +
                        log.impression_id + ", the log has " + std::to_string(log.displayed.size()));
      }
      for (std::size_t c = 0; c < log.displayed.size(); ++c) {
        if (it->second[c].first != log.displayed[c].news_id) {
          throw DataError("score dump item order differs from impression " + log.impression_id);
        }
        imp.items.push_back({log.displayed[c].news_id, log.displayed[c].clicked ? 1 : 0, it->second[c].second});
      }
    }
    out.push_back(std::move(imp));
  }
  return out;
}

}  // namespace drpn::eval
