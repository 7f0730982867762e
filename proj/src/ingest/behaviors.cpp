#include "drpn/ingest/behaviors.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"

namespace drpn::ingest {

namespace {

constexpr std::int64_t kDay = 86400;

bool parse_int(std::string_view s, long long& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::int64_t parse_time(std::string_view text) {
  long long epoch = 0;
  if (parse_int(text, epoch)) return epoch;

  // M/D/YYYY h:mm:ss AM
  const auto bad = [&]() { return DataError("unrecognised time '" + std::string(text) + "'"); };
  auto parts = split_ws(text);
  if (parts.size() != 3) throw bad();
  long long mo, dd, yy, hh, mi, ss;
  {
    auto d = parts[0];
    auto s1 = d.find('/'), s2 = d.rfind('/');
    if (s1 == std::string_view::npos || s1 == s2) throw bad();
    if (!parse_int(d.substr(0, s1), mo) || !parse_int(d.substr(s1 + 1, s2 - s1 - 1), dd) ||
        !parse_int(d.substr(s2 + 1), yy))
      throw bad();
  }
  {
    auto t = parts[1];
    auto c1 = t.find(':'), c2 = t.rfind(':');
    if (c1 == std::string_view::npos || c1 == c2) throw bad();
    if (!parse_int(t.substr(0, c1), hh) || !parse_int(t.substr(c1 + 1, c2 - c1 - 1), mi) ||
        !parse_int(t.substr(c2 + 1), ss))
      throw bad();
  }
  if (hh < 1 || hh > 12 || mi < 0 || mi > 59 || ss < 0 || ss > 60) throw bad();
  if (parts[2] == "AM") {
    if (hh == 12) hh = 0;
  } else if (parts[2] == "PM") {
    if (hh != 12) hh += 12;
  } else {
    throw bad();
  }
  using namespace std::chrono;
  const year_month_day ymd{year{static_cast<int>(yy)}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(dd)}};
  if (!ymd.ok()) throw bad();
  const auto days = sys_days(ymd).time_since_epoch().count();
  return static_cast<std::int64_t>(days) * kDay + hh * 3600 + mi * 60 + ss;
}

std::string format_time(std::int64_t epoch_seconds) {
  using namespace std::chrono;
  const std::int64_t days = floor_div(epoch_seconds, kDay);
  std::int64_t rem = epoch_seconds - days * kDay;
  const year_month_day ymd{sys_days{std::chrono::days{days}}};
  int h = static_cast<int>(rem / 3600);
  rem %= 3600;
  const int m = static_cast<int>(rem / 60);
  const int s = static_cast<int>(rem % 60);
  const char* ampm = h < 12 ? "AM" : "PM";
  int h12 = h % 12;
  if (h12 == 0) h12 = 12;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%u/%u/%d %d:%02d:%02d %s", static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(ymd.year()), h12, m, s, ampm);
  return buf;
}

std::vector<ImpressionLog> parse_impressions(std::istream& in, const std::string& source) {
  std::vector<ImpressionLog> logs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 5) {
      throw DataError(where(source, lineno) + "expected 5 tab-separated columns, found " +
                      std::to_string(cols.size()));
    }
    ImpressionLog log;
    log.impression_id = std::string(cols[0]);
    log.user_id = std::string(cols[1]);
    if (log.impression_id.empty() || log.user_id.empty()) {
      throw DataError(where(source, lineno) + "empty impression or user id");
    }
    try {
      log.timestamp = parse_time(cols[2]);
    } catch (const DataError& e) {
      throw DataError(where(source, lineno) + e.what());
    }
    for (auto item : split_ws(cols[4])) {
      const auto dash = item.rfind('-');
      if (dash == std::string_view::npos || dash == 0) {
        throw DataError(where(source, lineno) + "impression item '" + std::string(item) +
                        "' lacks a -0/-1 suffix");
      }
      const auto suffix = item.substr(dash + 1);
      if (suffix != "0" && suffix != "1") {
        throw DataError(where(source, lineno) + "impression item '" + std::string(item) +
                        "' has suffix '-" + std::string(suffix) + "', expected -0 or -1");
      }
      log.displayed.push_back({std::string(item.substr(0, dash)), suffix == "1"});
    }
    if (log.displayed.empty()) throw DataError(where(source, lineno) + "empty impression list");
    logs.push_back(std::move(log));
  }
  return logs;
}

std::vector<ImpressionLog> parse_impressions(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_impressions(in, path.string());
}

void write_impressions(std::ostream& out, const std::vector<ImpressionLog>& logs) {
  for (const auto& log : logs) {
    out << log.impression_id << '\t' << log.user_id << '\t' << format_time(log.timestamp) << "\t\t";
    for (std::size_t i = 0; i < log.displayed.size(); ++i) {
      if (i) out << ' ';
      out << log.displayed[i].news_id << (log.displayed[i].clicked ? "-1" : "-0");
    }
    out << '\n';
  }
}

DatasetSplits rebuild_splits(std::vector<ImpressionLog> logs, const SplitOptions& options,
                             std::vector<ImpressionLog> validation_source) {
  if (options.profile_days < 1) throw ConfigError("profile_days must be at least 1");
  if (options.train_days < 1) throw ConfigError("train_days must be at least 1");
  if (!(options.val_frac >= 0.0 && options.val_frac <= 1.0)) throw ConfigError("val_frac must lie in [0, 1]");
  {
    std::unordered_set<std::string> seen;
    for (const auto* set : {&logs, &validation_source})
      for (const auto& l : *set)
        if (!seen.insert(l.impression_id).second)
          throw DataError("impression id '" + l.impression_id + "' appears twice");
  }
  if (logs.empty()) throw DataError("profile window is empty: no impression logs");

  auto by_time = [](const ImpressionLog& a, const ImpressionLog& b) { return a.timestamp < b.timestamp; };
  std::stable_sort(logs.begin(), logs.end(), by_time);

  DatasetSplits s;
  s.day0 = floor_div(logs.front().timestamp, kDay) * kDay;
  const std::int64_t profile_end = s.day0 + options.profile_days * kDay;
  const std::int64_t train_end = profile_end + options.train_days * kDay;
  std::vector<ImpressionLog> rest;
  for (auto& l : logs) {
    if (l.timestamp < profile_end) s.profile.push_back(std::move(l));
    else if (l.timestamp < train_end) s.train.push_back(std::move(l));
    else rest.push_back(std::move(l));
  }
  for (auto& l : validation_source) rest.push_back(std::move(l));
  std::stable_sort(rest.begin(), rest.end(), by_time);

  if (s.train.empty()) throw DataError("train window is empty (days " + std::to_string(options.profile_days + 1) +
                                       ".." + std::to_string(options.profile_days + options.train_days) + ")");
  if (rest.empty()) throw DataError("validation/test window is empty: no logs after the train window");

  const auto n_val = static_cast<std::size_t>(
      std::floor(options.val_frac * static_cast<double>(rest.size()) + 1e-9));
  for (std::size_t i = 0; i < rest.size(); ++i) {
    (i < n_val ? s.validation : s.test).push_back(std::move(rest[i]));
  }
  return s;
}

}  // namespace drpn::ingest
