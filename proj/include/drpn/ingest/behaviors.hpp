#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace drpn::ingest {

struct DisplayedItem {
  std::string news_id;
  bool clicked = false;

  friend bool operator==(const DisplayedItem&, const DisplayedItem&) = default;
};

struct ImpressionLog {
  std::string impression_id;
  std::string user_id;
  std::int64_t timestamp = 0;  // epoch seconds, UTC
  std::vector<DisplayedItem> displayed;

  friend bool operator==(const ImpressionLog&, const ImpressionLog&) = default;
};

/// Accepts epoch seconds or the MIND form "11/15/2019 8:55:22 AM" (read as UTC).
std::int64_t parse_time(std::string_view text);
/// MIND form, UTC.
std::string format_time(std::int64_t epoch_seconds);

/// Columns: impression_id, user_id, time, history (ignored), impressions
/// ("N1-1 N2-0 ...").
std::vector<ImpressionLog> parse_impressions(std::istream& in, const std::string& source);
std::vector<ImpressionLog> parse_impressions(const std::filesystem::path& path);

void write_impressions(std::ostream& out, const std::vector<ImpressionLog>& logs);

struct SplitOptions {
  int profile_days = 5;
  int train_days = 1;
  double val_frac = 0.10;
};

struct DatasetSplits {
  std::vector<ImpressionLog> profile;
  std::vector<ImpressionLog> train;
  std::vector<ImpressionLog> validation;
  std::vector<ImpressionLog> test;
  std::int64_t day0 = 0;

  std::size_t total() const { return profile.size() + train.size() + validation.size() + test.size(); }
};

/// Orders logs by time (stable), takes the first profile_days UTC days from
/// the first log's day as the profile window and the next train_days as the
/// training window. Everything later, plus the extra validation-source logs,
/// is split chronologically: the first floor(val_frac * n) go to validation,
/// the rest to test.
DatasetSplits rebuild_splits(std::vector<ImpressionLog> logs, const SplitOptions& options,
                             std::vector<ImpressionLog> validation_source = {});

}  // namespace drpn::ingest
