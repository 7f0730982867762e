#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "drpn/ingest/behaviors.hpp"
#include "drpn/ingest/catalog.hpp"

namespace drpn::ingest {

struct SyntheticOptions {
  std::size_t n_users = 2000;
  std::size_t n_news = 1000;
  std::size_t n_topics = 8;
  double noise_rate = 0.2;
  std::uint64_t seed = 7;

  int days = 7;
  int profile_days = 5;  // noise is planted only in these days
  std::int64_t start_epoch = 1573257600;  // 2019-11-09 00:00 UTC
  std::size_t min_liked = 1;
  std::size_t max_liked = 3;
  double profile_activity = 0.6;       // chance a user shows up on a profile day
  std::size_t profile_shown_min = 6;   // items per profile impression
  std::size_t profile_shown_max = 10;
  std::size_t label_impressions = 1;   // per user per post-profile day
  std::size_t label_liked_min = 1;     // liked items per label impression
  std::size_t label_liked_max = 3;
  std::size_t label_disliked_min = 4;  // disliked items per label impression
  std::size_t label_disliked_max = 8;
  std::size_t topic_words = 40;
  std::size_t common_words = 200;
  std::size_t title_min = 5;
  std::size_t title_max = 10;
  double topic_word_prob = 0.5;
};

struct TruthEntry {
  std::string user_id;
  std::string news_id;
  int sign = 0;  // +1 clicked, -1 skipped
  bool noise = false;
};

struct SyntheticTruth {
  std::map<std::string, std::vector<std::size_t>> liked_topics;
  std::map<std::string, std::size_t> news_topic;
  /// One entry per profile-window (user, news) exposure.
  std::vector<TruthEntry> entries;
};

struct SyntheticData {
  NewsCatalog catalog;
  std::vector<ImpressionLog> logs;
  SyntheticTruth truth;
};

/// Each news belongs to one topic and its title mixes topic words with common
/// words. Each user likes a random topic subset. Profile-window impressions
/// mix liked and disliked topics half and half; a liked item is skipped and a
/// disliked item clicked with probability noise_rate, and both are flagged.
/// Later days are noise-free: exactly the liked items are clicked.
SyntheticData generate_synthetic(const SyntheticOptions& options);

/// user_id, news_id, feedback_sign, noise_flag (0/1).
void write_truth(std::ostream& out, const SyntheticTruth& truth);
std::vector<TruthEntry> read_truth(const std::filesystem::path& path);
/// user_id, comma-separated liked topics.
void write_topics(std::ostream& out, const SyntheticTruth& truth);

/// news.tsv, behaviors.tsv, truth.tsv, topics.tsv under dir.
void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data);

}  // namespace drpn::ingest
