#include "drpn/ingest/synthetic.hpp"

#include <algorithm>
#include <numeric>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"
#include "drpn/numerics/random.hpp"

namespace drpn::ingest {

namespace {

std::size_t between(num::Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

// Draws without repetition from a shuffled pool, reshuffling when exhausted.
class PoolCursor {
 public:
  PoolCursor(std::vector<std::size_t> pool, num::Rng& rng) : pool_(std::move(pool)) { rng.shuffle(pool_); }
  bool empty() const { return pool_.empty(); }
  std::size_t next(num::Rng& rng) {
    if (pos_ == pool_.size()) {
      rng.shuffle(pool_);
      pos_ = 0;
    }
    return pool_[pos_++];
  }

 private:
  std::vector<std::size_t> pool_;
  std::size_t pos_ = 0;
};

void validate(const SyntheticOptions& o) {
  if (o.n_users == 0 || o.n_news == 0 || o.n_topics == 0) throw ConfigError("synth: counts must be positive");
  if (o.n_topics > o.n_news) {
    throw ConfigError("synth: n_topics (" + std::to_string(o.n_topics) + ") exceeds n_news (" +
                      std::to_string(o.n_news) + ")");
  }
  if (!(o.noise_rate >= 0.0 && o.noise_rate < 1.0)) throw ConfigError("synth: noise_rate must lie in [0, 1)");
  if (o.days <= o.profile_days || o.profile_days < 1) throw ConfigError("synth: need 1 <= profile_days < days");
  if (o.min_liked == 0 || o.min_liked > o.max_liked) throw ConfigError("synth: bad liked-topic range");
  if (o.profile_shown_min == 0 || o.profile_shown_min > o.profile_shown_max ||
      o.label_liked_min > o.label_liked_max || o.label_disliked_min > o.label_disliked_max ||
      o.title_min == 0 || o.title_min > o.title_max)
    throw ConfigError("synth: bad size range");
  if (o.topic_words == 0 || o.common_words == 0) throw ConfigError("synth: word list sizes must be positive");
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticOptions& o) {
  validate(o);
  num::Rng rng(o.seed);
  SyntheticData data;

  std::vector<std::size_t> topic_of(o.n_news);
  for (std::size_t i = 0; i < o.n_news; ++i) topic_of[i] = i % o.n_topics;
  rng.shuffle(topic_of);
  std::vector<std::vector<std::size_t>> news_by_topic(o.n_topics);
  for (std::size_t i = 0; i < o.n_news; ++i) {
    const std::size_t t = topic_of[i];
    news_by_topic[t].push_back(i);
    const std::size_t len = between(rng, o.title_min, o.title_max);
    std::string title;
    for (std::size_t w = 0; w < len; ++w) {
      if (w) title += ' ';
      if (rng.bernoulli(o.topic_word_prob)) {
        title += "t" + std::to_string(t) + "w" + std::to_string(rng.below(o.topic_words));
      } else {
        title += "w" + std::to_string(rng.below(o.common_words));
      }
    }
    const std::string id = "N" + std::to_string(i + 1);
    data.catalog.add(id, "topic" + std::to_string(t), "topic" + std::to_string(t), title);
    data.truth.news_topic[id] = t;
  }

  std::vector<ImpressionLog> logs;
  const std::size_t max_liked = std::min(o.max_liked, o.n_topics > 1 ? o.n_topics - 1 : std::size_t{1});
  const std::size_t min_liked = std::min(o.min_liked, max_liked);
  for (std::size_t u = 0; u < o.n_users; ++u) {
    const std::string user = "U" + std::to_string(u + 1);
    std::vector<std::size_t> topics(o.n_topics);
    std::iota(topics.begin(), topics.end(), 0);
    rng.shuffle(topics);
    const std::size_t n_liked = between(rng, min_liked, max_liked);
    std::vector<std::size_t> liked(topics.begin(), topics.begin() + static_cast<std::ptrdiff_t>(n_liked));
    std::sort(liked.begin(), liked.end());
    data.truth.liked_topics[user] = liked;

    std::vector<std::size_t> liked_pool, disliked_pool;
    for (std::size_t t = 0; t < o.n_topics; ++t) {
      const bool is_liked = std::binary_search(liked.begin(), liked.end(), t);
      auto& pool = is_liked ? liked_pool : disliked_pool;
      pool.insert(pool.end(), news_by_topic[t].begin(), news_by_topic[t].end());
    }
    std::sort(liked_pool.begin(), liked_pool.end());
    std::sort(disliked_pool.begin(), disliked_pool.end());
    PoolCursor liked_cur(liked_pool, rng), disliked_cur(disliked_pool, rng);

    auto draw = [&](std::size_t n_like, std::size_t n_dislike, std::vector<std::pair<std::size_t, bool>>& out) {
      for (std::size_t i = 0; i < n_like && !liked_cur.empty(); ++i) out.emplace_back(liked_cur.next(rng), true);
      for (std::size_t i = 0; i < n_dislike && !disliked_cur.empty(); ++i)
        out.emplace_back(disliked_cur.next(rng), false);
      rng.shuffle(out);
    };
    auto stamp = [&](int day) {
      return o.start_epoch + static_cast<std::int64_t>(day) * 86400 + 6 * 3600 +
             static_cast<std::int64_t>(rng.below(16 * 3600));
    };

    for (int day = 0; day < o.profile_days; ++day) {
      if (!rng.bernoulli(o.profile_activity)) continue;
      const std::size_t shown = between(rng, o.profile_shown_min, o.profile_shown_max);
      std::size_t n_like = shown / 2;
      if (shown % 2 == 1 && rng.bernoulli(0.5)) ++n_like;
      std::vector<std::pair<std::size_t, bool>> items;
      draw(n_like, shown - n_like, items);
      ImpressionLog log{"", user, stamp(day), {}};
      for (auto [news, is_liked] : items) {
        const bool noise = rng.bernoulli(o.noise_rate);
        const bool clicked = is_liked != noise;
        const std::string id = "N" + std::to_string(news + 1);
        log.displayed.push_back({id, clicked});
        data.truth.entries.push_back({user, id, clicked ? 1 : -1, noise});
      }
      if (!log.displayed.empty()) logs.push_back(std::move(log));
    }
    for (int day = o.profile_days; day < o.days; ++day) {
      for (std::size_t k = 0; k < o.label_impressions; ++k) {
        std::vector<std::pair<std::size_t, bool>> items;
        draw(between(rng, o.label_liked_min, o.label_liked_max),
             between(rng, o.label_disliked_min, o.label_disliked_max), items);
        ImpressionLog log{"", user, stamp(day), {}};
        for (auto [news, is_liked] : items) log.displayed.push_back({"N" + std::to_string(news + 1), is_liked});
        if (!log.displayed.empty()) logs.push_back(std::move(log));
      }
    }
  }

  std::stable_sort(logs.begin(), logs.end(),
                   [](const ImpressionLog& a, const ImpressionLog& b) { return a.timestamp < b.timestamp; });
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i].impression_id = std::to_string(i + 1);
  data.logs = std::move(logs);
  return data;
}

void write_truth(std::ostream& out, const SyntheticTruth& truth) {
  for (const auto& e : truth.entries)
    out << e.user_id << '\t' << e.news_id << '\t' << e.sign << '\t' << (e.noise ? 1 : 0) << '\n';
}

std::vector<TruthEntry> read_truth(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<TruthEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 4 || (cols[2] != "1" && cols[2] != "-1") || (cols[3] != "0" && cols[3] != "1")) {
      throw DataError(where(path.string(), lineno) + "expected user, news, sign (+1/-1), noise (0/1)");
    }
    out.push_back({std::string(cols[0]), std::string(cols[1]), cols[2] == "1" ? 1 : -1, cols[3] == "1"});
  }
  return out;
}

void write_topics(std::ostream& out, const SyntheticTruth& truth) {
  for (const auto& [user, topics] : truth.liked_topics) {
    out << user << '\t';
    for (std::size_t i = 0; i < topics.size(); ++i) out << (i ? "," : "") << topics[i];
    out << '\n';
  }
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticData& data) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_output(dir / "news.tsv");
    write_news_catalog(out, data.catalog);
  }
  {
    auto out = open_output(dir / "behaviors.tsv");
    write_impressions(out, data.logs);
  }
  {
    auto out = open_output(dir / "truth.tsv");
    write_truth(out, data.truth);
  }
  {
    auto out = open_output(dir / "topics.tsv");
    write_topics(out, data.truth);
  }
}

}  // namespace drpn::ingest
