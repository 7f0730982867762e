#include "drpn/ingest/profiles.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "drpn/errors.hpp"

namespace drpn::ingest {

void FeedbackMatrix::observe(const std::string& user, const std::string& news, bool clicked) {
  auto& row = rows_[user];
  auto [it, inserted] = row.emplace(news, clicked ? 1 : -1);
  if (inserted) ++size_;
  else if (clicked) it->second = 1;
}

void FeedbackMatrix::set(const std::string& user, const std::string& news, int value) {
  if (value != 1 && value != -1) throw DataError("feedback value must be +1 or -1");
  auto [it, inserted] = rows_[user].insert_or_assign(news, value);
  (void)it;
  if (inserted) ++size_;
}

int FeedbackMatrix::value(const std::string& user, const std::string& news) const {
  auto r = rows_.find(user);
  if (r == rows_.end()) return 0;
  auto c = r->second.find(news);
  return c == r->second.end() ? 0 : c->second;
}

std::size_t UserProfile::pos_count() const {
  return static_cast<std::size_t>(std::count(pos_mask.begin(), pos_mask.end(), 1));
}

std::size_t UserProfile::neg_count() const {
  return static_cast<std::size_t>(std::count(neg_mask.begin(), neg_mask.end(), 1));
}

UserProfile ProfileSet::make_profile(const std::string& user, std::vector<std::string> full_pos,
                                     std::vector<std::string> full_neg) const {
  UserProfile p;
  p.user_id = user;
  auto fill = [](const std::vector<std::string>& full, std::size_t len, std::vector<std::string>& seq,
                 std::vector<std::uint8_t>& mask) {
    const std::size_t keep = std::min(len, full.size());
    seq.assign(full.end() - static_cast<std::ptrdiff_t>(keep), full.end());
    mask.assign(keep, 1);
    seq.resize(len, kPadNewsId);
    mask.resize(len, 0);
  };
  fill(full_pos, l_p_, p.positive, p.pos_mask);
  fill(full_neg, l_n_, p.negative, p.neg_mask);
  p.full_positive = std::move(full_pos);
  p.full_negative = std::move(full_neg);
  return p;
}

UserProfile ProfileSet::lookup(const std::string& user) const {
  auto it = users_.find(user);
  if (it != users_.end()) return it->second;
  return make_profile(user, {}, {});
}

ProfileSet build_profiles(const std::vector<ImpressionLog>& profile_logs, std::size_t l_p, std::size_t l_n) {
  if (l_p == 0 || l_n == 0) throw ConfigError("sequence lengths l_p and l_n must be positive");
  ProfileSet set(l_p, l_n);

  std::vector<std::size_t> order(profile_logs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return profile_logs[a].timestamp < profile_logs[b].timestamp;
  });

  struct Seen {
    std::size_t last = 0;
    bool clicked = false;
  };
  std::map<std::string, std::unordered_map<std::string, Seen>> per_user;
  std::size_t tick = 0;
  for (std::size_t i : order) {
    const auto& log = profile_logs[i];
    auto& seen = per_user[log.user_id];
    for (const auto& item : log.displayed) {
      auto& s = seen[item.news_id];
      s.last = ++tick;
      s.clicked = s.clicked || item.clicked;
      set.matrix_.observe(log.user_id, item.news_id, item.clicked);
    }
  }

  for (auto& [user, seen] : per_user) {
    std::vector<std::pair<std::size_t, std::string>> pos, neg;
    for (const auto& [news, s] : seen) (s.clicked ? pos : neg).emplace_back(s.last, news);
    std::sort(pos.begin(), pos.end());
    std::sort(neg.begin(), neg.end());
    std::vector<std::string> full_pos, full_neg;
    for (auto& [t, n] : pos) full_pos.push_back(std::move(n));
    for (auto& [t, n] : neg) full_neg.push_back(std::move(n));
    set.users_.emplace(user, set.make_profile(user, std::move(full_pos), std::move(full_neg)));
  }
  return set;
}

FeedbackMatrix matrix_from_profiles(const ProfileSet& profiles) {
  FeedbackMatrix m;
  for (const auto& [user, p] : profiles.users()) {
    for (const auto& n : p.full_positive) m.set(user, n, 1);
    for (const auto& n : p.full_negative) m.set(user, n, -1);
  }
  return m;
}

void write_profiles(std::ostream& out, const ProfileSet& profiles) {
  auto join = [&](const std::vector<std::string>& seq, const std::vector<std::uint8_t>& mask) {
    std::string s;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (!mask[i]) continue;
      if (!s.empty()) s += ' ';
      s += seq[i];
    }
    return s;
  };
  for (const auto& [user, p] : profiles.users()) {
    out << user << '\t' << join(p.positive, p.pos_mask) << '\t' << join(p.negative, p.neg_mask) << '\n';
  }
}

void write_feedback(std::ostream& out, const FeedbackMatrix& matrix) {
  for (const auto& [user, row] : matrix.rows())
    for (const auto& [news, v] : row) out << user << '\t' << news << '\t' << v << '\n';
}

}  // namespace drpn::ingest
