#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "drpn/ingest/behaviors.hpp"

namespace drpn::ingest {

/// Reserved id that fills padded sequence slots.
inline const std::string kPadNewsId = "<pad>";

/// Sparse user × news matrix over {+1, -1}; absent entries are 0.
class FeedbackMatrix {
 public:
  /// Records one exposure. A click (+1) overrides an earlier or later skip.
  void observe(const std::string& user, const std::string& news, bool clicked);
  /// Sets the value directly (must be +1 or -1).
  void set(const std::string& user, const std::string& news, int value);
  int value(const std::string& user, const std::string& news) const;
  std::size_t size() const noexcept { return size_; }
  const std::map<std::string, std::map<std::string, int>>& rows() const noexcept { return rows_; }

  friend bool operator==(const FeedbackMatrix& a, const FeedbackMatrix& b) { return a.rows_ == b.rows_; }

 private:
  std::map<std::string, std::map<std::string, int>> rows_;
  std::size_t size_ = 0;
};

struct UserProfile {
  std::string user_id;
  // Fixed-length sequences, oldest first, real entries before padding.
  std::vector<std::string> positive;
  std::vector<std::string> negative;
  std::vector<std::uint8_t> pos_mask;
  std::vector<std::uint8_t> neg_mask;
  // Every distinct news before truncation, oldest first.
  std::vector<std::string> full_positive;
  std::vector<std::string> full_negative;

  std::size_t pos_count() const;
  std::size_t neg_count() const;
};

class ProfileSet {
 public:
  ProfileSet(std::size_t l_p, std::size_t l_n) : l_p_(l_p), l_n_(l_n) {}

  std::size_t l_p() const noexcept { return l_p_; }
  std::size_t l_n() const noexcept { return l_n_; }
  const std::map<std::string, UserProfile>& users() const noexcept { return users_; }
  const FeedbackMatrix& matrix() const noexcept { return matrix_; }

  /// The stored profile, or an all-padding one for users absent from the window.
  UserProfile lookup(const std::string& user) const;

  /// Builds a padded/truncated profile from distinct histories (oldest first).
  UserProfile make_profile(const std::string& user, std::vector<std::string> full_pos,
                           std::vector<std::string> full_neg) const;

 private:
  friend ProfileSet build_profiles(const std::vector<ImpressionLog>&, std::size_t, std::size_t);
  std::size_t l_p_;
  std::size_t l_n_;
  std::map<std::string, UserProfile> users_;
  FeedbackMatrix matrix_;
};

/// Clicked news form the positive sequence and seen-but-unclicked news the
/// negative one. Each sequence is deduplicated and ordered by the news' most
/// recent exposure; truncation keeps the most recent entries.
ProfileSet build_profiles(const std::vector<ImpressionLog>& profile_logs, std::size_t l_p, std::size_t l_n);

/// Rebuilds the matrix from the untruncated histories.
FeedbackMatrix matrix_from_profiles(const ProfileSet& profiles);

/// user_id, space-separated real positives, space-separated real negatives.
void write_profiles(std::ostream& out, const ProfileSet& profiles);
/// user_id, news_id, sign.
void write_feedback(std::ostream& out, const FeedbackMatrix& matrix);

}  // namespace drpn::ingest
