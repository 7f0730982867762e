#include "drpn/eval/attention.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <tuple>

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"
#include "drpn/numerics/parallel.hpp"

namespace drpn::eval {

namespace {

struct Weighted {
  const model::History* history;
  model::Var alpha;
  const char* name;
  int sign;
};

std::vector<std::size_t> descending(const num::Tensor& alpha) {
  std::vector<std::size_t> order(alpha.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return alpha(a, 0) > alpha(b, 0); });
  return order;
}

std::vector<Weighted> weighted_sequences(const model::UserEncoding& u, const model::UserHistory& h, bool graph) {
  std::vector<Weighted> out;
  auto add = [&](const model::History& hist, const model::Var& alpha, const char* name, int sign) {
    if (alpha.valid() && hist.real_count() > 0) out.push_back({&hist, alpha, name, sign});
  };
  add(h.pos, u.sem.alpha_pos, "sem_pos", 1);
  add(h.neg, u.sem.alpha_neg, "sem_neg", -1);
  if (graph) {
    add(h.pos, u.col.alpha_pos, "col_pos", 1);
    add(h.neg, u.col.alpha_neg, "col_neg", -1);
  }
  return out;
}

}  // namespace

std::vector<AttentionEntry> attention_weights(const model::Drpn& model, const num::ParamStore& store,
                                              const ingest::ProfileSet& profiles, const std::string& user_id,
                                              const ingest::NewsCatalog* catalog) {
  if (!model.config().uses_denoise()) {
    throw ConfigError("variant " + model::to_string(model.config().variant) + " has no denoising weights");
  }
  if (profiles.users().count(user_id) == 0) throw DataError("user '" + user_id + "' has no profile");
  num::Tape tape(store);
  const auto history = model::make_history(model.index(), profiles.lookup(user_id));
  const auto user = model.encode_user(tape, history);
  std::vector<AttentionEntry> out;
  for (const auto& seq : weighted_sequences(user, history, model.config().uses_graph())) {
    const auto& alpha = seq.alpha.value();
    for (std::size_t j : descending(alpha)) {
      AttentionEntry e{user_id, seq.name, j, seq.history->news_ids[j], alpha(j, 0), ""};
      if (catalog != nullptr) {
        if (auto pos = catalog->find(e.news_id)) e.category = catalog->at(*pos).category;
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

void write_attention_tsv(std::ostream& out, const std::vector<AttentionEntry>& entries) {
  out << "user_id\tsequence\tposition\tnews_id\talpha\tcategory\n";
  for (const auto& e : entries) {
    out << e.user_id << '\t' << e.sequence << '\t' << e.position << '\t' << e.news_id << '\t'
        << ingest::format_double(e.alpha) << '\t' << e.category << '\n';
  }
}

std::string attention_svg(const std::vector<AttentionEntry>& entries) {
  std::vector<std::string> rows;
  std::map<std::string, std::vector<const AttentionEntry*>> cells;
  for (const auto& e : entries) {
    if (cells[e.sequence].empty()) rows.push_back(e.sequence);
    cells[e.sequence].push_back(&e);
  }
  std::size_t width = 1;
  for (const auto& [_, c] : cells) width = std::max(width, c.size());
  const int cell = 36, left = 80, top = 30, row_h = 48;
  const int w = left + int(width) * cell + 20, h = top + int(rows.size()) * row_h + 20;
  auto escape = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else if (c == '"') o += "&quot;";
      else o += c;
    }
    return o;
  };
  std::string svg;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" font-family=\"sans-serif\" "
                "font-size=\"10\">\n",
                w, h);
  svg += buf;
  if (!entries.empty()) svg += "<text x=\"4\" y=\"16\" font-size=\"12\">user " + escape(entries.front().user_id) +
                               ": denoising weights, ranked</text>\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& c = cells[rows[r]];
    double peak = 0.0;
    for (const auto* e : c) peak = std::max(peak, e->alpha);
    const int y = top + int(r) * row_h;
    std::snprintf(buf, sizeof buf, "<text x=\"4\" y=\"%d\">%s</text>\n", y + cell / 2 + 4, rows[r].c_str());
    svg += buf;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double t = peak > 0.0 ? c[i]->alpha / peak : 0.0;
      const int shade = int(255 - 200 * t);
      const int x = left + int(i) * cell;
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"rgb(%d,%d,255)\" stroke=\"white\">"
                    "<title>%s %s alpha=%.4f</title></rect>\n",
                    x, y, cell, cell, shade, shade, escape(c[i]->news_id).c_str(), escape(c[i]->category).c_str(),
                    c[i]->alpha);
      svg += buf;
      std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" font-size=\"8\">%.3f</text>\n", x + 3,
                    y + cell / 2 + 3, c[i]->alpha);
      svg += buf;
      std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" font-size=\"7\">%s</text>\n", x + 2, y + cell + 9,
                    escape(c[i]->category.empty() ? c[i]->news_id : c[i]->category).substr(0, 8).c_str());
      svg += buf;
    }
  }
  svg += "</svg>\n";
  return svg;
}

NoiseAttention noise_attention(const model::Drpn& model, const num::ParamStore& store,
                               const ingest::ProfileSet& profiles, const std::vector<ingest::TruthEntry>& truth,
                               std::size_t threads) {
  if (!model.config().uses_denoise()) {
    throw ConfigError("variant " + model::to_string(model.config().variant) + " has no denoising weights");
  }
  // (user, news, sign) -> flagged as noise in any exposure.
  std::map<std::tuple<std::string, std::string, int>, bool> flags;
  for (const auto& t : truth) {
    auto& f = flags[{t.user_id, t.news_id, t.sign}];
    f = f || t.noise;
  }
  model::Drpn cached = model;
  const auto titles = cached.build_title_cache(store);
  cached.set_title_cache(&titles);

  std::vector<const std::string*> users;
  for (const auto& [id, _] : profiles.users()) users.push_back(&id);
  struct Partial {
    double noise = 0.0, clean = 0.0;
    std::size_t n_noise = 0, n_clean = 0, lower = 0;
  };
  std::vector<Partial> parts(users.size());
  num::parallel_for(users.size(), threads, [&](std::size_t u) {
    num::Tape tape(store);
    const auto history = model::make_history(cached.index(), profiles.lookup(*users[u]));
    const auto enc = cached.encode_user(tape, history);
    auto& p = parts[u];
    for (const auto& seq : weighted_sequences(enc, history, false)) {
      const auto& alpha = seq.alpha.value();
      const auto order = descending(alpha);
      for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t j = order[rank];
        auto it = flags.find({*users[u], seq.history->news_ids[j], seq.sign});
        if (it == flags.end()) continue;
        if (it->second) {
          p.noise += alpha(j, 0);
          ++p.n_noise;
          if (2 * rank >= order.size()) ++p.lower;
        } else {
          p.clean += alpha(j, 0);
          ++p.n_clean;
        }
      }
    }
  });
  NoiseAttention out;
  std::size_t lower = 0;
  for (const auto& p : parts) {
    out.noise_mean += p.noise;
    out.clean_mean += p.clean;
    out.noise_count += p.n_noise;
    out.clean_count += p.n_clean;
    lower += p.lower;
  }
  if (out.noise_count > 0) {
    out.noise_mean /= double(out.noise_count);
    out.noise_lower_half = double(lower) / double(out.noise_count);
  }
  if (out.clean_count > 0) out.clean_mean /= double(out.clean_count);
  return out;
}

}  // namespace drpn::eval
