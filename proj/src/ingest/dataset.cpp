#include "drpn/ingest/dataset.hpp"

#include "drpn/errors.hpp"
#include "drpn/ingest/tsv.hpp"

namespace drpn::ingest {

namespace fs = std::filesystem;

namespace {

void finish(Dataset& d, const RebuildOptions& o) {
  d.profiles = build_profiles(d.splits.profile, o.l_p, o.l_n);
  d.graph = build_collab_graph(d.profiles.matrix(), o.k_nbr);
}

}  // namespace

Dataset rebuild_dataset(const fs::path& behaviors, const fs::path& news, const RebuildOptions& options,
                        const std::optional<fs::path>& dev_behaviors) {
  auto catalog = parse_news_catalog(news, options.vocab_cap, options.max_title);
  auto logs = parse_impressions(behaviors);
  std::vector<ImpressionLog> dev;
  if (dev_behaviors) dev = parse_impressions(*dev_behaviors);
  return make_dataset(std::move(catalog), std::move(logs), options, std::move(dev));
}

Dataset make_dataset(NewsCatalog catalog, std::vector<ImpressionLog> logs, const RebuildOptions& options,
                     std::vector<ImpressionLog> dev_logs) {
  Dataset d;
  d.catalog = std::move(catalog);
  d.splits = rebuild_splits(std::move(logs), options.splits, std::move(dev_logs));
  finish(d, options);
  return d;
}

void write_dataset(const fs::path& out_dir, const Dataset& data) {
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    throw DataError("output directory " + out_dir.string() + " already exists and is not empty");
  }
  const fs::path parent = out_dir.has_parent_path() ? out_dir.parent_path() : fs::path(".");
  fs::create_directories(parent);
  const fs::path staging = parent / (out_dir.filename().string() + ".partial");
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    auto emit = [&](const char* name, auto&& writer) {
      auto out = open_output(staging / name);
      writer(out);
      if (!out) throw DataError(std::string("write failed for ") + name);
    };
    emit("news.tsv", [&](std::ostream& o) { write_news_catalog(o, data.catalog); });
    emit("profile.tsv", [&](std::ostream& o) { write_impressions(o, data.splits.profile); });
    emit("train.tsv", [&](std::ostream& o) { write_impressions(o, data.splits.train); });
    emit("valid.tsv", [&](std::ostream& o) { write_impressions(o, data.splits.validation); });
    emit("test.tsv", [&](std::ostream& o) { write_impressions(o, data.splits.test); });
    emit("profiles.tsv", [&](std::ostream& o) { write_profiles(o, data.profiles); });
    emit("feedback.tsv", [&](std::ostream& o) { write_feedback(o, data.profiles.matrix()); });
    emit("graph.tsv", [&](std::ostream& o) { write_edge_list(o, data.graph); });
    emit("degrees.tsv", [&](std::ostream& o) { write_degree_histogram(o, data.graph); });
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  if (fs::exists(out_dir)) fs::remove(out_dir);
  fs::rename(staging, out_dir);
}

Dataset load_dataset(const fs::path& dir, const RebuildOptions& options) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory " + dir.string() + " does not exist");
  if (!fs::exists(dir / "train.tsv") && fs::exists(dir / "behaviors.tsv")) {
    std::optional<fs::path> dev;
    if (fs::exists(dir / "dev_behaviors.tsv")) dev = dir / "dev_behaviors.tsv";
    return rebuild_dataset(dir / "behaviors.tsv", dir / "news.tsv", options, dev);
  }
  Dataset d;
  d.catalog = parse_news_catalog(dir / "news.tsv", options.vocab_cap, options.max_title);
  d.splits.profile = parse_impressions(dir / "profile.tsv");
  d.splits.train = parse_impressions(dir / "train.tsv");
  d.splits.validation = parse_impressions(dir / "valid.tsv");
  d.splits.test = parse_impressions(dir / "test.tsv");
  d.profiles = build_profiles(d.splits.profile, options.l_p, options.l_n);
  if (fs::exists(dir / "graph.tsv")) {
    CollabGraph stored = read_edge_list(dir / "graph.tsv");
    for (auto [news, list] : stored.adjacency()) {
      if (list.size() > options.k_nbr) list.resize(options.k_nbr);
      d.graph.set_neighbors(news, std::move(list));
    }
  } else {
    d.graph = build_collab_graph(d.profiles.matrix(), options.k_nbr);
  }
  return d;
}

}  // namespace drpn::ingest
