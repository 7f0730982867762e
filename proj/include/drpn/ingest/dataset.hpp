#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "drpn/ingest/behaviors.hpp"
#include "drpn/ingest/catalog.hpp"
#include "drpn/ingest/collab_graph.hpp"
#include "drpn/ingest/profiles.hpp"

namespace drpn::ingest {

struct RebuildOptions {
  SplitOptions splits;
  std::size_t l_p = 30;
  std::size_t l_n = 60;
  std::size_t k_nbr = kDefaultNeighbors;
  std::size_t vocab_cap = 0;
  std::size_t max_title = kDefaultTitleLength;
};

/// Everything training and evaluation need.
struct Dataset {
  NewsCatalog catalog;
  DatasetSplits splits;
  ProfileSet profiles{30, 60};
  CollabGraph graph;
};

/// Runs the full rebuild from raw behaviors (+ optional dev behaviors) and news files.
Dataset rebuild_dataset(const std::filesystem::path& behaviors, const std::filesystem::path& news,
                        const RebuildOptions& options,
                        const std::optional<std::filesystem::path>& dev_behaviors = std::nullopt);

/// The same rebuild from logs already in memory.
Dataset make_dataset(NewsCatalog catalog, std::vector<ImpressionLog> logs, const RebuildOptions& options,
                     std::vector<ImpressionLog> dev_logs = {});

/// Writes news.tsv, profile.tsv, train.tsv, valid.tsv, test.tsv, profiles.tsv,
/// feedback.tsv, graph.tsv and degrees.tsv into a fresh directory. Output is
/// staged in a sibling temp directory and renamed, so a failure leaves nothing.
void write_dataset(const std::filesystem::path& out_dir, const Dataset& data);

/// Reads a directory written by write_dataset; profiles are rebuilt from
/// profile.tsv at the requested lengths and the graph is read from graph.tsv.
/// A directory holding only behaviors.tsv and news.tsv (synthetic output) is
/// rebuilt in memory instead.
Dataset load_dataset(const std::filesystem::path& dir, const RebuildOptions& options);

}  // namespace drpn::ingest
