#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "drpn/ingest/dataset.hpp"
#include "drpn/model/config.hpp"
#include "drpn/training/trainer.hpp"

namespace drpn::cli {

enum class KeyKind { kText, kCount, kReal, kBool, kVariant };

struct KeySpec {
  const char* name;
  const char* fallback;
  KeyKind kind;
  const char* help;
};

/// Flat key = value configuration shared by every command. Values are kept
/// as text and parsed on access; validate() reports every bad entry at once.
class RunConfig {
 public:
  static std::span<const KeySpec> keys();

  RunConfig();

  /// Lines are "key = value"; '#' starts a comment. Throws ConfigError
  /// naming every unknown key and malformed line.
  void merge_file(const std::filesystem::path& path);
  /// Throws ConfigError naming every unknown key.
  void merge(const std::map<std::string, std::string>& values, const std::string& source);

  const std::string& text(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  double real(const std::string& key) const;
  bool flag(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  /// Throws ConfigError listing every value that fails to parse or is out of range.
  void validate() const;

  model::ModelConfig model() const;
  ingest::RebuildOptions rebuild() const;
  training::TrainOptions train() const;

  /// Resolved "key = value" lines in table order.
  std::string resolved() const;
  void write(const std::filesystem::path& path) const;

  /// Keys stored in checkpoint headers (prefixed "run."). Thread count and
  /// the resume flag are left out because they do not change results.
  std::map<std::string, std::string> header() const;
  /// Restores from a checkpoint header; absent keys keep their defaults.
  static RunConfig from_header(const std::map<std::string, std::string>& header);

  /// One line per key with its default, for --help.
  static std::string describe();

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace drpn::cli
