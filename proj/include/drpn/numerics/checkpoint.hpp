#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "drpn/numerics/optim.hpp"
#include "drpn/numerics/param_store.hpp"

namespace drpn::num {

/// Self-describing binary container:
///
///   "DRPNCKPT" u32 version
///   u32 header entries, each (u32 len, key bytes, u32 len, value bytes), sorted by key
///   u32 slots, each (u32 len, name, u8 trainable, u8 init, u32 rank = 2,
///                    u64 rows, u64 cols, rows*cols little-endian f64)
///   u8 has_optimizer [u64 steps, m and v for every slot in slot order,
///                     f64 lr, beta1, beta2, eps]
///
/// All integers are little-endian. Round trips are bit-exact.
struct Checkpoint {
  std::map<std::string, std::string> header;
  ParamStore params;
  std::optional<Adam> optimizer;
};

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const std::map<std::string, std::string>& header, const Adam* optimizer = nullptr);

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values from src into dst; names and shapes must match exactly.
void copy_values(const ParamStore& src, ParamStore& dst);

}  // namespace drpn::num
