#pragma once

#include <cstddef>
#include <functional>

namespace drpn::num {

/// Runs fn(i) for i in [0, n) on up to `threads` workers (the caller is one
/// of them). Work is handed out dynamically, so callers must write results
/// to per-index slots and reduce them afterwards in index order. The first
/// exception thrown by any fn is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace drpn::num
