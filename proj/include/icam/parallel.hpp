#pragma once

#include <cstddef>
#include <functional>

namespace icam {

/// ICAM_THREADS as a worker cap; 0 or unset means run sequentially.
std::size_t configured_threads();

/// Calls fn(i) for i in [0, n), on up to configured_threads() workers.
/// Callers write results into per-index slots so reductions can happen in
/// index order afterwards. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace icam
