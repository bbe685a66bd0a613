#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace evfqi {

/// Worker count used when a caller passes jobs <= 0.
int default_jobs();

/// Runs body(i) for i in [0, n) on up to `jobs` threads. Each index runs exactly
/// once; results must be written to per-index slots to stay deterministic.
/// The first exception thrown by any body is rethrown on the calling thread.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

/// SplitMix64 mixing of a master seed with a stream index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

}  // namespace evfqi
