#pragma once

#include <cstddef>
#include <functional>

namespace gatedgeom {

// Runs job(0..count-1) on up to `workers` threads; each index runs exactly
// once. Rethrows the first error after all threads have joined.
void for_each_parallel(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

}  // namespace gatedgeom
