#pragma once

#include <cstddef>
#include <functional>

namespace afb {

/// Worker cap for internal parallel loops. Defaults to AFB_THREADS or 1.
std::size_t num_threads();
void set_num_threads(std::size_t n);

/// Runs fn(i) for i in [0, n) across up to num_threads() workers. Each index
/// must write only its own outputs; results are then independent of the split.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace afb
