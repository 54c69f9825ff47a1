#pragma once

#include <cstddef>
#include <functional>

namespace nlpert {

/// Worker count used by the library; 0 selects std::thread::hardware_concurrency().
void set_thread_count(int n);
int thread_count();

/// Runs body(worker, index) for index in [0, n). Indices are handed out in order; results must
/// not depend on which worker ran an index.
void parallel_for(std::size_t n, const std::function<void(int worker, std::size_t index)>& body);

}  // namespace nlpert
