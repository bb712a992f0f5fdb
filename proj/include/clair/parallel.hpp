#pragma once

#include <cstddef>
#include <functional>

namespace clair {

/// Calls body(i) for i in [0, n) split into contiguous chunks over `threads`
/// workers. Bodies must write disjoint outputs; results then do not depend on
/// the thread count.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body);

} // namespace clair
