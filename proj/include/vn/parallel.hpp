#pragma once

#include <cstddef>
#include <functional>

namespace vn {

/// Worker count used by kernels that split work over batch samples. Each
/// worker owns whole samples and partial results are combined in sample
/// order, so outputs do not depend on this value.
std::size_t num_threads();
void set_num_threads(std::size_t n);

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace vn
