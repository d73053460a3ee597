#pragma once

#include <omp.h>

namespace snseg::detail {

inline int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

}  // namespace snseg::detail
