#pragma once

#include <cstddef>
#include <functional>

namespace itdre {

/// Worker count used by parallel_for. 0 means hardware concurrency.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs body(i) for i in [0, count). Each index writes only its own slot, so
/// results do not depend on scheduling. The first exception thrown by any
/// index (lowest index wins) is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace itdre
