#pragma once

#include <cstddef>
#include <string>

namespace cropmon {

// Selects the OpenMP kernel or its serial reference. Both run the same loop
// body over independent items, so results are bit-identical.
enum class Execution { serial, parallel };

int max_threads();

template <typename Body>
void for_each_index(std::size_t n, Execution exec, Body&& body) {
  const long long count = static_cast<long long>(n);
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  }
}

}  // namespace cropmon
