#include "cropmon/parallel.hpp"

#include <omp.h>

namespace cropmon {

int max_threads() { return omp_get_max_threads(); }

}  // namespace cropmon
