#pragma once

namespace twistk {

/// Number of threads used by the data-parallel pointwise kernels.
void set_thread_count(int threads);
int thread_count();

}  // namespace twistk
