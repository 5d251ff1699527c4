#pragma once

namespace pairnms {

// Thread-count control for the OpenMP kernels. No-ops in serial builds.
int max_threads();
void set_threads(int n);

}  // namespace pairnms
