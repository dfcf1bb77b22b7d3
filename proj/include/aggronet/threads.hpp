#pragma once

namespace aggronet {

// Applies the AGGRONET_THREADS env var, if set, as a cap on the OpenMP worker
// count. Results never depend on the cap; it only bounds resource use.
void apply_thread_cap_from_env();

}  // namespace aggronet
