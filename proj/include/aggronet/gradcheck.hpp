#pragma once

#include <cstdint>

#include "aggronet/layers.hpp"

namespace aggronet {

struct GradCheckReport {
    double max_rel_err = 0.0;
    int64_t checked = 0;
};

// Sample an input suited to the layer kind: relu inputs are resampled until
// every |x| > 1e-3, maxpool inputs are a shuffled even ladder so all pairwise
// gaps stay far above the finite-difference step. Everything else is
// uniform in [-1, 1].
TensorD gradcheck_input(LayerKind kind, const Shape& shape, SeededRng& rng);

// Central finite differences (step 1e-5) against the analytic backward pass,
// taken over the input and every parameter tensor. Double precision. The
// reported error is max over coordinates of
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradCheckReport gradient_check(const LayerT<double>& layer, const Shape& input_shape,
                               uint64_t seed);

// Same check for the two-input fusion junction.
GradCheckReport gradient_check_concat(const Shape& a_shape, int64_t b_channels, uint64_t seed);

}  // namespace aggronet
