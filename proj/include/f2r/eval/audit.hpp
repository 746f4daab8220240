#pragma once

#include "f2r/train/trainer.hpp"

namespace f2r {

// Builds the stage-1 view of `window`, then rebuilds it `trials` times
// with the center frame replaced by random content and returns the
// largest absolute output deviation. Flows are held at the base window's
// fields: they are frozen-prior conditioning, not network input (the
// ground_truth variant never reads frame content anyway). A correct
// implementation returns exactly 0.
double blindness_audit(const ModelState& blind_state, const TemporalWindow& window,
                       const PriorSet& priors, int trials, uint64_t seed = 0x5eed);

// TrainConfig view matching a stored state (window, arch, input type).
TrainConfig config_for_state(const ModelState& st);

}  // namespace f2r
