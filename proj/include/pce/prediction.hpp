#pragma once

#include <array>

#include "pce/core_data.hpp"

namespace pce {

// A model verdict for one sample: the predicted class plus the class
// distribution it was derived from.  `valid` is false when no usable
// prediction exists (e.g. an unparseable LLM response); invalid predictions
// score as errors under every protocol.
struct Prediction {
  PceLabel label = PceLabel::Yes;
  std::array<double, kNumClasses> probs{1.0, 0.0, 0.0};
  bool valid = true;

  static Prediction from_probs(const std::array<double, kNumClasses>& p) {
    Prediction pred;
    pred.probs = p;
    int best = 0;
    for (int c = 1; c < kNumClasses; ++c)
      if (p[c] > p[best]) best = c;  // ties keep the lowest code
    pred.label = static_cast<PceLabel>(best);
    return pred;
  }

  static Prediction invalid() {
    Prediction pred;
    pred.valid = false;
    return pred;
  }
};

}  // namespace pce
