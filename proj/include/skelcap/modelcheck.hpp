#pragma once

#include <cstdint>

#include "skelcap/gradcheck.hpp"

namespace skelcap {

// Finite-difference checks of the full decoders at small dimensions, run in
// double precision.
struct ModelGradChecks {
  nn::GradCheckReport skel;
  nn::GradCheckReport skel_no_attention;
  nn::GradCheckReport attr;
  bool passed() const { return skel.passed && skel_no_attention.passed && attr.passed; }
};

ModelGradChecks check_model_gradients(std::uint64_t seed, const nn::GradCheckOptions& options = {});

}  // namespace skelcap
