#pragma once

#include "qlwave/model.hpp"

namespace qlwave::testing {

inline Profile bump(double center, double halfwidth, double amplitude = 1.0) {
    return Profile(make_bump_profile(center, halfwidth, amplitude));
}

/// f a bump filling [-1, 0], g = 0, sigma = 1.
inline InitialData left_bump_f() { return InitialData(bump(-0.5, 0.5), Profile::zero(), 1.0); }

/// f = 0, g a bump filling [-1, 0], sigma = 1.
inline InitialData left_bump_g() { return InitialData(Profile::zero(), bump(-0.5, 0.5), 1.0); }

}  // namespace qlwave::testing
