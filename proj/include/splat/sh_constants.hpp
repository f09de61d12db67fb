#pragma once

#include <array>

namespace splat {

// Real spherical harmonics (Condon-Shortley phase), orders m = -l..l.
inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.48860251190291992;
inline constexpr std::array<double, 5> kShC2{1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                             -1.0925484305920792, 0.54627421529603959};
inline constexpr std::array<double, 7> kShC3{-0.59004358992664352, 2.8906114426405538, -0.45704579946446572,
                                             0.37317633259011546, -0.45704579946446572, 1.4453057213202769,
                                             -0.59004358992664352};

} // namespace splat
