#pragma once

#include "types.hpp"

namespace lsm {

/// Orthonormal separable 2-D Daubechies-4 (8-tap) transform with periodic
/// boundaries. Coefficients use the usual in-place pyramid layout: after
/// `levels` passes the coarse approximation occupies the top-left
/// (M >> levels) x (N >> levels) block.
auto Dwt2(Mat const &image, Index levels) -> Mat;
auto Idwt2(Mat const &coeffs, Index levels) -> Mat;

void CheckWaveletSize(Index M, Index N, Index levels);

} // namespace lsm
