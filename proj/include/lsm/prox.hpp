#pragma once

#include "types.hpp"

namespace lsm {

auto SoftThreshold(double v, double tau) -> double;
auto SoftThreshold(Cx v, double tau) -> Cx; // shrinks the magnitude

/// Soft-threshold the wavelet detail bands of each column (one image per
/// column); the coarse approximation band is left alone. Complex maps are
/// shrunk on coefficient magnitude.
auto WaveletProx(Mat const &maps, Grid g, Index levels, double tau) -> Mat;
auto WaveletProx(CxMat const &maps, Grid g, Index levels, double tau) -> CxMat;
/// Sum over columns of the l1 norm of the detail coefficients.
auto WaveletNorm(Mat const &maps, Grid g, Index levels) -> double;
auto WaveletNorm(CxMat const &maps, Grid g, Index levels) -> double;

/// Singular-value soft thresholding on (patch^2 x K) blocks of a V x K stack.
/// Edge blocks are truncated; shift offsets the block grid (periodic wrap).
auto LlrProx(CxMat const &maps, Grid g, double tau, Index patch, Index shift_m = 0, Index shift_n = 0) -> CxMat;
/// Sum of block nuclear norms for the same partition.
auto LlrNorm(CxMat const &maps, Grid g, Index patch) -> double;

} // namespace lsm
