#pragma once

#include <filesystem>

#include "signal_sim.hpp"

namespace lsm {

/// Orthonormal temporal basis, T x B.
struct Subspace
{
  Mat basis;

  auto length() const -> Index { return basis.rows(); }
  auto rank() const -> Index { return basis.cols(); }
};

/// Which matrix the SVD is taken of. Raw weights each atom by its
/// pre-normalization energy; Normalized uses the unit-norm atoms.
enum class SubspaceWeighting
{
  Raw,
  Normalized
};

/// Top-B right singular vectors, largest-magnitude entry of each column positive.
auto FitSubspace(SignalDictionary const &dict, Index B, SubspaceWeighting w = SubspaceWeighting::Raw) -> Subspace;
auto FitSubspace(Mat const &signals, Index B) -> Subspace;

struct Projection
{
  CxVec coeffs;
  CxVec recon;
};
auto Project(Subspace const &sub, CxVec const &signal) -> Projection;

struct CompressionError
{
  Vec per_atom;
  double average = 0.0;
};
auto CompressionNrmse(Subspace const &sub, SignalDictionary const &dict) -> CompressionError;

void SaveSubspace(std::filesystem::path const &path, Subspace const &sub, io::Json const &meta = io::Json::object());
auto LoadSubspace(std::filesystem::path const &path) -> Subspace;

} // namespace lsm
