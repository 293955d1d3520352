#pragma once

#include <filesystem>
#include <vector>

#include "latentnet.hpp"
#include "signal_sim.hpp"
#include "subspace.hpp"

namespace lsm {

/// Cartesian sampling with fully sampled readouts: the sorted phase-encode
/// lines acquired at each echo.
struct SamplingMask
{
  Index n_pe = 0;
  std::vector<std::vector<Index>> lines; // one list per echo

  auto echoes() const -> Index { return static_cast<Index>(lines.size()); }
  auto sampled_lines() const -> Index;
  auto acceleration() const -> double;
  auto contains(Index line, Index echo) const -> bool;
  /// n_pe x T matrix of 0/1.
  auto dense() const -> Mat;
  static auto FromDense(Mat const &pe_by_echo) -> SamplingMask;
  static auto Full(Index n_pe, Index etl) -> SamplingMask;
};

void SaveMask(std::filesystem::path const &path, SamplingMask const &mask, io::Json const &meta = io::Json::object());
auto LoadMask(std::filesystem::path const &path) -> SamplingMask;

/// Sampled k-space. Echo t holds an M x (C * n_t) block where column c + C*j
/// is coil c on the j-th sampled line of that echo.
struct KSpaceData
{
  Index M = 0, N = 0, C = 0;
  std::vector<std::vector<Index>> lines;
  std::vector<CxMat> echoes;
  double noise_sigma = 0.0;

  auto T() const -> Index { return static_cast<Index>(echoes.size()); }
  auto squaredNorm() const -> double;
  auto maxAbs() const -> double;
  auto dot(KSpaceData const &o) const -> Cx; // <this, o> = sum conj(this) * o
  void axpy(Cx a, KSpaceData const &x);      // this += a * x
  auto operator-(KSpaceData const &o) const -> KSpaceData;
  auto scaled(double s) const -> KSpaceData;
  auto sample(Index m, Index line, Index c, Index t) const -> Cx; // zero if not sampled
};

/// Dense [M, N, C, T] export with zeros at unsampled positions.
void SaveKSpace(std::filesystem::path const &path, KSpaceData const &y, io::Json const &meta = io::Json::object());
auto LoadKSpace(std::filesystem::path const &path, SamplingMask const &mask) -> KSpaceData;

/// Mask, coil sensitivities, optional per-echo phase and the centred unitary
/// 2-D DFT. Images are V x T (one column per echo).
class EncodingOperator
{
public:
  EncodingOperator(Grid grid, CxMat coils, SamplingMask mask, CxMat phase = {});

  auto grid() const -> Grid { return grid_; }
  auto coils() const -> Index { return coils_.cols(); }
  auto echoes() const -> Index { return mask_.echoes(); }
  auto mask() const -> SamplingMask const & { return mask_; }
  auto coil_maps() const -> CxMat const & { return coils_; }
  auto phase() const -> CxMat const & { return phase_; }
  auto has_phase() const -> bool { return phase_.size() > 0; }

  auto forward(CxMat const &x) const -> KSpaceData;
  auto adjoint(KSpaceData const &y) const -> CxMat;
  auto zeros() const -> KSpaceData;

private:
  Grid grid_;
  CxMat coils_; // V x C
  SamplingMask mask_;
  CxMat phase_;              // V x T or empty
  CxMat fm_;                 // M x M readout DFT
  std::vector<CxMat> rows_;  // per echo, DFT rows of the sampled lines (n_t x N)
};

/// Centred unitary DFT matrix: F[k, n] = exp(-2 pi i (k - N/2)(n - N/2) / N) / sqrt(N).
auto CenteredDft(Index n) -> CxMat;

// Temporal models. Coefficient images are V x B, latent maps V x L.

auto ExpandLinear(Subspace const &sub, CxMat const &alpha) -> CxMat;
auto CollapseLinear(Subspace const &sub, CxMat const &x) -> CxMat;

struct LatentImage
{
  Mat beta;  // V x L
  CxVec rho; // V
};

auto ExpandLatent(AutoEncoder const &ae, LatentImage const &img) -> CxMat;

struct LatentGradient
{
  Mat beta;
  CxVec rho;
};

/// Chain rule through x = rho * decode(beta). The cotangent g is the gradient
/// of a real loss with respect to x, written as dL/dRe(x) + i dL/dIm(x); the
/// returned gradients use the same convention for rho.
auto CollapseLatentCotangent(AutoEncoder const &ae, LatentImage const &img, CxMat const &g) -> LatentGradient;
/// Same, reusing a decoder linearization taken at img.beta.
auto CollapseLatentCotangent(AutoEncoder const &ae, DecoderLinearization const &lin, LatentImage const &img,
                             CxMat const &g) -> LatentGradient;

struct EpgSignals
{
  Mat signal; // V x T
  Mat d_t2;   // V x T, empty unless derivatives were requested
};

/// Per-voxel FSE trains for a T2 map, memoized on exact T2 value. With
/// normalize, each train is divided by its l2 norm (derivative included).
auto SimulateEpgMap(Vec const &t2map, SequenceSpec const &spec, double t1, bool derivative, bool normalize = false)
  -> EpgSignals;
auto ExpandEpg(Vec const &t2map, CxVec const &rho, SequenceSpec const &spec, double t1, bool normalize = false) -> CxMat;

/// H[v, t] = exp(+i 2 pi b0[v] (te0 + t esp) / 1000), b0 in Hz and times in ms.
auto BuildPhase(Vec const &b0map, SequenceSpec const &spec) -> CxMat;

} // namespace lsm
