#pragma once

#include <cstdint>

#include "encoding.hpp"

namespace lsm {

enum class Tissue : int
{
  Background = 0,
  WhiteMatter = 1,
  GreyMatter = 2,
  Csf = 3
};

struct TissueValues
{
  double t1, t2, t2star, pd;
};

/// Relaxation constants (ms) and nominal density per tissue class.
auto TissueTable(Tissue t) -> TissueValues;

struct Phantom
{
  Grid grid;
  Vec t1, t2, t2star; // ms, zero outside the head
  CxVec pd;
  Eigen::VectorXi labels;

  auto support() const -> std::vector<bool>;
};

/// Procedural brain-like phantom: elliptical head with a CSF rim, cortical
/// grey matter, white matter, deep grey nuclei and ventricles. The seed
/// jitters the structure slightly and sets the smooth density phase.
auto MakePhantom(Index M, Index N, std::uint64_t seed) -> Phantom;

/// [M, N, 6] real maps: t1, t2, t2star, Re pd, Im pd, label.
void SavePhantom(std::filesystem::path const &path, Phantom const &ph, io::Json const &meta = io::Json::object());
auto LoadPhantom(std::filesystem::path const &path) -> Phantom;

/// Smooth coil profiles normalized so sum_c |s_c|^2 = 1 at every voxel.
auto MakeCoils(Index M, Index N, Index C, std::uint64_t seed) -> CxMat;

/// Smooth off-resonance map in Hz, peak magnitude about peak_hz.
auto MakeB0Map(Index M, Index N, double peak_hz, std::uint64_t seed) -> Vec;

auto MakeMaskShuffling(Index n_pe, Index etl, Index shots, std::uint64_t seed) -> SamplingMask;
auto MakeMaskRandom(Index n_pe, Index n_ro, Index etl, Index n_samples, std::uint64_t seed) -> SamplingMask;
auto MakeMaskEpti(Index n_pe, Index etl, Index shots, std::uint64_t seed) -> SamplingMask;
/// Central n_lines phase encodes fully sampled on the first n_echoes echoes.
auto MakeMaskCalibration(Index n_pe, Index etl, Index n_lines, Index n_echoes) -> SamplingMask;

/// Noiseless echo images of the phantom for a sequence (V x T).
auto SimulateTruth(Phantom const &ph, SequenceSpec const &spec) -> CxMat;

/// Adds complex Gaussian noise (total variance sigma^2 per sample) to sampled entries.
auto AddNoise(KSpaceData y, double sigma, std::uint64_t seed) -> KSpaceData;

struct SynthResult
{
  KSpaceData y;
  CxMat truth;
};
auto SynthesizeKSpace(Phantom const &ph, SequenceSpec const &spec, CxMat const &coils, SamplingMask const &mask,
                      Vec const &b0map, double sigma, std::uint64_t seed) -> SynthResult;

/// splitmix64 of (base, index); used for per-instance seeds.
auto MixSeed(std::uint64_t base, std::uint64_t index) -> std::uint64_t;

} // namespace lsm
