#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "encoding.hpp"

namespace lsm {

enum class Regularizer
{
  None,
  Wavelet,
  Llr
};

auto ToString(Regularizer r) -> std::string;
auto ParseRegularizer(std::string const &s) -> Regularizer;

struct ReconConfig
{
  Index iters = 100;
  double step = 0.0; // linear recon: 0 picks 1/L from power iteration
  double lambda = 0.0;
  Regularizer reg = Regularizer::None;
  Index wavelet_levels = 3;
  Index llr_patch = 8;
  bool llr_shift = false;
  std::uint64_t seed = 0;
  double lr_beta = 1e-2; // latent recon step sizes
  double lr_rho = 1e-2;
  bool clamp_latent = true; // keep beta inside the dictionary's latent code range
  double lr_final = 1.0;     // < 1: cosine decay of both step sizes to this fraction
  bool epg_normalize = true; // EPG model uses unit-norm trains so rho matches the latent model
  double t2_scale = 100.0;   // EPG recon optimizes T2 / t2_scale

  void validate() const;
};

auto ToJson(ReconConfig const &c) -> io::Json;
auto ReconConfigFromJson(io::Json const &j, ReconConfig base = {}) -> ReconConfig;

/// Objective terms in the solver's normalized data units.
struct ObjectiveEntry
{
  Index iter;
  double data;
  double reg;
};

/// Echo average of the adjoint where each phase-encode line is weighted by the
/// inverse of the number of echoes that sampled it.
auto DensityCompensatedAverage(EncodingOperator const &op, KSpaceData const &y) -> CxVec;

/// Largest eigenvalue of a Hermitian positive operator on V x K matrices.
auto PowerIteration(std::function<CxMat(CxMat const &)> const &normal, Index rows, Index cols, std::uint64_t seed,
                    Index max_iters = 50, double tol = 1e-6) -> double;

struct LinearResult
{
  CxMat alpha;
  std::vector<ObjectiveEntry> log;
  double step = 0.0;
  double data_scale = 1.0;
  double seconds_per_iter = 0.0;
};

/// FISTA with monotone restart on min ||y - A Phi alpha||^2 + lambda R(alpha).
auto ReconLinear(KSpaceData const &y, EncodingOperator const &op, Subspace const &sub, ReconConfig const &cfg)
  -> LinearResult;

struct LatentResult
{
  LatentImage img;
  std::vector<ObjectiveEntry> log;
  double data_scale = 1.0;
  double seconds_per_iter = 0.0;
};

using LatentObserver = std::function<void(Index iter, LatentImage const &img)>;

/// Adam on (beta, rho) for ||y - A (rho * decode(beta))||^2, with an optional
/// wavelet soft-threshold step per channel after each update.
auto ReconLatent(KSpaceData const &y, EncodingOperator const &op, AutoEncoder const &ae, ReconConfig const &cfg,
                 std::optional<LatentImage> const &init = std::nullopt, LatentObserver const &observer = {},
                 Index observe_every = 50) -> LatentResult;

struct EpgMaps
{
  Vec t2;
  CxVec rho;
};

struct EpgResult
{
  EpgMaps maps;
  std::vector<ObjectiveEntry> log;
  double data_scale = 1.0;
  double seconds_per_iter = 0.0;
};

/// Projected gradient descent with Armijo backtracking on
/// ||y - A (rho * G(T2))||^2, T2 clamped to [1, 2000] ms.
auto ReconEpg(KSpaceData const &y, EncodingOperator const &op, SequenceSpec const &spec, double t1,
              std::optional<EpgMaps> const &init, ReconConfig const &cfg) -> EpgResult;

struct EpgGradNorms
{
  double t2;  // ||dV/dT2||, per ms
  double rho; // ||dV/drho||
  double objective;
};

auto EvalEpgGradNorms(KSpaceData const &y, EncodingOperator const &op, SequenceSpec const &spec, double t1,
                      EpgMaps const &at, bool normalize = true) -> EpgGradNorms;

auto LogSpace(double lo, double hi, Index n) -> std::vector<double>;

struct SweepPoint
{
  double lambda;
  double score;
};

struct SweepResult
{
  std::vector<SweepPoint> points;
  Index best = 0;
};

/// Evaluates score(lambda) on each value and flags the minimum.
auto SweepLambda(std::vector<double> const &lambdas, std::function<double(double)> const &score) -> SweepResult;

} // namespace lsm
