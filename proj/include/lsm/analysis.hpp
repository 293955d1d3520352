#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "solvers.hpp"

namespace lsm {

/// Magnitude NRMSE per echo over a region (empty region = every voxel).
struct EchoMetrics
{
  Vec per_echo;
  double average = 0.0;
  Mat error_map; // V x T, | |est| - |truth| |, empty unless requested
};

auto Nrmse(CxMat const &estimate, CxMat const &truth, std::vector<bool> const &region = {}, bool keep_map = false)
  -> EchoMetrics;

/// One reconstruction method run on each noisy instance. Returns echo images (V x T).
struct SweepRecipe
{
  std::string name;
  std::function<CxMat(KSpaceData const &)> run;
};

struct InstanceRecord
{
  std::string recipe;
  Index instance = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  Vec per_echo;
};

struct RecipeSummary
{
  std::string name;
  Vec mean, std; // per echo, over successful instances (std uses n - 1)
  Mat mean_error_map;
  Index completed = 0;
  Index failed = 0;
};

struct NoiseSweepResult
{
  std::vector<InstanceRecord> records;
  std::vector<RecipeSummary> summary;
};

/// Regenerates noise on clean data for each instance (seed MixSeed(seed, i)),
/// runs every recipe and aggregates. Solver exceptions are recorded, not
/// rethrown. `order` permutes evaluation only; results are stored by index.
auto NoiseSweep(KSpaceData const &clean, CxMat const &truth, double sigma, std::vector<SweepRecipe> const &recipes,
                Index n_instances, std::uint64_t seed, std::vector<bool> const &region = {},
                std::vector<Index> const &order = {}) -> NoiseSweepResult;

/// Mean and sample std per echo from per-instance records of one recipe.
auto AggregateRecords(std::vector<InstanceRecord> const &records, std::string const &recipe) -> RecipeSummary;

/// Nearest dictionary atom in latent space. Ties go to the lower T2, then the
/// lower atom index.
class LatentMatcher
{
public:
  LatentMatcher(AutoEncoder const &ae, SignalDictionary const &dict);

  auto match(Vec const &latent) const -> Index;
  auto match_t2(Vec const &latent) const -> double { return t2_[match(latent)]; }
  /// beta is V x L; returns a T2 map.
  auto match_map(Mat const &beta) const -> Vec;
  auto codes() const -> Mat const & { return codes_; }
  auto t2_values() const -> Vec const & { return t2_; }

private:
  Mat codes_; // L x atoms
  Vec t2_;
  std::vector<Index> sorted_; // scalar latents: atoms ordered by (code, t2, index)
};

/// Linear-scan reference for LatentMatcher.
auto MatchExhaustive(Mat const &codes, Vec const &t2, Vec const &latent) -> Index;

/// Per-voxel off-resonance (Hz) from calibration k-space: zero-padded low
/// resolution coil images on each echo with samples, then a magnitude-weighted
/// average of consecutive-echo phase differences, divided by 2 pi esp.
auto EstimateB0Lowres(KSpaceData const &calib, SequenceSpec const &spec) -> Vec;

/// Largest |b0| the estimator resolves without wrapping, in Hz.
auto B0AliasLimit(SequenceSpec const &spec) -> double;

struct AuditPoint
{
  Index iter = 0;
  double t2_grad = 0.0;
  double rho_grad = 0.0;
  double objective = 0.0;
};

/// For each saved latent iterate: match T2 in latent space, carry rho over
/// and evaluate the EPG objective's gradient norms there.
auto ProxyGradientAudit(std::vector<std::pair<Index, LatentImage>> const &trace, LatentMatcher const &matcher,
                        KSpaceData const &y, EncodingOperator const &op, SequenceSpec const &spec, double t1)
  -> std::vector<AuditPoint>;

} // namespace lsm
