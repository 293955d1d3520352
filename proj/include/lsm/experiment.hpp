#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "phantom.hpp"
#include "solvers.hpp"

namespace lsm {

enum class MaskKind
{
  Shuffling,
  Random,
  Epti
};

auto ToString(MaskKind k) -> std::string;
auto ParseMaskKind(std::string const &s) -> MaskKind;

/// Which phase operator the reconstruction uses.
enum class PhaseSource
{
  None,
  True,     // the map used at synthesis
  Estimated // low-resolution estimate from the calibration scan
};

auto ToString(PhaseSource p) -> std::string;
auto ParsePhaseSource(std::string const &s) -> PhaseSource;

/// Everything needed to regenerate a synthetic acquisition. File fields, when
/// set, replace the corresponding generator. Seeds left at 0 derive from `seed`.
struct DatasetConfig
{
  Index M = 96, N = 96;
  SequenceSpec spec = SequenceSpec::FsePreset();
  std::uint64_t seed = 1;

  std::string phantom_file;
  std::uint64_t phantom_seed = 0;

  std::string coils_file;
  Index coils = 8;
  std::uint64_t coils_seed = 0;

  std::string mask_file;
  MaskKind mask = MaskKind::Shuffling;
  Index shots = 4;
  Index samples = 0; // random masks: total sampled lines
  std::uint64_t mask_seed = 0;

  std::string b0_file;
  double b0_peak_hz = 0.0; // 0 with no file: no off-resonance
  std::uint64_t b0_seed = 0;

  Index calib_lines = 0; // > 0: separate fully sampled low-resolution scan
  Index calib_echoes = 0;

  double noise_relative = 0.0; // sigma = noise_relative * max|y_clean|
  double noise_sigma = -1.0;   // >= 0 overrides the relative level
  std::uint64_t noise_seed = 0;

  void validate() const;
  auto derived_seed(std::uint64_t explicit_seed, std::uint64_t slot) const -> std::uint64_t;
};

auto ToJson(DatasetConfig const &c) -> io::Json;
auto DatasetConfigFromJson(io::Json const &j, std::filesystem::path const &base = {}) -> DatasetConfig;

struct Dataset
{
  DatasetConfig config;
  Phantom phantom;
  CxMat coils;
  SamplingMask mask;
  Vec b0; // Hz, empty when absent
  double sigma = 0.0;
  KSpaceData clean, y;
  CxMat truth;
  std::optional<KSpaceData> calib;
  std::vector<bool> region;

  auto grid() const -> Grid { return phantom.grid; }
};

auto BuildDataset(DatasetConfig const &c) -> Dataset;

/// Same acquisition with fresh noise (noise seed replaced).
auto Renoise(Dataset const &d, std::uint64_t noise_seed) -> KSpaceData;

auto MakeOperator(Dataset const &d, PhaseSource phase) -> EncodingOperator;

/// Experiment manifest: dataset, model references and recon settings. Paths
/// are resolved against the manifest's directory.
struct Manifest
{
  DatasetConfig data;
  std::string dictionary_file;
  std::optional<ParamGrid> dictionary_grid;
  std::string ae_file;
  std::string subspace_file;
  Index subspace_rank = 0;
  ReconConfig recon;
  PhaseSource phase = PhaseSource::True;
  bool region_support = true;
  std::string output;

  auto dictionary() const -> SignalDictionary;
  auto subspace() const -> Subspace;
  auto autoencoder() const -> AutoEncoder;
  /// T1 used by the EPG model: the first T1 of the dictionary grid.
  auto model_t1() const -> double;
};

enum class Method
{
  Linear,
  Latent,
  Epg
};

auto ToString(Method m) -> std::string;
auto ParseMethod(std::string const &s) -> Method;

/// One reconstruction setting. rank is the subspace size for linear recipes.
struct Recipe
{
  std::string name;
  Method method = Method::Latent;
  Index rank = 0;
  ReconConfig cfg;
};

auto ToJson(Recipe const &r) -> io::Json;
/// Keys: name, method, rank, plus any ReconConfig key (defaults from base).
auto RecipeFromJson(io::Json const &j, ReconConfig const &base = {}) -> Recipe;

/// Temporal models shared across recipes.
struct Models
{
  SequenceSpec spec;
  double t1 = 1000.0;
  std::optional<SignalDictionary> dict;
  std::optional<AutoEncoder> ae;
  std::vector<Subspace> subspaces; // any ranks; looked up by rank

  auto subspace(Index rank) const -> Subspace const &;
};

/// Loads what the recipes need: the autoencoder for latent, the subspace (file
/// or fitted from the dictionary) for linear.
auto LoadModels(Manifest const &m, std::vector<Recipe> const &recipes) -> Models;

struct ReconOutput
{
  CxMat images; // V x T
  std::vector<ObjectiveEntry> log;
  double seconds_per_iter = 0.0;
  double step = 0.0; // linear: step used
  CxMat alpha;
  LatentImage latent;
  EpgMaps epg;
};

auto RunRecipe(Recipe const &r, KSpaceData const &y, EncodingOperator const &op, Models const &models,
               std::optional<EpgMaps> const &epg_init = std::nullopt) -> ReconOutput;

auto ToJson(Manifest const &m) -> io::Json;
auto ManifestFromJson(io::Json const &j, std::filesystem::path const &base = {}) -> Manifest;
auto LoadManifest(std::filesystem::path const &path) -> Manifest;

} // namespace lsm
