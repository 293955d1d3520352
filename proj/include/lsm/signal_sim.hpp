#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dual.hpp"
#include "rawio.hpp"
#include "types.hpp"

namespace lsm {

enum class SequenceKind
{
  FSE,
  MPRAGE,
  GE_EPTI
};

/// Where the MPRAGE inversion time is measured to.
enum class TiReference
{
  FirstEcho, ///< inversion to the first readout pulse
  Center     ///< inversion to the centre echo of the train (etl/2)
};

/// Echo-train timing. Times are in ms, angles in degrees.
struct SequenceSpec
{
  SequenceKind kind = SequenceKind::FSE;
  Index etl = 1;
  double esp = 1.0;
  double refocus_deg = 180.0; // FSE
  double flip_deg = 8.0;      // MPRAGE
  double ti = 0.0;            // MPRAGE
  double tr = 0.0;            // MPRAGE
  double te0 = 0.0;           // GE_EPTI
  TiReference ti_reference = TiReference::FirstEcho;
  bool steady_state = true; // MPRAGE: false returns the first inversion block

  void validate() const;
  /// MPRAGE: time from inversion to the first readout pulse.
  auto first_echo_delay() const -> double;
  /// Echo time of echo n for GE_EPTI (te0 + n * esp).
  auto echo_time(Index n) const -> double { return te0 + static_cast<double>(n) * esp; }

  static auto FsePreset() -> SequenceSpec;
  static auto MpragePreset() -> SequenceSpec;
  static auto EptiPreset() -> SequenceSpec;
};

auto ToString(SequenceKind k) -> std::string;
auto ParseSequenceKind(std::string const &s) -> SequenceKind;

struct ParamGrid
{
  std::vector<double> t1_values;
  std::vector<double> t2_values; // T2 or T2* depending on the sequence

  void validate() const;
  auto size() const -> Index { return static_cast<Index>(t1_values.size() * t2_values.size()); }

  /// Inclusive arithmetic range lo, lo+step, ... <= hi (+1e-9 slack).
  static auto Range(double lo, double hi, double step) -> std::vector<double>;
};

/// Row i holds the unit-norm signal for grid point (t1[i / n2], t2[i % n2]).
struct SignalDictionary
{
  Mat atoms; // N_atoms x T
  Vec scales;
  ParamGrid grid;
  SequenceSpec spec;

  auto size() const -> Index { return atoms.rows(); }
  auto length() const -> Index { return atoms.cols(); }
  auto t1_of(Index i) const -> double;
  auto t2_of(Index i) const -> double;
  /// Pre-normalization signals (scales . atoms).
  auto raw() const -> Mat;
};

/// CPMG fast-spin-echo train from the extended phase graph: 90 deg about x,
/// refocusing about y, relaxation/recovery per half echo spacing and one
/// dephasing shift per half interval. Returns |F0| at each echo.
template <typename Real>
auto EpgFse(double t1, Real t2, SequenceSpec const &spec) -> std::vector<Real>;

auto EpgFseSignal(double t1, double t2, SequenceSpec const &spec) -> Vec;

/// Signal and d(signal)/dT2 via dual numbers through the recursion.
struct SignalDerivative
{
  Vec signal;
  Vec d_t2;
};
auto EpgFseDerivative(double t1, double t2, SequenceSpec const &spec) -> SignalDerivative;

struct MprageTrain
{
  Vec signal;
  Index blocks = 0;
  double mz_change = 0.0; // |dMz| at block start between the final two blocks
};

/// Inversion-prepared gradient-echo train (Bloch recursion on Mz).
auto MprageSimulate(double t1, SequenceSpec const &spec) -> MprageTrain;
auto MprageSignal(double t1, SequenceSpec const &spec) -> Vec;

auto GreDecay(double t2star, SequenceSpec const &spec) -> Vec;

/// Dispatch on spec.kind. t1 is ignored by GE_EPTI, t2 by MPRAGE.
auto SimulateSignal(SequenceSpec const &spec, double t1, double t2) -> Vec;

auto BuildDictionary(SequenceSpec const &spec, ParamGrid const &grid) -> SignalDictionary;

auto ToJson(SequenceSpec const &s) -> io::Json;
auto SequenceSpecFromJson(io::Json const &j) -> SequenceSpec;
auto ToJson(ParamGrid const &g) -> io::Json;
auto ParamGridFromJson(io::Json const &j) -> ParamGrid;

void SaveDictionary(std::filesystem::path const &path, SignalDictionary const &dict);
auto LoadDictionary(std::filesystem::path const &path) -> SignalDictionary;

} // namespace lsm
