#include "lsm/signal_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lsm {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// EPG state split into real and imaginary parts. With refocusing about y the
// rotation matrix is real, so both parts evolve under the same real map and
// conjugation (F+0 = conj F-0) only flips the sign of the imaginary part.
template <typename Real>
struct EpgState
{
  std::vector<Real> fp_re, fp_im, fm_re, fm_im, z_re, z_im;

  explicit EpgState(size_t n)
    : fp_re(n)
    , fp_im(n)
    , fm_re(n)
    , fm_im(n)
    , z_re(n)
    , z_im(n)
  {
  }
};

template <typename Real>
void Relax(EpgState<Real> &s, Index kmax, Real const &e2, double e1)
{
  for (Index k = 0; k <= kmax; k++) {
    s.fp_re[k] = s.fp_re[k] * e2;
    s.fp_im[k] = s.fp_im[k] * e2;
    s.fm_re[k] = s.fm_re[k] * e2;
    s.fm_im[k] = s.fm_im[k] * e2;
    s.z_re[k] = s.z_re[k] * e1;
    s.z_im[k] = s.z_im[k] * e1;
  }
  s.z_re[0] = s.z_re[0] + (1.0 - e1);
}

// Dephasing by one order; kmax is the highest order kept after the shift.
template <typename Real>
void Shift(EpgState<Real> &s, Index kmax)
{
  for (Index k = kmax; k >= 1; k--) {
    s.fp_re[k] = s.fp_re[k - 1];
    s.fp_im[k] = s.fp_im[k - 1];
  }
  for (Index k = 0; k <= kmax; k++) {
    s.fm_re[k] = s.fm_re[k + 1];
    s.fm_im[k] = s.fm_im[k + 1];
  }
  s.fp_re[0] = s.fm_re[0];
  s.fp_im[0] = -s.fm_im[0];
}

template <typename Real>
void Refocus(std::vector<Real> &fp, std::vector<Real> &fm, std::vector<Real> &z, Index kmax, double alpha)
{
  double const c2 = std::pow(std::cos(alpha / 2), 2);
  double const s2 = std::pow(std::sin(alpha / 2), 2);
  double const sa = std::sin(alpha);
  double const ca = std::cos(alpha);
  for (Index k = 0; k <= kmax; k++) {
    Real const p = fp[k], m = fm[k], l = z[k];
    fp[k] = c2 * p - s2 * m + sa * l;
    fm[k] = -s2 * p + c2 * m + sa * l;
    z[k] = -0.5 * sa * p - 0.5 * sa * m + ca * l;
  }
}

auto MprageRecover(double mz, double t, double t1) -> double { return 1.0 - (1.0 - mz) * std::exp(-t / t1); }

} // namespace

void SequenceSpec::validate() const
{
  if (etl < 1) { Fail("echo train length must be >= 1 (got {})", etl); }
  if (!(esp > 0.0)) { Fail("echo spacing must be positive (got {})", esp); }
  switch (kind) {
  case SequenceKind::FSE:
    if (refocus_deg < 0.0 || refocus_deg > 180.0) { Fail("refocusing angle {} outside [0, 180]", refocus_deg); }
    break;
  case SequenceKind::MPRAGE: {
    if (flip_deg < 0.0 || flip_deg >= 90.0) { Fail("MPRAGE flip angle {} outside [0, 90)", flip_deg); }
    double const t0 = first_echo_delay();
    if (t0 < 0.0) { Fail("MPRAGE TI {} is shorter than half the echo train", ti); }
    if (t0 + static_cast<double>(etl) * esp > tr) {
      Fail("infeasible MPRAGE timing: readout ends at {} ms after inversion but TR is {} ms",
           t0 + static_cast<double>(etl) * esp, tr);
    }
  } break;
  case SequenceKind::GE_EPTI:
    if (te0 < 0.0) { Fail("first echo time must be >= 0 (got {})", te0); }
    break;
  }
}

auto SequenceSpec::first_echo_delay() const -> double
{
  if (ti_reference == TiReference::Center) { return ti - static_cast<double>(etl / 2) * esp; }
  return ti;
}

auto SequenceSpec::FsePreset() -> SequenceSpec
{
  SequenceSpec s;
  s.kind = SequenceKind::FSE;
  s.etl = 80;
  s.esp = 5.56;
  s.refocus_deg = 160.0;
  return s;
}

auto SequenceSpec::MpragePreset() -> SequenceSpec
{
  SequenceSpec s;
  s.kind = SequenceKind::MPRAGE;
  s.etl = 256;
  s.esp = 7.8;
  s.flip_deg = 8.0;
  s.ti = 1100.0;
  s.tr = 2500.0;
  s.ti_reference = TiReference::Center;
  return s;
}

auto SequenceSpec::EptiPreset() -> SequenceSpec
{
  SequenceSpec s;
  s.kind = SequenceKind::GE_EPTI;
  s.etl = 40;
  s.esp = 0.93;
  s.te0 = 5.0;
  return s;
}

auto ToString(SequenceKind k) -> std::string
{
  switch (k) {
  case SequenceKind::FSE: return "FSE";
  case SequenceKind::MPRAGE: return "MPRAGE";
  case SequenceKind::GE_EPTI: return "GE_EPTI";
  }
  return "?";
}

auto ParseSequenceKind(std::string const &s) -> SequenceKind
{
  if (s == "FSE") { return SequenceKind::FSE; }
  if (s == "MPRAGE") { return SequenceKind::MPRAGE; }
  if (s == "GE_EPTI") { return SequenceKind::GE_EPTI; }
  Fail("unknown sequence kind '{}'", s);
}

void ParamGrid::validate() const
{
  auto check = [](std::vector<double> const &v, char const *name) {
    if (v.empty()) { Fail("{} list is empty", name); }
    for (size_t i = 0; i < v.size(); i++) {
      if (!(v[i] > 0.0) || !std::isfinite(v[i])) { Fail("{}[{}] = {} is not positive", name, i, v[i]); }
      if (i > 0 && !(v[i] > v[i - 1])) { Fail("{} values are not strictly increasing at index {}", name, i); }
    }
  };
  check(t1_values, "t1");
  check(t2_values, "t2");
}

auto ParamGrid::Range(double lo, double hi, double step) -> std::vector<double>
{
  if (!(step > 0.0)) { Fail("grid step must be positive"); }
  std::vector<double> v;
  for (Index i = 0;; i++) {
    double const x = lo + static_cast<double>(i) * step;
    if (x > hi + 1e-9) { break; }
    v.push_back(x);
  }
  return v;
}

auto SignalDictionary::t1_of(Index i) const -> double
{
  return grid.t1_values[static_cast<size_t>(i) / grid.t2_values.size()];
}

auto SignalDictionary::t2_of(Index i) const -> double
{
  return grid.t2_values[static_cast<size_t>(i) % grid.t2_values.size()];
}

auto SignalDictionary::raw() const -> Mat { return scales.asDiagonal() * atoms; }

template <typename Real>
auto EpgFse(double t1, Real t2, SequenceSpec const &spec) -> std::vector<Real>
{
  if (spec.kind != SequenceKind::FSE) { Fail("EPG simulation requires an FSE sequence"); }
  spec.validate();
  if (!(t1 > 0.0) || !(Value(t2) > 0.0)) { Fail("relaxation times must be positive (T1={}, T2={})", t1, Value(t2)); }

  Index const nshift = 2 * spec.etl;
  EpgState<Real> s(static_cast<size_t>(nshift + 2));
  // 90 about x: F+0 = -i, F-0 = +i.
  s.fp_im[0] = Real(-1.0);
  s.fm_im[0] = Real(1.0);

  double const tau = spec.esp / 2.0;
  using std::exp;
  Real const e2 = exp(Real(-tau) / t2);
  double const e1 = std::exp(-tau / t1);
  double const alpha = spec.refocus_deg * kDeg;

  // Orders above the number of remaining shifts can never refocus to 0 and
  // orders above the number of shifts so far are empty, so the recursion
  // only touches k <= min(done, remaining).
  Index done = 0;
  auto kmax = [&](Index d) { return std::min(d, nshift - d); };

  std::vector<Real> out;
  out.reserve(static_cast<size_t>(spec.etl));
  using std::sqrt;
  for (Index n = 0; n < spec.etl; n++) {
    Relax(s, kmax(done), e2, e1);
    Shift(s, kmax(++done));
    Refocus(s.fp_re, s.fm_re, s.z_re, kmax(done), alpha);
    Refocus(s.fp_im, s.fm_im, s.z_im, kmax(done), alpha);
    Relax(s, kmax(done), e2, e1);
    Shift(s, kmax(++done));
    out.push_back(sqrt(s.fp_re[0] * s.fp_re[0] + s.fp_im[0] * s.fp_im[0]));
  }
  return out;
}

template auto EpgFse<double>(double, double, SequenceSpec const &) -> std::vector<double>;
template auto EpgFse<Dual>(double, Dual, SequenceSpec const &) -> std::vector<Dual>;

auto EpgFseSignal(double t1, double t2, SequenceSpec const &spec) -> Vec
{
  auto const v = EpgFse<double>(t1, t2, spec);
  return Eigen::Map<Vec const>(v.data(), static_cast<Index>(v.size()));
}

auto EpgFseDerivative(double t1, double t2, SequenceSpec const &spec) -> SignalDerivative
{
  auto const v = EpgFse<Dual>(t1, Dual::Variable(t2), spec);
  SignalDerivative r{Vec(static_cast<Index>(v.size())), Vec(static_cast<Index>(v.size()))};
  for (size_t i = 0; i < v.size(); i++) {
    r.signal[static_cast<Index>(i)] = v[i].v;
    r.d_t2[static_cast<Index>(i)] = v[i].d;
  }
  return r;
}

auto MprageSimulate(double t1, SequenceSpec const &spec) -> MprageTrain
{
  if (spec.kind != SequenceKind::MPRAGE) { Fail("MPRAGE simulation requires an MPRAGE sequence"); }
  spec.validate();
  if (!(t1 > 0.0)) { Fail("T1 must be positive (got {})", t1); }

  constexpr Index kMaxBlocks = 50;
  constexpr double kTol = 1e-10;
  double const flip = spec.flip_deg * kDeg;
  double const sf = std::sin(flip), cf = std::cos(flip);
  double const t0 = spec.first_echo_delay();
  double const rest = spec.tr - t0 - static_cast<double>(spec.etl) * spec.esp;

  MprageTrain train;
  train.signal.resize(spec.etl);
  double start = 1.0;
  Index const blocks = spec.steady_state ? kMaxBlocks : 1;
  for (Index b = 0; b < blocks; b++) {
    double mz = MprageRecover(-start, t0, t1);
    for (Index n = 0; n < spec.etl; n++) {
      train.signal[n] = sf * mz;
      mz = MprageRecover(mz * cf, spec.esp, t1);
    }
    mz = MprageRecover(mz, rest, t1);
    train.blocks = b + 1;
    train.mz_change = std::abs(mz - start);
    start = mz;
    if (train.mz_change < kTol) { break; }
  }
  return train;
}

auto MprageSignal(double t1, SequenceSpec const &spec) -> Vec { return MprageSimulate(t1, spec).signal; }

auto GreDecay(double t2star, SequenceSpec const &spec) -> Vec
{
  if (spec.kind != SequenceKind::GE_EPTI) { Fail("gradient-echo decay requires a GE_EPTI sequence"); }
  spec.validate();
  if (!(t2star > 0.0)) { Fail("T2* must be positive (got {})", t2star); }
  Vec s(spec.etl);
  for (Index n = 0; n < spec.etl; n++) {
    s[n] = std::exp(-spec.echo_time(n) / t2star);
  }
  return s;
}

auto SimulateSignal(SequenceSpec const &spec, double t1, double t2) -> Vec
{
  switch (spec.kind) {
  case SequenceKind::FSE: return EpgFseSignal(t1, t2, spec);
  case SequenceKind::MPRAGE: return MprageSignal(t1, spec);
  case SequenceKind::GE_EPTI: return GreDecay(t2, spec);
  }
  Fail("unhandled sequence kind");
}

auto BuildDictionary(SequenceSpec const &spec, ParamGrid const &grid) -> SignalDictionary
{
  spec.validate();
  grid.validate();
  SignalDictionary d;
  d.spec = spec;
  d.grid = grid;
  Index const n = grid.size();
  d.atoms.resize(n, spec.etl);
  d.scales.resize(n);
  for (Index i = 0; i < n; i++) {
    double const t1 = d.t1_of(i), t2 = d.t2_of(i);
    Vec s;
    try {
      s = SimulateSignal(spec, t1, t2);
    } catch (Error const &e) {
      Fail("atom {} (T1={}, T2={}): {}", i, t1, t2, e.what());
    }
    double const norm = s.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      Fail("atom {} (T1={}, T2={}) has zero or non-finite norm", i, t1, t2);
    }
    d.scales[i] = norm;
    d.atoms.row(i) = s.transpose() / norm;
  }
  return d;
}

auto ToJson(SequenceSpec const &s) -> io::Json
{
  io::Json j{{"kind", ToString(s.kind)}, {"etl", s.etl}, {"esp", s.esp}};
  switch (s.kind) {
  case SequenceKind::FSE: j["refocus_deg"] = s.refocus_deg; break;
  case SequenceKind::MPRAGE:
    j["flip_deg"] = s.flip_deg;
    j["ti"] = s.ti;
    j["tr"] = s.tr;
    j["ti_reference"] = s.ti_reference == TiReference::Center ? "center" : "first_echo";
    j["steady_state"] = s.steady_state;
    break;
  case SequenceKind::GE_EPTI: j["te0"] = s.te0; break;
  }
  return j;
}

auto SequenceSpecFromJson(io::Json const &j) -> SequenceSpec
{
  SequenceSpec s;
  if (j.contains("preset")) {
    auto const p = j["preset"].get<std::string>();
    if (p == "fse") {
      s = SequenceSpec::FsePreset();
    } else if (p == "mprage") {
      s = SequenceSpec::MpragePreset();
    } else if (p == "epti") {
      s = SequenceSpec::EptiPreset();
    } else {
      Fail("unknown sequence preset '{}'", p);
    }
  }
  if (j.contains("kind")) { s.kind = ParseSequenceKind(j["kind"].get<std::string>()); }
  s.etl = j.value("etl", s.etl);
  s.esp = j.value("esp", s.esp);
  s.refocus_deg = j.value("refocus_deg", s.refocus_deg);
  s.flip_deg = j.value("flip_deg", s.flip_deg);
  s.ti = j.value("ti", s.ti);
  s.tr = j.value("tr", s.tr);
  s.te0 = j.value("te0", s.te0);
  s.steady_state = j.value("steady_state", s.steady_state);
  if (j.contains("ti_reference")) {
    auto const r = j["ti_reference"].get<std::string>();
    if (r == "center") {
      s.ti_reference = TiReference::Center;
    } else if (r == "first_echo") {
      s.ti_reference = TiReference::FirstEcho;
    } else {
      Fail("unknown ti_reference '{}'", r);
    }
  }
  s.validate();
  return s;
}

auto ToJson(ParamGrid const &g) -> io::Json { return {{"t1", g.t1_values}, {"t2", g.t2_values}}; }

auto ParamGridFromJson(io::Json const &j) -> ParamGrid
{
  // Each axis is either an explicit list or {"lo", "hi", "step"}.
  auto axis = [&](char const *key) -> std::vector<double> {
    if (!j.contains(key)) { Fail("grid is missing '{}'", key); }
    auto const &a = j[key];
    if (a.is_array()) { return a.get<std::vector<double>>(); }
    if (a.is_number()) { return {a.get<double>()}; }
    return ParamGrid::Range(a.at("lo").get<double>(), a.at("hi").get<double>(), a.at("step").get<double>());
  };
  ParamGrid g{axis("t1"), axis("t2")};
  g.validate();
  return g;
}

void SaveDictionary(std::filesystem::path const &path, SignalDictionary const &dict)
{
  // Row-major on disk.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> const rm = dict.atoms;
  io::Json meta{{"grid", ToJson(dict.grid)},
                {"spec", ToJson(dict.spec)},
                {"scales", std::vector<double>(dict.scales.data(), dict.scales.data() + dict.scales.size())}};
  io::WriteReal(path, {dict.size(), dict.length()}, {rm.data(), static_cast<size_t>(rm.size())}, meta);
}

auto LoadDictionary(std::filesystem::path const &path) -> SignalDictionary
{
  auto const a = io::ReadReal(path);
  if (a.shape.size() != 2) { Fail("{}: dictionary must be 2-D", path.string()); }
  SignalDictionary d;
  d.grid = ParamGridFromJson(a.meta.at("grid"));
  d.spec = SequenceSpecFromJson(a.meta.at("spec"));
  d.atoms = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> const>(
    a.data.data(), a.shape[0], a.shape[1]);
  auto const sc = a.meta.at("scales").get<std::vector<double>>();
  d.scales = Eigen::Map<Vec const>(sc.data(), static_cast<Index>(sc.size()));
  if (d.scales.size() != d.size() || d.grid.size() != d.size() || d.length() != d.spec.etl) {
    Fail("{}: dictionary shape disagrees with its grid/spec/scales", path.string());
  }
  return d;
}

} // namespace lsm
