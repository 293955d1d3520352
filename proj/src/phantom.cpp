#include "lsm/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>

namespace lsm {

auto MixSeed(std::uint64_t base, std::uint64_t index) -> std::uint64_t
{
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

auto TissueTable(Tissue t) -> TissueValues
{
  switch (t) {
  case Tissue::WhiteMatter: return {800.0, 80.0, 50.0, 0.7};
  case Tissue::GreyMatter: return {1400.0, 110.0, 60.0, 0.8};
  case Tissue::Csf: return {3000.0, 400.0, 150.0, 1.0};
  case Tissue::Background: return {0.0, 0.0, 0.0, 0.0};
  }
  Fail("unknown tissue class");
}

auto Phantom::support() const -> std::vector<bool>
{
  std::vector<bool> s(static_cast<size_t>(grid.voxels()));
  for (Index v = 0; v < grid.voxels(); v++) {
    s[static_cast<size_t>(v)] = labels[v] != 0;
  }
  return s;
}

namespace {

auto Inside(double u, double w, double cu, double cw, double ru, double rw) -> bool
{
  double const a = (u - cu) / ru, b = (w - cw) / rw;
  return a * a + b * b <= 1.0;
}

} // namespace

auto MakePhantom(Index M, Index N, std::uint64_t seed) -> Phantom
{
  if (M < 32 || N < 32) { Fail("phantom must be at least 32x32 (got {}x{})", M, N); }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jit(-1.0, 1.0);
  double const j1 = 0.02 * jit(rng), j2 = 0.02 * jit(rng), j3 = 0.02 * jit(rng);
  double const ph[4] = {0.6 * jit(rng), 0.6 * jit(rng), 0.4 * jit(rng), 0.3 * jit(rng)};
  double const mod[3] = {0.05 * jit(rng), 0.05 * jit(rng), 0.05 * jit(rng)};

  Phantom p;
  p.grid = {M, N};
  Index const V = M * N;
  p.t1 = Vec::Zero(V);
  p.t2 = Vec::Zero(V);
  p.t2star = Vec::Zero(V);
  p.pd = CxVec::Zero(V);
  p.labels = Eigen::VectorXi::Zero(V);
  for (Index n = 0; n < N; n++) {
    for (Index m = 0; m < M; m++) {
      // u along readout, w along phase encode, both in [-1, 1).
      double const u = (static_cast<double>(m) - M / 2.0) / (M / 2.0);
      double const w = (static_cast<double>(n) - N / 2.0) / (N / 2.0);
      Tissue t = Tissue::Background;
      if (Inside(u, w, 0.0, 0.0, 0.88, 0.78)) {
        t = Tissue::Csf;
        if (Inside(u, w, 0.0, 0.0, 0.82, 0.72)) { t = Tissue::GreyMatter; }
        if (Inside(u, w, j1, 0.0, 0.68, 0.58)) { t = Tissue::WhiteMatter; }
        if (Inside(u, w, -0.3 + j2, 0.22, 0.12, 0.09) || Inside(u, w, -0.3 - j2, -0.22, 0.12, 0.09)) {
          t = Tissue::GreyMatter;
        }
        if (Inside(u, w, 0.05 + j3, 0.1, 0.3, 0.06) || Inside(u, w, 0.05 - j3, -0.1, 0.3, 0.06)) { t = Tissue::Csf; }
        if (Inside(u, w, 0.45, 0.0, 0.08, 0.05)) { t = Tissue::Csf; }
      }
      Index const v = m + M * n;
      p.labels[v] = static_cast<int>(t);
      if (t == Tissue::Background) { continue; }
      auto const tv = TissueTable(t);
      p.t1[v] = tv.t1;
      p.t2[v] = tv.t2;
      p.t2star[v] = tv.t2star;
      double const amp = tv.pd * (1.0 + mod[0] * u + mod[1] * w + mod[2] * u * w);
      double const phase = ph[0] * u + ph[1] * w + ph[2] * u * w + ph[3] * (u * u - w * w);
      p.pd[v] = std::polar(amp, phase);
    }
  }
  return p;
}

auto MakeCoils(Index M, Index N, Index C, std::uint64_t seed) -> CxMat
{
  if (C < 1) { Fail("coil count must be >= 1"); }
  Index const V = M * N;
  if (C == 1) { return CxMat::Ones(V, 1); }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(-1.0, 1.0);
  CxMat s(V, C);
  for (Index c = 0; c < C; c++) {
    double const ang = 2.0 * std::numbers::pi * (static_cast<double>(c) + 0.15 * u01(rng)) / static_cast<double>(C);
    double const cu = 1.1 * std::cos(ang), cw = 1.1 * std::sin(ang);
    double const width = 0.7 * (1.0 + 0.1 * u01(rng));
    double const p0 = std::numbers::pi * u01(rng), p1 = 0.8 * u01(rng), p2 = 0.8 * u01(rng), p3 = 0.3 * u01(rng);
    for (Index n = 0; n < N; n++) {
      for (Index m = 0; m < M; m++) {
        double const u = (static_cast<double>(m) - M / 2.0) / (M / 2.0);
        double const w = (static_cast<double>(n) - N / 2.0) / (N / 2.0);
        double const d2 = (u - cu) * (u - cu) + (w - cw) * (w - cw);
        double const mag = std::exp(-d2 / (2.0 * width * width));
        s(m + M * n, c) = std::polar(mag, p0 + p1 * u + p2 * w + p3 * u * w);
      }
    }
  }
  Vec const rss = s.rowwise().norm();
  return rss.cwiseInverse().asDiagonal() * s;
}

auto MakeB0Map(Index M, Index N, double peak_hz, std::uint64_t seed) -> Vec
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(-1.0, 1.0);
  double const a[5] = {0.3 * u01(rng), u01(rng), u01(rng), 0.7 * u01(rng), 0.7 * u01(rng)};
  Vec b(M * N);
  for (Index n = 0; n < N; n++) {
    for (Index m = 0; m < M; m++) {
      double const u = (static_cast<double>(m) - M / 2.0) / (M / 2.0);
      double const w = (static_cast<double>(n) - N / 2.0) / (N / 2.0);
      b[m + M * n] = a[0] + a[1] * u + a[2] * w + a[3] * u * w + a[4] * (u * u - w * w);
    }
  }
  double const mx = b.cwiseAbs().maxCoeff();
  return mx > 0.0 ? Vec(b * (peak_hz / mx)) : b;
}

namespace {

// Partial Fisher-Yates: k distinct values from [0, n), returned sorted.
auto Choose(Index n, Index k, std::mt19937_64 &rng) -> std::vector<Index>
{
  std::vector<Index> pool(static_cast<size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < k; i++) {
    std::uniform_int_distribution<Index> d(i, n - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(d(rng))]);
  }
  pool.resize(static_cast<size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

} // namespace

auto MakeMaskShuffling(Index n_pe, Index etl, Index shots, std::uint64_t seed) -> SamplingMask
{
  if (shots < 1 || shots > n_pe) { Fail("shots must be in [1, {}] (got {})", n_pe, shots); }
  if (etl < 1) { Fail("echo train length must be >= 1"); }
  std::mt19937_64 rng(seed);
  SamplingMask m;
  m.n_pe = n_pe;
  for (Index t = 0; t < etl; t++) {
    m.lines.push_back(Choose(n_pe, shots, rng));
  }
  return m;
}

auto MakeMaskRandom(Index n_pe, Index n_ro, Index etl, Index n_samples, std::uint64_t seed) -> SamplingMask
{
  if (n_ro < 1 || n_pe < 1 || etl < 1) { Fail("mask dimensions must be positive"); }
  if (n_samples < 0 || n_samples > n_pe * etl) { Fail("n_samples must be in [0, {}]", n_pe * etl); }
  std::mt19937_64 rng(seed);
  SamplingMask m;
  m.n_pe = n_pe;
  m.lines.resize(static_cast<size_t>(etl));
  for (Index p : Choose(n_pe * etl, n_samples, rng)) {
    m.lines[static_cast<size_t>(p / n_pe)].push_back(p % n_pe);
  }
  return m;
}

// Shot s owns the band [s*w, (s+1)*w) with w = n_pe / shots and walks it with
// a stride coprime to w close to the golden fraction of the band, so
// successive echoes land far apart and no line repeats within w echoes.
auto MakeMaskEpti(Index n_pe, Index etl, Index shots, std::uint64_t seed) -> SamplingMask
{
  if (shots < 1 || n_pe % shots != 0) { Fail("shots ({}) must divide the phase-encode count ({})", shots, n_pe); }
  if (etl < 1) { Fail("echo train length must be >= 1"); }
  Index const w = n_pe / shots;
  Index step = std::max<Index>(1, static_cast<Index>(std::lround(0.618 * static_cast<double>(w))));
  while (w > 1 && std::gcd(step, w) != 1) {
    step++;
  }
  Index const offset = static_cast<Index>(seed % static_cast<std::uint64_t>(w));
  SamplingMask m;
  m.n_pe = n_pe;
  for (Index t = 0; t < etl; t++) {
    std::vector<Index> l;
    for (Index s = 0; s < shots; s++) {
      l.push_back(s * w + (t * step + offset) % w);
    }
    std::sort(l.begin(), l.end());
    m.lines.push_back(std::move(l));
  }
  return m;
}

auto MakeMaskCalibration(Index n_pe, Index etl, Index n_lines, Index n_echoes) -> SamplingMask
{
  if (n_lines < 1 || n_lines > n_pe) { Fail("calibration lines must be in [1, {}]", n_pe); }
  if (n_echoes < 1 || n_echoes > etl) { Fail("calibration echoes must be in [1, {}]", etl); }
  SamplingMask m;
  m.n_pe = n_pe;
  m.lines.resize(static_cast<size_t>(etl));
  Index const start = n_pe / 2 - n_lines / 2;
  for (Index t = 0; t < n_echoes; t++) {
    for (Index k = 0; k < n_lines; k++) {
      m.lines[static_cast<size_t>(t)].push_back(start + k);
    }
  }
  return m;
}

void SavePhantom(std::filesystem::path const &path, Phantom const &ph, io::Json const &meta)
{
  Mat maps(ph.grid.voxels(), 6);
  maps << ph.t1, ph.t2, ph.t2star, ph.pd.real(), ph.pd.imag(), ph.labels.cast<double>();
  auto m = meta;
  m["kind"] = "phantom";
  m["channels"] = {"t1", "t2", "t2star", "pd_re", "pd_im", "label"};
  io::WriteMaps(path, ph.grid, maps, m);
}

auto LoadPhantom(std::filesystem::path const &path) -> Phantom
{
  auto r = io::ReadRealMaps(path);
  if (r.maps.cols() != 6) { Fail("{}: phantom file needs 6 channels, found {}", path.string(), r.maps.cols()); }
  Phantom ph;
  ph.grid = r.grid;
  ph.t1 = r.maps.col(0);
  ph.t2 = r.maps.col(1);
  ph.t2star = r.maps.col(2);
  ph.pd = r.maps.col(3).cast<Cx>() + Cx(0.0, 1.0) * r.maps.col(4).cast<Cx>();
  ph.labels = r.maps.col(5).array().round().cast<int>();
  for (Index v = 0; v < ph.grid.voxels(); v++) {
    if (ph.labels[v] < 0 || ph.labels[v] > 3) { Fail("{}: invalid tissue label {}", path.string(), ph.labels[v]); }
    if (ph.labels[v] != 0 && (ph.t1[v] <= 0.0 || ph.t2[v] <= 0.0 || ph.t2star[v] <= 0.0)) {
      Fail("{}: non-positive relaxation time inside the head", path.string());
    }
  }
  return ph;
}

auto SimulateTruth(Phantom const &ph, SequenceSpec const &spec) -> CxMat
{
  spec.validate();
  Index const V = ph.grid.voxels();
  CxMat x = CxMat::Zero(V, spec.etl);
  std::map<std::pair<double, double>, Vec> memo;
  for (Index v = 0; v < V; v++) {
    if (ph.labels[v] == 0) { continue; }
    double a = ph.t1[v], b = 0.0;
    switch (spec.kind) {
    case SequenceKind::FSE: b = ph.t2[v]; break;
    case SequenceKind::MPRAGE: b = 0.0; break;
    case SequenceKind::GE_EPTI:
      a = 0.0;
      b = ph.t2star[v];
      break;
    }
    auto it = memo.find({a, b});
    if (it == memo.end()) { it = memo.emplace(std::pair{a, b}, SimulateSignal(spec, ph.t1[v], b > 0.0 ? b : 1.0)).first; }
    x.row(v) = ph.pd[v] * it->second.transpose().cast<Cx>();
  }
  return x;
}

auto AddNoise(KSpaceData y, double sigma, std::uint64_t seed) -> KSpaceData
{
  if (sigma < 0.0) { Fail("noise sigma must be >= 0"); }
  y.noise_sigma = sigma;
  if (sigma == 0.0) { return y; }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma / std::numbers::sqrt2);
  for (auto &e : y.echoes) {
    for (Index j = 0; j < e.cols(); j++) {
      for (Index i = 0; i < e.rows(); i++) {
        double const re = n(rng);
        double const im = n(rng);
        e(i, j) += Cx(re, im);
      }
    }
  }
  return y;
}

auto SynthesizeKSpace(Phantom const &ph, SequenceSpec const &spec, CxMat const &coils, SamplingMask const &mask,
                      Vec const &b0map, double sigma, std::uint64_t seed) -> SynthResult
{
  if (mask.echoes() != spec.etl) { Fail("mask has {} echoes, sequence has {}", mask.echoes(), spec.etl); }
  CxMat phase;
  if (b0map.size() > 0) {
    if (b0map.size() != ph.grid.voxels()) { Fail("B0 map size does not match the phantom"); }
    phase = BuildPhase(b0map, spec);
  }
  EncodingOperator const op(ph.grid, coils, mask, phase);
  SynthResult r;
  r.truth = SimulateTruth(ph, spec);
  r.y = AddNoise(op.forward(r.truth), sigma, seed);
  return r;
}

} // namespace lsm
