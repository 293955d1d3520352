#include "lsm/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace lsm {

auto SamplingMask::sampled_lines() const -> Index
{
  Index n = 0;
  for (auto const &l : lines) {
    n += static_cast<Index>(l.size());
  }
  return n;
}

auto SamplingMask::acceleration() const -> double
{
  Index const n = sampled_lines();
  return n == 0 ? std::numeric_limits<double>::infinity()
                : static_cast<double>(n_pe * echoes()) / static_cast<double>(n);
}

auto SamplingMask::contains(Index line, Index echo) const -> bool
{
  auto const &l = lines[static_cast<size_t>(echo)];
  return std::binary_search(l.begin(), l.end(), line);
}

auto SamplingMask::dense() const -> Mat
{
  Mat d = Mat::Zero(n_pe, echoes());
  for (Index t = 0; t < echoes(); t++) {
    for (Index k : lines[static_cast<size_t>(t)]) {
      d(k, t) = 1.0;
    }
  }
  return d;
}

auto SamplingMask::FromDense(Mat const &pe_by_echo) -> SamplingMask
{
  SamplingMask m;
  m.n_pe = pe_by_echo.rows();
  m.lines.resize(static_cast<size_t>(pe_by_echo.cols()));
  for (Index t = 0; t < pe_by_echo.cols(); t++) {
    for (Index k = 0; k < m.n_pe; k++) {
      double const v = pe_by_echo(k, t);
      if (v == 1.0) {
        m.lines[static_cast<size_t>(t)].push_back(k);
      } else if (v != 0.0) {
        Fail("mask entry ({}, {}) = {} is not 0 or 1", k, t, v);
      }
    }
  }
  return m;
}

auto SamplingMask::Full(Index n_pe, Index etl) -> SamplingMask
{
  SamplingMask m;
  m.n_pe = n_pe;
  std::vector<Index> all(static_cast<size_t>(n_pe));
  for (Index k = 0; k < n_pe; k++) {
    all[static_cast<size_t>(k)] = k;
  }
  m.lines.assign(static_cast<size_t>(etl), all);
  return m;
}

void SaveMask(std::filesystem::path const &path, SamplingMask const &mask, io::Json const &meta)
{
  Eigen::Matrix<double, -1, -1, Eigen::RowMajor> const d = mask.dense();
  io::Json m = meta;
  m["layout"] = "phase_encode x echo, readout fully sampled";
  m["sampled_lines"] = mask.sampled_lines();
  io::WriteReal(path, {d.rows(), d.cols()}, {d.data(), static_cast<size_t>(d.size())}, m);
}

auto LoadMask(std::filesystem::path const &path) -> SamplingMask
{
  auto const a = io::ReadReal(path);
  if (a.shape.size() != 2) { Fail("{}: mask must have shape [N_pe, T]", path.string()); }
  Mat const d = Eigen::Map<Eigen::Matrix<double, -1, -1, Eigen::RowMajor> const>(a.data.data(), a.shape[0], a.shape[1]);
  return SamplingMask::FromDense(d);
}

auto KSpaceData::squaredNorm() const -> double
{
  double s = 0.0;
  for (auto const &e : echoes) {
    s += e.squaredNorm();
  }
  return s;
}

auto KSpaceData::maxAbs() const -> double
{
  double s = 0.0;
  for (auto const &e : echoes) {
    if (e.size() > 0) { s = std::max(s, e.cwiseAbs().maxCoeff()); }
  }
  return s;
}

auto KSpaceData::dot(KSpaceData const &o) const -> Cx
{
  Cx s = 0.0;
  for (size_t t = 0; t < echoes.size(); t++) {
    s += echoes[t].cwiseProduct(o.echoes[t].conjugate()).sum();
  }
  return std::conj(s);
}

void KSpaceData::axpy(Cx a, KSpaceData const &x)
{
  for (size_t t = 0; t < echoes.size(); t++) {
    echoes[t] += a * x.echoes[t];
  }
}

auto KSpaceData::operator-(KSpaceData const &o) const -> KSpaceData
{
  KSpaceData r = *this;
  r.axpy(-1.0, o);
  return r;
}

auto KSpaceData::scaled(double s) const -> KSpaceData
{
  KSpaceData r = *this;
  for (auto &e : r.echoes) {
    e *= s;
  }
  r.noise_sigma *= s;
  return r;
}

auto KSpaceData::sample(Index m, Index line, Index c, Index t) const -> Cx
{
  auto const &l = lines[static_cast<size_t>(t)];
  auto it = std::lower_bound(l.begin(), l.end(), line);
  if (it == l.end() || *it != line) { return 0.0; }
  Index const j = it - l.begin();
  return echoes[static_cast<size_t>(t)](m, c + C * j);
}

void SaveKSpace(std::filesystem::path const &path, KSpaceData const &y, io::Json const &meta)
{
  Index const T = y.T();
  std::vector<Cx> d(static_cast<size_t>(y.M * y.N * y.C * T), Cx(0.0));
  for (Index t = 0; t < T; t++) {
    auto const &l = y.lines[static_cast<size_t>(t)];
    for (size_t j = 0; j < l.size(); j++) {
      for (Index c = 0; c < y.C; c++) {
        for (Index m = 0; m < y.M; m++) {
          d[static_cast<size_t>(((m * y.N + l[j]) * y.C + c) * T + t)] =
            y.echoes[static_cast<size_t>(t)](m, c + y.C * static_cast<Index>(j));
        }
      }
    }
  }
  io::Json m = meta;
  m["noise_sigma"] = y.noise_sigma;
  io::WriteComplex(path, {y.M, y.N, y.C, T}, d, m);
}

auto LoadKSpace(std::filesystem::path const &path, SamplingMask const &mask) -> KSpaceData
{
  auto const a = io::ReadComplex(path);
  if (a.shape.size() != 4) { Fail("{}: k-space must have shape [M, N, C, T]", path.string()); }
  KSpaceData y;
  y.M = a.shape[0];
  y.N = a.shape[1];
  y.C = a.shape[2];
  Index const T = a.shape[3];
  if (mask.n_pe != y.N || mask.echoes() != T) { Fail("{}: k-space shape disagrees with the mask", path.string()); }
  y.noise_sigma = a.meta.value("noise_sigma", 0.0);
  y.lines = mask.lines;
  y.echoes.resize(static_cast<size_t>(T));
  for (Index t = 0; t < T; t++) {
    auto const &l = mask.lines[static_cast<size_t>(t)];
    auto &e = y.echoes[static_cast<size_t>(t)];
    e.resize(y.M, y.C * static_cast<Index>(l.size()));
    size_t j = 0;
    for (Index n = 0; n < y.N; n++) {
      bool const on = j < l.size() && l[j] == n;
      for (Index c = 0; c < y.C; c++) {
        for (Index m = 0; m < y.M; m++) {
          Cx const v = a.data[static_cast<size_t>(((m * y.N + n) * y.C + c) * T + t)];
          if (on) {
            e(m, c + y.C * static_cast<Index>(j)) = v;
          } else if (v != Cx(0.0)) {
            Fail("{}: nonzero sample at unsampled position (m={}, n={}, c={}, t={})", path.string(), m, n, c, t);
          }
        }
      }
      if (on) { j++; }
    }
  }
  return y;
}

auto CenteredDft(Index n) -> CxMat
{
  CxMat F(n, n);
  double const h = static_cast<double>(n / 2);
  double const scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < n; j++) {
    for (Index k = 0; k < n; k++) {
      // Reduce the exponent modulo n before the trig call to keep it exact-ish.
      double const p = std::fmod((static_cast<double>(k) - h) * (static_cast<double>(j) - h), static_cast<double>(n));
      double const ang = -2.0 * std::numbers::pi * p / static_cast<double>(n);
      F(k, j) = std::polar(scale, ang);
    }
  }
  return F;
}

EncodingOperator::EncodingOperator(Grid grid, CxMat coils, SamplingMask mask, CxMat phase)
  : grid_{grid}
  , coils_{std::move(coils)}
  , mask_{std::move(mask)}
  , phase_{std::move(phase)}
{
  if (grid_.M < 1 || grid_.N < 1) { Fail("empty image grid"); }
  if (coils_.rows() != grid_.voxels() || coils_.cols() < 1) {
    Fail("coil maps are {}x{}, expected {} voxels x C", coils_.rows(), coils_.cols(), grid_.voxels());
  }
  if (!coils_.allFinite()) { Fail("coil maps contain non-finite values"); }
  if (mask_.n_pe != grid_.N) { Fail("mask has {} phase-encode lines, image has {}", mask_.n_pe, grid_.N); }
  if (mask_.echoes() < 1) { Fail("mask has no echoes"); }
  for (auto const &l : mask_.lines) {
    if (!std::is_sorted(l.begin(), l.end()) || std::adjacent_find(l.begin(), l.end()) != l.end()) {
      Fail("mask lines must be sorted and unique");
    }
    if (!l.empty() && (l.front() < 0 || l.back() >= grid_.N)) { Fail("mask line outside [0, {})", grid_.N); }
  }
  if (has_phase()) {
    if (phase_.rows() != grid_.voxels() || phase_.cols() != mask_.echoes()) {
      Fail("phase is {}x{}, expected {}x{}", phase_.rows(), phase_.cols(), grid_.voxels(), mask_.echoes());
    }
    if (((phase_.cwiseAbs().array() - 1.0).abs() > 1e-9).any()) { Fail("phase must have unit magnitude"); }
  }
  fm_ = CenteredDft(grid_.M);
  CxMat const fn = CenteredDft(grid_.N);
  rows_.resize(mask_.lines.size());
  for (size_t t = 0; t < mask_.lines.size(); t++) {
    auto const &l = mask_.lines[t];
    rows_[t].resize(static_cast<Index>(l.size()), grid_.N);
    for (size_t j = 0; j < l.size(); j++) {
      rows_[t].row(static_cast<Index>(j)) = fn.row(l[j]);
    }
  }
}

auto EncodingOperator::zeros() const -> KSpaceData
{
  KSpaceData y;
  y.M = grid_.M;
  y.N = grid_.N;
  y.C = coils();
  y.lines = mask_.lines;
  for (auto const &l : mask_.lines) {
    y.echoes.push_back(CxMat::Zero(grid_.M, coils() * static_cast<Index>(l.size())));
  }
  return y;
}

// Per echo: weight by phase and coils into an (M*C) x N stack, keep only the
// sampled phase-encode rows of the DFT, then transform along readout.
auto EncodingOperator::forward(CxMat const &x) const -> KSpaceData
{
  Index const M = grid_.M, N = grid_.N, C = coils();
  if (x.rows() != grid_.voxels() || x.cols() != echoes()) {
    Fail("image is {}x{}, operator expects {}x{}", x.rows(), x.cols(), grid_.voxels(), echoes());
  }
  KSpaceData y = zeros();
  CxMat Z(M * C, N);
  CxVec xt(grid_.voxels());
  for (Index t = 0; t < echoes(); t++) {
    Index const nt = rows_[static_cast<size_t>(t)].rows();
    if (nt == 0) { continue; }
    xt = x.col(t);
    if (has_phase()) { xt.array() *= phase_.col(t).array(); }
    for (Index n = 0; n < N; n++) {
      for (Index c = 0; c < C; c++) {
        Z.block(M * c, n, M, 1) = coils_.col(c).segment(M * n, M).cwiseProduct(xt.segment(M * n, M));
      }
    }
    CxMat const G = Z * rows_[static_cast<size_t>(t)].transpose();
    y.echoes[static_cast<size_t>(t)].noalias() = fm_ * Eigen::Map<CxMat const>(G.data(), M, C * nt);
  }
  return y;
}

auto EncodingOperator::adjoint(KSpaceData const &y) const -> CxMat
{
  Index const M = grid_.M, N = grid_.N, C = coils();
  if (y.M != M || y.N != N || y.C != C || y.T() != echoes()) { Fail("k-space dimensions do not match the operator"); }
  CxMat x = CxMat::Zero(grid_.voxels(), echoes());
  for (Index t = 0; t < echoes(); t++) {
    Index const nt = rows_[static_cast<size_t>(t)].rows();
    if (nt == 0) { continue; }
    auto const &e = y.echoes[static_cast<size_t>(t)];
    if (e.rows() != M || e.cols() != C * nt) { Fail("k-space echo {} has the wrong sample count", t); }
    CxMat const G = fm_.adjoint() * e;
    CxMat const Z = Eigen::Map<CxMat const>(G.data(), M * C, nt) * rows_[static_cast<size_t>(t)].conjugate();
    for (Index n = 0; n < N; n++) {
      auto seg = x.col(t).segment(M * n, M);
      for (Index c = 0; c < C; c++) {
        seg += coils_.col(c).segment(M * n, M).conjugate().cwiseProduct(Z.block(M * c, n, M, 1));
      }
    }
    if (has_phase()) { x.col(t).array() *= phase_.col(t).array().conjugate(); }
  }
  return x;
}

auto ExpandLinear(Subspace const &sub, CxMat const &alpha) -> CxMat
{
  if (alpha.cols() != sub.rank()) { Fail("coefficient maps have {} channels, subspace has {}", alpha.cols(), sub.rank()); }
  return alpha * sub.basis.transpose().cast<Cx>();
}

auto CollapseLinear(Subspace const &sub, CxMat const &x) -> CxMat
{
  if (x.cols() != sub.length()) { Fail("image has {} echoes, subspace has {}", x.cols(), sub.length()); }
  return x * sub.basis.cast<Cx>();
}

auto ExpandLatent(AutoEncoder const &ae, LatentImage const &img) -> CxMat
{
  if (img.beta.cols() != ae.latent()) { Fail("latent maps have {} channels, network has {}", img.beta.cols(), ae.latent()); }
  if (img.rho.size() != img.beta.rows()) { Fail("rho and beta voxel counts differ"); }
  Mat const d = DecodeBatch(ae, img.beta.transpose());
  return img.rho.asDiagonal() * d.transpose().cast<Cx>();
}

auto CollapseLatentCotangent(AutoEncoder const &ae, DecoderLinearization const &lin, LatentImage const &img,
                             CxMat const &g) -> LatentGradient
{
  if (g.rows() != img.beta.rows() || g.cols() != ae.length() || lin.output.cols() != g.rows()) {
    Fail("cotangent shape mismatch");
  }
  LatentGradient out;
  out.rho = g.cwiseProduct(lin.output.transpose().cast<Cx>()).rowwise().sum();
  Mat const cot = (img.rho.conjugate().asDiagonal() * g).real().transpose();
  out.beta = DecoderVjp(ae, lin, cot).transpose();
  return out;
}

auto CollapseLatentCotangent(AutoEncoder const &ae, LatentImage const &img, CxMat const &g) -> LatentGradient
{
  if (img.beta.cols() != ae.latent()) { Fail("latent maps have {} channels, network has {}", img.beta.cols(), ae.latent()); }
  return CollapseLatentCotangent(ae, LinearizeDecoder(ae, img.beta.transpose()), img, g);
}

auto SimulateEpgMap(Vec const &t2map, SequenceSpec const &spec, double t1, bool derivative, bool normalize) -> EpgSignals
{
  Index const V = t2map.size(), T = spec.etl;
  std::map<double, Index> memo;
  Mat uniq_s, uniq_d;
  std::vector<Index> which(static_cast<size_t>(V));
  for (Index v = 0; v < V; v++) {
    if (!(t2map[v] > 0.0)) { Fail("T2 map entry {} = {} is not positive", v, t2map[v]); }
    memo.emplace(t2map[v], 0);
  }
  uniq_s.resize(static_cast<Index>(memo.size()), T);
  if (derivative) { uniq_d.resize(static_cast<Index>(memo.size()), T); }
  Index i = 0;
  for (auto &[t2, idx] : memo) {
    idx = i;
    Vec s, ds;
    if (derivative) {
      auto const sd = EpgFseDerivative(t1, t2, spec);
      s = sd.signal;
      ds = sd.d_t2;
    } else {
      s = EpgFseSignal(t1, t2, spec);
    }
    if (normalize) {
      double const n = s.norm();
      if (!(n > 0.0)) { Fail("EPG train for T2={} has zero norm", t2); }
      if (derivative) { ds = ds / n - s * (s.dot(ds) / (n * n * n)); }
      s /= n;
    }
    uniq_s.row(i) = s.transpose();
    if (derivative) { uniq_d.row(i) = ds.transpose(); }
    i++;
  }
  EpgSignals out;
  out.signal.resize(V, T);
  if (derivative) { out.d_t2.resize(V, T); }
  for (Index v = 0; v < V; v++) {
    Index const k = memo.at(t2map[v]);
    out.signal.row(v) = uniq_s.row(k);
    if (derivative) { out.d_t2.row(v) = uniq_d.row(k); }
  }
  return out;
}

auto ExpandEpg(Vec const &t2map, CxVec const &rho, SequenceSpec const &spec, double t1, bool normalize) -> CxMat
{
  if (rho.size() != t2map.size()) { Fail("rho and T2 map voxel counts differ"); }
  auto const s = SimulateEpgMap(t2map, spec, t1, false, normalize);
  return rho.asDiagonal() * s.signal.cast<Cx>();
}

auto BuildPhase(Vec const &b0map, SequenceSpec const &spec) -> CxMat
{
  CxMat H(b0map.size(), spec.etl);
  for (Index t = 0; t < spec.etl; t++) {
    double const sec = spec.echo_time(t) / 1000.0;
    for (Index v = 0; v < b0map.size(); v++) {
      H(v, t) = std::polar(1.0, 2.0 * std::numbers::pi * b0map[v] * sec);
    }
  }
  return H;
}

} // namespace lsm
