#include "lsm/solvers.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "lsm/prox.hpp"
#include "lsm/wavelet.hpp"

namespace lsm {

namespace {

using Clock = std::chrono::steady_clock;

auto Elapsed(Clock::time_point t0) -> double { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void CheckOperands(KSpaceData const &y, EncodingOperator const &op)
{
  if (y.M != op.grid().M || y.N != op.grid().N || y.C != op.coils() || y.T() != op.echoes()) {
    Fail("k-space is {}x{}x{}x{}, operator expects {}x{}x{}x{}", y.M, y.N, y.C, y.T(), op.grid().M, op.grid().N,
         op.coils(), op.echoes());
  }
  if (y.lines != op.mask().lines) { Fail("k-space sampling pattern does not match the operator mask"); }
}

} // namespace

auto ToString(Regularizer r) -> std::string
{
  switch (r) {
  case Regularizer::None: return "none";
  case Regularizer::Wavelet: return "wavelet";
  case Regularizer::Llr: return "llr";
  }
  return "?";
}

auto ParseRegularizer(std::string const &s) -> Regularizer
{
  if (s == "none") { return Regularizer::None; }
  if (s == "wavelet") { return Regularizer::Wavelet; }
  if (s == "llr") { return Regularizer::Llr; }
  Fail("unknown regularizer '{}'", s);
}

void ReconConfig::validate() const
{
  if (iters < 1) { Fail("iterations must be >= 1"); }
  if (!(lambda >= 0.0)) { Fail("lambda must be >= 0"); }
  if (step < 0.0) { Fail("step must be >= 0 (0 = automatic)"); }
  if (wavelet_levels < 0) { Fail("wavelet levels must be >= 0"); }
  if (llr_patch < 1) { Fail("LLR patch must be >= 1"); }
  if (!(lr_beta > 0.0) || !(lr_rho > 0.0)) { Fail("latent step sizes must be positive"); }
  if (!(lr_final > 0.0 && lr_final <= 1.0)) { Fail("lr_final must be in (0, 1]"); }
  if (!(t2_scale > 0.0)) { Fail("t2_scale must be positive"); }
}

auto ToJson(ReconConfig const &c) -> io::Json
{
  return {{"iters", c.iters},       {"step", c.step},
          {"lambda", c.lambda},     {"reg", ToString(c.reg)},
          {"wavelet_levels", c.wavelet_levels},
          {"llr_patch", c.llr_patch}, {"llr_shift", c.llr_shift},
          {"seed", c.seed},         {"lr_beta", c.lr_beta},
          {"lr_rho", c.lr_rho},     {"lr_final", c.lr_final},
          {"clamp_latent", c.clamp_latent},
          {"epg_normalize", c.epg_normalize},
          {"t2_scale", c.t2_scale}};
}

auto ReconConfigFromJson(io::Json const &j, ReconConfig c) -> ReconConfig
{
  c.iters = j.value("iters", c.iters);
  c.step = j.value("step", c.step);
  c.lambda = j.value("lambda", c.lambda);
  if (j.contains("reg")) { c.reg = ParseRegularizer(j["reg"].get<std::string>()); }
  c.wavelet_levels = j.value("wavelet_levels", c.wavelet_levels);
  c.llr_patch = j.value("llr_patch", c.llr_patch);
  c.llr_shift = j.value("llr_shift", c.llr_shift);
  c.seed = j.value("seed", c.seed);
  c.lr_beta = j.value("lr_beta", c.lr_beta);
  c.lr_rho = j.value("lr_rho", c.lr_rho);
  c.lr_final = j.value("lr_final", c.lr_final);
  c.clamp_latent = j.value("clamp_latent", c.clamp_latent);
  c.epg_normalize = j.value("epg_normalize", c.epg_normalize);
  c.t2_scale = j.value("t2_scale", c.t2_scale);
  c.validate();
  return c;
}

auto DensityCompensatedAverage(EncodingOperator const &op, KSpaceData const &y) -> CxVec
{
  CheckOperands(y, op);
  Vec count = Vec::Zero(y.N);
  for (auto const &l : y.lines) {
    for (Index k : l) {
      count[k] += 1.0;
    }
  }
  KSpaceData w = y;
  for (Index t = 0; t < y.T(); t++) {
    auto const &l = y.lines[static_cast<size_t>(t)];
    for (size_t j = 0; j < l.size(); j++) {
      w.echoes[static_cast<size_t>(t)].middleCols(y.C * static_cast<Index>(j), y.C) /= count[l[j]];
    }
  }
  return op.adjoint(w).rowwise().sum();
}

auto PowerIteration(std::function<CxMat(CxMat const &)> const &normal, Index rows, Index cols, std::uint64_t seed,
                    Index max_iters, double tol) -> double
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  CxMat b(rows, cols);
  for (Index j = 0; j < cols; j++) {
    for (Index i = 0; i < rows; i++) {
      double const re = nd(rng);
      b(i, j) = Cx(re, nd(rng));
    }
  }
  b /= b.norm();
  double lam = 0.0;
  for (Index it = 0; it < max_iters; it++) {
    CxMat const nb = normal(b);
    double const next = nb.norm();
    if (!(next > 0.0)) { return 0.0; }
    b = nb / next;
    bool const done = std::abs(next - lam) <= tol * next;
    lam = next;
    if (done) { break; }
  }
  return lam;
}

auto ReconLinear(KSpaceData const &y_in, EncodingOperator const &op, Subspace const &sub, ReconConfig const &cfg)
  -> LinearResult
{
  cfg.validate();
  CheckOperands(y_in, op);
  if (sub.length() != op.echoes()) { Fail("subspace length {} does not match {} echoes", sub.length(), op.echoes()); }
  Grid const g = op.grid();
  Index const V = g.voxels(), B = sub.rank();
  if (cfg.reg == Regularizer::Wavelet) { CheckWaveletSize(g.M, g.N, cfg.wavelet_levels); }

  LinearResult res;
  double const peak = DensityCompensatedAverage(op, y_in).cwiseAbs().maxCoeff();
  res.data_scale = peak > 0.0 ? 1.0 / peak : 1.0;
  KSpaceData const y = y_in.scaled(res.data_scale);

  auto A = [&](CxMat const &a) { return op.forward(ExpandLinear(sub, a)); };
  auto AH = [&](KSpaceData const &k) { return CollapseLinear(sub, op.adjoint(k)); };
  // Objective ||A a - y||^2 has gradient 2 A^H (A a - y) and Lipschitz constant 2 lambda_max(A^H A).
  double step = cfg.step;
  if (step == 0.0) {
    double const lmax = PowerIteration([&](CxMat const &a) { return AH(A(a)); }, V, B, cfg.seed);
    if (!(lmax > 0.0)) { Fail("normal operator is zero; nothing is sampled"); }
    step = 1.0 / (2.0 * 1.02 * lmax);
  }
  res.step = step;

  std::mt19937_64 rng(cfg.seed);
  auto reg_value = [&](CxMat const &a) {
    switch (cfg.reg) {
    case Regularizer::None: return 0.0;
    case Regularizer::Wavelet: return cfg.lambda * WaveletNorm(a, g, cfg.wavelet_levels);
    case Regularizer::Llr: return cfg.lambda * LlrNorm(a, g, cfg.llr_patch);
    }
    return 0.0;
  };
  auto prox = [&](CxMat const &a, double tau) -> CxMat {
    if (tau == 0.0) { return a; }
    switch (cfg.reg) {
    case Regularizer::None: return a;
    case Regularizer::Wavelet: return WaveletProx(a, g, cfg.wavelet_levels, tau);
    case Regularizer::Llr: {
      Index sm = 0, sn = 0;
      if (cfg.llr_shift) {
        sm = std::uniform_int_distribution<Index>(0, cfg.llr_patch - 1)(rng);
        sn = std::uniform_int_distribution<Index>(0, cfg.llr_patch - 1)(rng);
      }
      return LlrProx(a, g, tau, cfg.llr_patch, sm, sn);
    }
    }
    return a;
  };

  CxMat x = CxMat::Zero(V, B), v = x;
  KSpaceData Ax = op.zeros(), Av = Ax;
  double t = 1.0;
  double F = y.squaredNorm();
  res.log.push_back({0, F, 0.0});
  auto const t0 = Clock::now();
  for (Index it = 1; it <= cfg.iters; it++) {
    KSpaceData r = Av - y;
    CxMat const grad = 2.0 * AH(r);
    CxMat xn = prox(v - step * grad, step * cfg.lambda);
    KSpaceData Axn = A(xn);
    double const data = (Axn - y).squaredNorm();
    double const rv = reg_value(xn);
    if (!std::isfinite(data + rv)) { Fail("linear recon diverged at iteration {} (objective {})", it, data + rv); }
    if (data + rv > F && t > 1.0) {
      // Momentum overshot: drop it and take a plain proximal step from x next.
      t = 1.0;
      v = x;
      Av = Ax;
      res.log.push_back({it, res.log.back().data, res.log.back().reg});
      continue;
    }
    double const tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    double const mom = (t - 1.0) / tn;
    v = xn + mom * (xn - x);
    Av = Axn;
    for (size_t e = 0; e < Av.echoes.size(); e++) {
      Av.echoes[e] += mom * (Axn.echoes[e] - Ax.echoes[e]);
    }
    x = std::move(xn);
    Ax = std::move(Axn);
    t = tn;
    F = data + rv;
    res.log.push_back({it, data, rv});
  }
  res.seconds_per_iter = Elapsed(t0) / static_cast<double>(cfg.iters);
  res.alpha = x / res.data_scale;
  return res;
}

auto ReconLatent(KSpaceData const &y_in, EncodingOperator const &op, AutoEncoder const &ae, ReconConfig const &cfg,
                 std::optional<LatentImage> const &init, LatentObserver const &observer, Index observe_every)
  -> LatentResult
{
  cfg.validate();
  CheckOperands(y_in, op);
  if (ae.length() != op.echoes()) { Fail("network length {} does not match {} echoes", ae.length(), op.echoes()); }
  if (cfg.reg == Regularizer::Llr) { Fail("latent recon supports reg none or wavelet"); }
  Grid const g = op.grid();
  Index const V = g.voxels(), L = ae.latent();
  if (cfg.reg == Regularizer::Wavelet) { CheckWaveletSize(g.M, g.N, cfg.wavelet_levels); }

  LatentImage img;
  if (init) {
    if (init->beta.rows() != V || init->beta.cols() != L || init->rho.size() != V) { Fail("initial latent image has the wrong shape"); }
    img = *init;
  } else {
    img.beta = Mat::Zero(V, L);
    Vec const mean = DecodeBatch(ae, img.beta.transpose()).colwise().mean().transpose();
    CxVec const avg = DensityCompensatedAverage(op, y_in);
    img.rho.resize(V);
    for (Index i = 0; i < V; i++) {
      img.rho[i] = std::abs(mean[i]) > 1e-8 ? avg[i] / mean[i] : avg[i];
    }
  }

  LatentResult res;
  double const peak = img.rho.cwiseAbs().maxCoeff();
  res.data_scale = peak > 0.0 ? 1.0 / peak : 1.0;
  KSpaceData const y = y_in.scaled(res.data_scale);
  img.rho *= res.data_scale;

  Vec beta_range = Vec::Ones(L);
  if (ae.latent_lo.size() == L) { beta_range = (ae.latent_hi - ae.latent_lo).cwiseMax(1e-12); }
  double const rho_range = std::max(img.rho.cwiseAbs().maxCoeff(), 1e-12);

  auto reg_value = [&](LatentImage const &im) {
    if (cfg.reg != Regularizer::Wavelet || cfg.lambda == 0.0) { return 0.0; }
    double s = 0.0;
    for (Index l = 0; l < L; l++) {
      s += beta_range[l] * WaveletNorm(Mat(im.beta.col(l)), g, cfg.wavelet_levels);
    }
    Mat ri(V, 2);
    ri.col(0) = im.rho.real();
    ri.col(1) = im.rho.imag();
    return cfg.lambda * (s + rho_range * WaveletNorm(ri, g, cfg.wavelet_levels));
  };

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Mat mb = Mat::Zero(V, L), vb = Mat::Zero(V, L), mr = Mat::Zero(V, 2), vr = Mat::Zero(V, 2);
  double p1 = 1.0, p2 = 1.0;
  auto const t0 = Clock::now();
  for (Index it = 1; it <= cfg.iters + 1; it++) {
    DecoderLinearization const lin = LinearizeDecoder(ae, img.beta.transpose());
    KSpaceData const r = op.forward(img.rho.asDiagonal() * lin.output.transpose().cast<Cx>()) - y;
    double const data = r.squaredNorm();
    res.log.push_back({it - 1, data, reg_value(img)});
    if (it > cfg.iters) { break; }
    CxMat const cot = 2.0 * op.adjoint(r);
    LatentGradient const grad = CollapseLatentCotangent(ae, lin, img, cot);
    if (!std::isfinite(data) || !grad.beta.allFinite() || !grad.rho.allFinite()) {
      Fail("latent recon diverged at iteration {} (objective {}, |grad beta| {}, |grad rho| {})", it - 1, data,
           grad.beta.norm(), grad.rho.norm());
    }
    Mat gr(V, 2);
    gr.col(0) = grad.rho.real();
    gr.col(1) = grad.rho.imag();
    p1 *= b1;
    p2 *= b2;
    double const c1 = 1.0 / (1.0 - p1), c2 = 1.0 / (1.0 - p2);
    double const decay = cfg.lr_final + 0.5 * (1.0 - cfg.lr_final) *
                                          (1.0 + std::cos(std::numbers::pi * static_cast<double>(it - 1) / static_cast<double>(cfg.iters)));
    double const lr_b = cfg.lr_beta * decay, lr_r = cfg.lr_rho * decay;
    mb = b1 * mb + (1.0 - b1) * grad.beta;
    vb = b2 * vb.array() + (1.0 - b2) * grad.beta.array().square();
    mr = b1 * mr + (1.0 - b1) * gr;
    vr = b2 * vr.array() + (1.0 - b2) * gr.array().square();
    img.beta.array() -= lr_b * (c1 * mb.array()) / ((c2 * vb.array()).sqrt() + eps);
    Mat rho_ri(V, 2);
    rho_ri.col(0) = img.rho.real();
    rho_ri.col(1) = img.rho.imag();
    rho_ri.array() -= lr_r * (c1 * mr.array()) / ((c2 * vr.array()).sqrt() + eps);
    if (cfg.reg == Regularizer::Wavelet && cfg.lambda > 0.0) {
      for (Index l = 0; l < L; l++) {
        img.beta.col(l) = WaveletProx(Mat(img.beta.col(l)), g, cfg.wavelet_levels, lr_b * cfg.lambda * beta_range[l]);
      }
      rho_ri = WaveletProx(rho_ri, g, cfg.wavelet_levels, lr_r * cfg.lambda * rho_range);
    }
    if (cfg.clamp_latent && ae.latent_lo.size() == L) {
      for (Index l = 0; l < L; l++) {
        img.beta.col(l) = img.beta.col(l).cwiseMax(ae.latent_lo[l]).cwiseMin(ae.latent_hi[l]);
      }
    }
    img.rho.real() = rho_ri.col(0);
    img.rho.imag() = rho_ri.col(1);
    if (observer && observe_every > 0 && it % observe_every == 0) {
      observer(it, LatentImage{img.beta, img.rho / res.data_scale});
    }
  }
  res.seconds_per_iter = Elapsed(t0) / static_cast<double>(cfg.iters);
  img.rho /= res.data_scale;
  res.img = std::move(img);
  return res;
}

namespace {

struct EpgEval
{
  double value;
  Vec grad_t2;   // per ms
  CxVec grad_rho;
};

auto EvalEpg(KSpaceData const &y, EncodingOperator const &op, SequenceSpec const &spec, double t1, Vec const &t2,
             CxVec const &rho, bool normalize, bool gradient) -> EpgEval
{
  auto const sim = SimulateEpgMap(t2, spec, t1, gradient, normalize);
  CxMat const x = rho.asDiagonal() * sim.signal.cast<Cx>();
  KSpaceData const r = op.forward(x) - y;
  EpgEval e{r.squaredNorm(), {}, {}};
  if (gradient) {
    CxMat const gx = 2.0 * op.adjoint(r);
    e.grad_t2 = (gx.conjugate().cwiseProduct(rho.asDiagonal() * sim.d_t2.cast<Cx>())).real().rowwise().sum();
    e.grad_rho = gx.cwiseProduct(sim.signal.cast<Cx>()).rowwise().sum();
  }
  return e;
}

} // namespace

auto ReconEpg(KSpaceData const &y_in, EncodingOperator const &op, SequenceSpec const &spec, double t1,
              std::optional<EpgMaps> const &init, ReconConfig const &cfg) -> EpgResult
{
  cfg.validate();
  CheckOperands(y_in, op);
  if (spec.kind != SequenceKind::FSE || spec.etl != op.echoes()) { Fail("EPG recon needs an FSE sequence matching the operator"); }
  Index const V = op.grid().voxels();
  constexpr double kT2Min = 1.0, kT2Max = 2000.0;

  EpgMaps m;
  if (init) {
    if (init->t2.size() != V || init->rho.size() != V) { Fail("initial EPG maps have the wrong size"); }
    m = *init;
  } else {
    m.t2 = Vec::Constant(V, 100.0);
    auto const s = SimulateEpgMap(Vec::Constant(1, 100.0), spec, t1, false, cfg.epg_normalize).signal;
    m.rho = DensityCompensatedAverage(op, y_in) / s.mean();
  }
  m.t2 = m.t2.cwiseMax(kT2Min).cwiseMin(kT2Max);

  EpgResult res;
  double const peak = m.rho.cwiseAbs().maxCoeff();
  res.data_scale = peak > 0.0 ? 1.0 / peak : 1.0;
  KSpaceData const y = y_in.scaled(res.data_scale);
  m.rho *= res.data_scale;

  double const s = cfg.t2_scale;
  double eta = 1.0;
  constexpr double kArmijo = 1e-4;
  auto cur = EvalEpg(y, op, spec, t1, m.t2, m.rho, cfg.epg_normalize, true);
  res.log.push_back({0, cur.value, 0.0});
  auto const t0 = Clock::now();
  for (Index it = 1; it <= cfg.iters; it++) {
    if (!std::isfinite(cur.value)) { Fail("EPG recon diverged at iteration {}", it - 1); }
    // Gradient with respect to u = T2 / s.
    Vec const gu = s * cur.grad_t2;
    double const gnorm2 = gu.squaredNorm() + cur.grad_rho.squaredNorm();
    if (gnorm2 == 0.0) {
      res.log.push_back({it, cur.value, 0.0});
      continue;
    }
    eta *= 2.0;
    EpgMaps trial;
    double tv = 0.0;
    for (Index bt = 0;; bt++) {
      trial.t2 = (m.t2 - eta * s * gu).cwiseMax(kT2Min).cwiseMin(kT2Max);
      trial.rho = m.rho - eta * cur.grad_rho;
      // Projected Armijo: compare against the linear model along the actual move.
      double const decrease = ((m.t2 - trial.t2) / s).dot(gu) + (m.rho - trial.rho).dot(cur.grad_rho).real();
      tv = EvalEpg(y, op, spec, t1, trial.t2, trial.rho, cfg.epg_normalize, false).value;
      if (tv <= cur.value - kArmijo * decrease) { break; }
      eta *= 0.5;
      if (bt > 60) {
        trial = m;
        tv = cur.value;
        break;
      }
    }
    m = trial;
    cur = EvalEpg(y, op, spec, t1, m.t2, m.rho, cfg.epg_normalize, true);
    res.log.push_back({it, cur.value, 0.0});
  }
  res.seconds_per_iter = Elapsed(t0) / static_cast<double>(cfg.iters);
  m.rho /= res.data_scale;
  res.maps = std::move(m);
  return res;
}

auto EvalEpgGradNorms(KSpaceData const &y, EncodingOperator const &op, SequenceSpec const &spec, double t1,
                      EpgMaps const &at, bool normalize) -> EpgGradNorms
{
  CheckOperands(y, op);
  auto const e = EvalEpg(y, op, spec, t1, at.t2, at.rho, normalize, true);
  return {e.grad_t2.norm(), e.grad_rho.norm(), e.value};
}

auto LogSpace(double lo, double hi, Index n) -> std::vector<double>
{
  if (!(lo > 0.0) || !(hi > 0.0) || n < 1) { Fail("log sweep needs positive bounds and n >= 1"); }
  std::vector<double> v;
  for (Index i = 0; i < n; i++) {
    double const f = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    v.push_back(std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))));
  }
  return v;
}

auto SweepLambda(std::vector<double> const &lambdas, std::function<double(double)> const &score) -> SweepResult
{
  if (lambdas.empty()) { Fail("lambda sweep is empty"); }
  SweepResult r;
  for (double l : lambdas) {
    r.points.push_back({l, score(l)});
    if (r.points.back().score < r.points[static_cast<size_t>(r.best)].score) { r.best = static_cast<Index>(r.points.size()) - 1; }
  }
  return r;
}

} // namespace lsm
