#include "lsm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lsm/phantom.hpp"

namespace lsm {

auto Nrmse(CxMat const &estimate, CxMat const &truth, std::vector<bool> const &region, bool keep_map) -> EchoMetrics
{
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    Fail("nrmse: estimate is {}x{}, truth is {}x{}", estimate.rows(), estimate.cols(), truth.rows(), truth.cols());
  }
  if (!region.empty() && static_cast<Index>(region.size()) != truth.rows()) {
    Fail("nrmse: region has {} voxels, images have {}", region.size(), truth.rows());
  }
  Index const V = truth.rows(), T = truth.cols();
  EchoMetrics out;
  out.per_echo.resize(T);
  if (keep_map) { out.error_map = Mat::Zero(V, T); }
  for (Index t = 0; t < T; t++) {
    double num = 0.0, den = 0.0;
    for (Index v = 0; v < V; v++) {
      if (!region.empty() && !region[static_cast<size_t>(v)]) { continue; }
      double const d = std::abs(estimate(v, t)) - std::abs(truth(v, t));
      num += d * d;
      den += std::norm(truth(v, t));
      if (keep_map) { out.error_map(v, t) = std::abs(d); }
    }
    if (!(den > 0.0)) { Fail("nrmse: truth has zero norm in the region at echo {}", t); }
    out.per_echo[t] = std::sqrt(num / den);
  }
  out.average = out.per_echo.mean();
  return out;
}

auto AggregateRecords(std::vector<InstanceRecord> const &records, std::string const &recipe) -> RecipeSummary
{
  RecipeSummary s;
  s.name = recipe;
  std::vector<InstanceRecord const *> ok;
  for (auto const &r : records) {
    if (r.recipe != recipe) { continue; }
    if (r.ok) {
      ok.push_back(&r);
    } else {
      s.failed++;
    }
  }
  // Fixed summation order keeps the aggregate independent of evaluation order.
  std::sort(ok.begin(), ok.end(), [](auto a, auto b) { return a->instance < b->instance; });
  s.completed = static_cast<Index>(ok.size());
  if (ok.empty()) { return s; }
  Index const T = ok.front()->per_echo.size();
  s.mean = Vec::Zero(T);
  for (auto r : ok) { s.mean += r->per_echo; }
  s.mean /= static_cast<double>(ok.size());
  s.std = Vec::Zero(T);
  if (ok.size() > 1) {
    for (auto r : ok) { s.std += (r->per_echo - s.mean).cwiseAbs2(); }
    s.std = (s.std / static_cast<double>(ok.size() - 1)).cwiseSqrt();
  }
  return s;
}

auto NoiseSweep(KSpaceData const &clean, CxMat const &truth, double sigma, std::vector<SweepRecipe> const &recipes,
                Index n_instances, std::uint64_t seed, std::vector<bool> const &region, std::vector<Index> const &order)
  -> NoiseSweepResult
{
  if (n_instances < 2) { Fail("noise sweep needs at least 2 instances, got {}", n_instances); }
  if (recipes.empty()) { Fail("noise sweep needs at least one recipe"); }
  if (sigma < 0.0) { Fail("noise sigma must be >= 0, got {}", sigma); }
  std::vector<Index> sequence(static_cast<size_t>(n_instances));
  std::iota(sequence.begin(), sequence.end(), Index{0});
  if (!order.empty()) {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != sequence) { Fail("noise sweep order must be a permutation of 0..{}", n_instances - 1); }
    sequence = order;
  }

  Index const R = static_cast<Index>(recipes.size());
  NoiseSweepResult res;
  res.records.resize(static_cast<size_t>(R * n_instances));
  std::vector<std::vector<Mat>> maps(static_cast<size_t>(R), std::vector<Mat>(static_cast<size_t>(n_instances)));
  for (Index i : sequence) {
    std::uint64_t const s = MixSeed(seed, static_cast<std::uint64_t>(i));
    KSpaceData const y = AddNoise(clean, sigma, s);
    for (Index r = 0; r < R; r++) {
      auto &rec = res.records[static_cast<size_t>(r * n_instances + i)];
      rec.recipe = recipes[static_cast<size_t>(r)].name;
      rec.instance = i;
      rec.seed = s;
      try {
        auto m = Nrmse(recipes[static_cast<size_t>(r)].run(y), truth, region, true);
        rec.per_echo = std::move(m.per_echo);
        maps[static_cast<size_t>(r)][static_cast<size_t>(i)] = std::move(m.error_map);
        rec.ok = true;
      } catch (std::exception const &e) {
        rec.error = e.what();
      }
    }
  }
  for (Index r = 0; r < R; r++) {
    auto s = AggregateRecords(res.records, recipes[static_cast<size_t>(r)].name);
    for (auto const &m : maps[static_cast<size_t>(r)]) {
      if (m.size() == 0) { continue; }
      if (s.mean_error_map.size() == 0) { s.mean_error_map = Mat::Zero(m.rows(), m.cols()); }
      s.mean_error_map += m;
    }
    if (s.completed > 0) { s.mean_error_map /= static_cast<double>(s.completed); }
    res.summary.push_back(std::move(s));
  }
  return res;
}

namespace {

// True when candidate a beats b at equal distance.
auto Prefer(Vec const &t2, Index a, Index b) -> bool { return t2[a] < t2[b] || (t2[a] == t2[b] && a < b); }

} // namespace

auto MatchExhaustive(Mat const &codes, Vec const &t2, Vec const &latent) -> Index
{
  if (codes.cols() == 0) { Fail("latent matching against an empty dictionary"); }
  if (latent.size() != codes.rows()) { Fail("latent has {} entries, codes have {}", latent.size(), codes.rows()); }
  Index best = 0;
  double best_d = (codes.col(0) - latent).squaredNorm();
  for (Index a = 1; a < codes.cols(); a++) {
    double const d = (codes.col(a) - latent).squaredNorm();
    if (d < best_d || (d == best_d && Prefer(t2, a, best))) {
      best = a;
      best_d = d;
    }
  }
  return best;
}

LatentMatcher::LatentMatcher(AutoEncoder const &ae, SignalDictionary const &dict)
{
  if (dict.size() == 0) { Fail("latent matching against an empty dictionary"); }
  if (dict.length() != ae.length()) {
    Fail("dictionary trains have {} echoes, network expects {}", dict.length(), ae.length());
  }
  codes_ = EncodeBatch(ae, dict.atoms.transpose());
  t2_.resize(dict.size());
  for (Index a = 0; a < dict.size(); a++) { t2_[a] = dict.t2_of(a); }
  if (codes_.rows() == 1) {
    sorted_.resize(static_cast<size_t>(dict.size()));
    std::iota(sorted_.begin(), sorted_.end(), Index{0});
    std::sort(sorted_.begin(), sorted_.end(), [&](Index a, Index b) {
      if (codes_(0, a) != codes_(0, b)) { return codes_(0, a) < codes_(0, b); }
      return Prefer(t2_, a, b);
    });
  }
}

auto LatentMatcher::match(Vec const &latent) const -> Index
{
  if (sorted_.empty()) { return MatchExhaustive(codes_, t2_, latent); }
  if (latent.size() != 1) { Fail("latent has {} entries, codes have 1", latent.size()); }
  double const b = latent[0];
  auto dist = [&](size_t k) {
    double const d = codes_(0, sorted_[k]) - b;
    return d * d;
  };
  size_t const n = sorted_.size();
  auto const it = std::lower_bound(sorted_.begin(), sorted_.end(), b,
                                   [&](Index a, double v) { return codes_(0, a) < v; });
  size_t const p = static_cast<size_t>(it - sorted_.begin());
  double best_d = std::numeric_limits<double>::infinity();
  if (p > 0) { best_d = std::min(best_d, dist(p - 1)); }
  if (p < n) { best_d = std::min(best_d, dist(p)); }
  // Distance is monotone away from b on each side, so equal-distance atoms are contiguous.
  Index best = -1;
  auto consider = [&](size_t k) {
    if (best < 0 || Prefer(t2_, sorted_[k], best)) { best = sorted_[k]; }
  };
  for (size_t k = p; k-- > 0 && dist(k) == best_d;) { consider(k); }
  for (size_t k = p; k < n && dist(k) == best_d; k++) { consider(k); }
  return best;
}

auto LatentMatcher::match_map(Mat const &beta) const -> Vec
{
  if (beta.cols() != codes_.rows()) { Fail("latent maps have {} channels, codes have {}", beta.cols(), codes_.rows()); }
  Vec out(beta.rows());
  for (Index v = 0; v < beta.rows(); v++) { out[v] = t2_[match(beta.row(v).transpose())]; }
  return out;
}

auto B0AliasLimit(SequenceSpec const &spec) -> double { return 1000.0 / (2.0 * spec.esp); }

auto EstimateB0Lowres(KSpaceData const &calib, SequenceSpec const &spec) -> Vec
{
  spec.validate();
  if (calib.T() != spec.etl) { Fail("calibration data has {} echoes, sequence has {}", calib.T(), spec.etl); }
  std::vector<Index> used;
  for (Index t = 0; t < calib.T(); t++) {
    if (!calib.lines[static_cast<size_t>(t)].empty()) { used.push_back(t); }
  }
  if (used.size() < 2) { Fail("B0 estimation needs at least 2 calibration echoes, found {}", used.size()); }
  for (size_t k = 1; k < used.size(); k++) {
    if (used[k] != used[k - 1] + 1) { Fail("calibration echoes must be consecutive"); }
  }

  Index const M = calib.M, N = calib.N, C = calib.C, V = M * N;
  CxMat const fm_adj = CenteredDft(M).adjoint();
  CxMat const fn = CenteredDft(N);
  auto coil_images = [&](Index t) {
    auto const &lines = calib.lines[static_cast<size_t>(t)];
    Index const nt = static_cast<Index>(lines.size());
    CxMat const tmp = fm_adj * calib.echoes[static_cast<size_t>(t)]; // M x (C * nt)
    CxMat rows(nt, N);
    for (Index j = 0; j < nt; j++) { rows.row(j) = fn.row(lines[static_cast<size_t>(j)]).conjugate(); }
    CxMat img(V, C);
    for (Index c = 0; c < C; c++) {
      CxMat per_line(M, nt);
      for (Index j = 0; j < nt; j++) { per_line.col(j) = tmp.col(c + C * j); }
      CxMat const plane = per_line * rows; // M x N
      img.col(c) = plane.reshaped();
    }
    return img;
  };

  Vec num = Vec::Zero(V), den = Vec::Zero(V);
  CxMat prev = coil_images(used.front());
  for (size_t k = 1; k < used.size(); k++) {
    CxMat cur = coil_images(used[k]);
    for (Index v = 0; v < V; v++) {
      Cx const z = (prev.row(v).conjugate().cwiseProduct(cur.row(v))).sum();
      double const w = std::abs(z);
      num[v] += w * std::arg(z);
      den[v] += w;
    }
    prev = std::move(cur);
  }
  double const per_rad = 1.0 / (2.0 * std::numbers::pi * spec.esp / 1000.0);
  Vec b0(V);
  for (Index v = 0; v < V; v++) { b0[v] = den[v] > 0.0 ? num[v] / den[v] * per_rad : 0.0; }
  return b0;
}

auto ProxyGradientAudit(std::vector<std::pair<Index, LatentImage>> const &trace, LatentMatcher const &matcher,
                        KSpaceData const &y, EncodingOperator const &op, SequenceSpec const &spec, double t1)
  -> std::vector<AuditPoint>
{
  if (spec.kind != SequenceKind::FSE) { Fail("gradient audit needs an FSE sequence"); }
  std::vector<AuditPoint> out;
  for (auto const &[iter, img] : trace) {
    EpgMaps const at{matcher.match_map(img.beta), img.rho};
    auto const g = EvalEpgGradNorms(y, op, spec, t1, at, true);
    out.push_back({iter, g.t2, g.rho, g.objective});
  }
  return out;
}

} // namespace lsm
