#include "lsm/prox.hpp"

#include <Eigen/SVD>

#include "lsm/wavelet.hpp"

namespace lsm {

auto SoftThreshold(double v, double tau) -> double
{
  double const a = std::abs(v) - tau;
  return a > 0.0 ? std::copysign(a, v) : 0.0;
}

auto SoftThreshold(Cx v, double tau) -> Cx
{
  double const m = std::abs(v);
  return m > tau ? v * ((m - tau) / m) : Cx(0.0);
}

namespace {

auto Plane(auto const &col, Grid g) { return Eigen::Map<Mat const>(col.data(), g.M, g.N); }

template <typename F>
void ForDetails(Grid g, Index levels, F &&f)
{
  Index const am = g.M >> levels, an = g.N >> levels;
  for (Index n = 0; n < g.N; n++) {
    for (Index m = 0; m < g.M; m++) {
      if (m < am && n < an) { continue; }
      f(m, n);
    }
  }
}

void CheckMaps(Index rows, Grid g)
{
  if (rows != g.voxels()) { Fail("maps have {} rows, grid has {} voxels", rows, g.voxels()); }
}

} // namespace

auto WaveletProx(Mat const &maps, Grid g, Index levels, double tau) -> Mat
{
  CheckMaps(maps.rows(), g);
  Mat out(maps.rows(), maps.cols());
  for (Index k = 0; k < maps.cols(); k++) {
    Vec const col = maps.col(k);
    Mat c = Dwt2(Plane(col, g), levels);
    ForDetails(g, levels, [&](Index m, Index n) { c(m, n) = SoftThreshold(c(m, n), tau); });
    Mat const x = Idwt2(c, levels);
    out.col(k) = Eigen::Map<Vec const>(x.data(), x.size());
  }
  return out;
}

auto WaveletProx(CxMat const &maps, Grid g, Index levels, double tau) -> CxMat
{
  CheckMaps(maps.rows(), g);
  CxMat out(maps.rows(), maps.cols());
  for (Index k = 0; k < maps.cols(); k++) {
    Vec const re = maps.col(k).real(), im = maps.col(k).imag();
    Mat cr = Dwt2(Plane(re, g), levels), ci = Dwt2(Plane(im, g), levels);
    ForDetails(g, levels, [&](Index m, Index n) {
      Cx const z = SoftThreshold(Cx(cr(m, n), ci(m, n)), tau);
      cr(m, n) = z.real();
      ci(m, n) = z.imag();
    });
    Mat const xr = Idwt2(cr, levels), xi = Idwt2(ci, levels);
    for (Index v = 0; v < g.voxels(); v++) {
      out(v, k) = Cx(xr.data()[v], xi.data()[v]);
    }
  }
  return out;
}

auto WaveletNorm(Mat const &maps, Grid g, Index levels) -> double
{
  CheckMaps(maps.rows(), g);
  double s = 0.0;
  for (Index k = 0; k < maps.cols(); k++) {
    Vec const col = maps.col(k);
    Mat const c = Dwt2(Plane(col, g), levels);
    ForDetails(g, levels, [&](Index m, Index n) { s += std::abs(c(m, n)); });
  }
  return s;
}

auto WaveletNorm(CxMat const &maps, Grid g, Index levels) -> double
{
  CheckMaps(maps.rows(), g);
  double s = 0.0;
  for (Index k = 0; k < maps.cols(); k++) {
    Vec const re = maps.col(k).real(), im = maps.col(k).imag();
    Mat const cr = Dwt2(Plane(re, g), levels), ci = Dwt2(Plane(im, g), levels);
    ForDetails(g, levels, [&](Index m, Index n) { s += std::hypot(cr(m, n), ci(m, n)); });
  }
  return s;
}

namespace {

template <typename F>
void ForBlocks(Grid g, Index patch, Index sm, Index sn, F &&f)
{
  if (patch < 1) { Fail("LLR patch size must be >= 1"); }
  std::vector<Index> idx;
  for (Index n0 = 0; n0 < g.N; n0 += patch) {
    for (Index m0 = 0; m0 < g.M; m0 += patch) {
      idx.clear();
      for (Index n = n0; n < std::min(n0 + patch, g.N); n++) {
        for (Index m = m0; m < std::min(m0 + patch, g.M); m++) {
          idx.push_back((m + sm) % g.M + g.M * ((n + sn) % g.N));
        }
      }
      f(idx);
    }
  }
}

} // namespace

auto LlrProx(CxMat const &maps, Grid g, double tau, Index patch, Index shift_m, Index shift_n) -> CxMat
{
  CheckMaps(maps.rows(), g);
  if (maps.cols() < 1) { Fail("LLR needs at least one channel"); }
  CxMat out = maps;
  ForBlocks(g, patch, shift_m, shift_n, [&](std::vector<Index> const &idx) {
    CxMat blk(static_cast<Index>(idx.size()), maps.cols());
    for (size_t i = 0; i < idx.size(); i++) {
      blk.row(static_cast<Index>(i)) = maps.row(idx[i]);
    }
    Eigen::JacobiSVD<CxMat> svd(blk, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vec s = svd.singularValues();
    for (Index i = 0; i < s.size(); i++) {
      s[i] = std::max(s[i] - tau, 0.0);
    }
    blk = svd.matrixU() * s.cast<Cx>().asDiagonal() * svd.matrixV().adjoint();
    for (size_t i = 0; i < idx.size(); i++) {
      out.row(idx[i]) = blk.row(static_cast<Index>(i));
    }
  });
  return out;
}

auto LlrNorm(CxMat const &maps, Grid g, Index patch) -> double
{
  CheckMaps(maps.rows(), g);
  double s = 0.0;
  ForBlocks(g, patch, 0, 0, [&](std::vector<Index> const &idx) {
    CxMat blk(static_cast<Index>(idx.size()), maps.cols());
    for (size_t i = 0; i < idx.size(); i++) {
      blk.row(static_cast<Index>(i)) = maps.row(idx[i]);
    }
    s += Eigen::JacobiSVD<CxMat>(blk).singularValues().sum();
  });
  return s;
}

} // namespace lsm
