#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "lsm/subspace.hpp"

using namespace lsm;

namespace {

auto FseDict(double lo = 50, double hi = 400) -> SignalDictionary
{
  return BuildDictionary(SequenceSpec::FsePreset(), {{1000.0}, ParamGrid::Range(lo, hi, 1)});
}

} // namespace

TEST(Subspace, BasisMatchesGramEigenvectors)
{
  auto const d = FseDict(50, 150);
  auto const sub = FitSubspace(d, 4, SubspaceWeighting::Normalized);
  Eigen::SelfAdjointEigenSolver<Mat> eig(d.atoms.transpose() * d.atoms);
  for (Index b = 0; b < 4; b++) {
    Vec v = eig.eigenvectors().col(d.length() - 1 - b);
    Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    if (v[imax] < 0) { v = -v; }
    EXPECT_LT((sub.basis.col(b) - v).cwiseAbs().maxCoeff(), 1e-8) << b;
  }
}

TEST(Subspace, RawWeightingUsesUnnormalizedSignals)
{
  auto const d = FseDict(50, 150);
  auto const sub = FitSubspace(d, 2);
  Mat const raw = d.raw();
  Eigen::SelfAdjointEigenSolver<Mat> eig(raw.transpose() * raw);
  Vec v = eig.eigenvectors().col(d.length() - 1);
  if (v.cwiseAbs().maxCoeff() != v.maxCoeff()) { v = -v; }
  EXPECT_LT((sub.basis.col(0) - v).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Subspace, OrthonormalAndSignConvention)
{
  auto const sub = FitSubspace(FseDict(), 4);
  EXPECT_LT((sub.basis.transpose() * sub.basis - Mat::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
  for (Index b = 0; b < 4; b++) {
    Index i;
    sub.basis.col(b).cwiseAbs().maxCoeff(&i);
    EXPECT_GT(sub.basis(i, b), 0.0);
  }
}

TEST(Subspace, RankOneDictionary)
{
  Mat sig(5, 80);
  Vec a = Vec::LinSpaced(80, 1.0, 0.2);
  for (Index i = 0; i < 5; i++) { sig.row(i) = a.transpose(); }
  auto const sub = FitSubspace(sig, 1);
  auto const p = Project(sub, a.cast<Cx>());
  EXPECT_LT((p.recon - a.cast<Cx>()).norm(), 1e-12);
}

TEST(Subspace, ProjectionOracles)
{
  auto const d = FseDict();
  auto const sub = FitSubspace(d, 3);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  CxVec in_span = sub.basis.cast<Cx>() * CxVec::NullaryExpr(3, [&] { return Cx(n(rng), n(rng)); });
  EXPECT_LT((Project(sub, in_span).recon - in_span).norm(), 1e-10);

  Vec perp = Vec::NullaryExpr(80, [&] { return n(rng); });
  perp -= sub.basis * (sub.basis.transpose() * perp);
  EXPECT_LT(Project(sub, perp.cast<Cx>()).recon.norm(), 1e-12);

  // least-squares oracle via normal equations
  Vec const atom = d.atoms.row(123).transpose();
  Vec const coef = (sub.basis.transpose() * sub.basis).ldlt().solve(sub.basis.transpose() * atom);
  auto const p = Project(sub, atom.cast<Cx>());
  EXPECT_LT((p.recon.real() - sub.basis * coef).norm(), 1e-12);
  auto const pp = Project(sub, p.recon);
  EXPECT_LT((pp.recon - p.recon).norm(), 1e-12);
}

TEST(Subspace, CompressionCurveMatchesLeastSquares)
{
  auto const d = FseDict();
  auto const sub = FitSubspace(d, 2);
  auto const e = CompressionNrmse(sub, d);
  auto qr = sub.basis.colPivHouseholderQr();
  for (Index i = 0; i < d.size(); i += 7) {
    Vec const a = d.atoms.row(i).transpose();
    Vec const r = sub.basis * qr.solve(a) - a;
    EXPECT_NEAR(e.per_atom[i], r.norm() / a.norm(), 1e-12);
  }
  EXPECT_NEAR(e.average, e.per_atom.mean(), 1e-15);
}

TEST(Subspace, NonIncreasingInRankAndFullRankExact)
{
  auto const d = FseDict(50, 200);
  double prev = 1e9;
  for (Index B = 1; B <= 6; B++) {
    double const e = CompressionNrmse(FitSubspace(d, B), d).average;
    EXPECT_LE(e, prev + 1e-15);
    prev = e;
  }
  EXPECT_LT(CompressionNrmse(FitSubspace(d, 80), d).average, 1e-10);
}

TEST(Subspace, FseTrainingCompressionNearPublished)
{
  auto const d = FseDict();
  double const published[] = {18.41, 3.18, 0.44, 0.05};
  for (Index B = 1; B <= 4; B++) {
    EXPECT_NEAR(100.0 * CompressionNrmse(FitSubspace(d, B), d).average, published[B - 1], 0.5) << "B=" << B;
  }
}

TEST(Subspace, Errors)
{
  auto const d = FseDict(50, 60);
  EXPECT_THROW(FitSubspace(d, 0), Error);
  EXPECT_THROW(FitSubspace(d, 12), Error);
  EXPECT_THROW(FitSubspace(Mat::Zero(4, 10), 1), Error);
  auto const sub = FitSubspace(d, 2);
  EXPECT_THROW(Project(sub, CxVec::Zero(10)), Error);
}

TEST(Subspace, SaveLoad)
{
  auto const path = std::filesystem::temp_directory_path() / "lsm_test_sub.bin";
  auto const sub = FitSubspace(FseDict(50, 90), 3);
  SaveSubspace(path, sub);
  EXPECT_EQ(LoadSubspace(path).basis, sub.basis);
}
