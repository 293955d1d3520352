#include "lsm/subspace.hpp"

#include <Eigen/SVD>

namespace lsm {

auto FitSubspace(Mat const &signals, Index B) -> Subspace
{
  Index const T = signals.cols();
  if (B < 1 || B > std::min(T, signals.rows())) {
    Fail("subspace size {} outside [1, {}]", B, std::min(T, signals.rows()));
  }
  if (!(signals.cwiseAbs().maxCoeff() > 0.0)) { Fail("cannot fit a subspace to an all-zero dictionary"); }
  Eigen::BDCSVD<Mat> svd(signals, Eigen::ComputeThinV);
  Subspace sub;
  sub.basis = svd.matrixV().leftCols(B);
  for (Index b = 0; b < B; b++) {
    Index imax;
    sub.basis.col(b).cwiseAbs().maxCoeff(&imax);
    if (sub.basis(imax, b) < 0.0) { sub.basis.col(b) *= -1.0; }
  }
  return sub;
}

auto FitSubspace(SignalDictionary const &dict, Index B, SubspaceWeighting w) -> Subspace
{
  return FitSubspace(w == SubspaceWeighting::Raw ? dict.raw() : dict.atoms, B);
}

auto Project(Subspace const &sub, CxVec const &signal) -> Projection
{
  if (signal.size() != sub.length()) {
    Fail("signal length {} does not match subspace length {}", signal.size(), sub.length());
  }
  Projection p;
  p.coeffs = sub.basis.transpose().cast<Cx>() * signal;
  p.recon = sub.basis.cast<Cx>() * p.coeffs;
  return p;
}

auto CompressionNrmse(Subspace const &sub, SignalDictionary const &dict) -> CompressionError
{
  if (dict.length() != sub.length()) {
    Fail("dictionary length {} does not match subspace length {}", dict.length(), sub.length());
  }
  Mat const resid = dict.atoms - (dict.atoms * sub.basis) * sub.basis.transpose();
  CompressionError e;
  e.per_atom = resid.rowwise().norm().cwiseQuotient(dict.atoms.rowwise().norm());
  e.average = e.per_atom.mean();
  return e;
}

void SaveSubspace(std::filesystem::path const &path, Subspace const &sub, io::Json const &meta)
{
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> const rm = sub.basis;
  io::WriteReal(path, {sub.length(), sub.rank()}, {rm.data(), static_cast<size_t>(rm.size())}, meta);
}

auto LoadSubspace(std::filesystem::path const &path) -> Subspace
{
  auto const a = io::ReadReal(path);
  if (a.shape.size() != 2) { Fail("{}: subspace must be 2-D", path.string()); }
  Subspace sub;
  sub.basis = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> const>(
    a.data.data(), a.shape[0], a.shape[1]);
  Mat const gram = sub.basis.transpose() * sub.basis - Mat::Identity(sub.rank(), sub.rank());
  if (gram.cwiseAbs().maxCoeff() > 1e-8) { Fail("{}: basis columns are not orthonormal", path.string()); }
  return sub;
}

} // namespace lsm
