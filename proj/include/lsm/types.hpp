#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <fmt/format.h>

namespace lsm {

using Index = Eigen::Index;
using Cx = std::complex<double>;

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CxVec = Eigen::VectorXcd;
using CxMat = Eigen::MatrixXcd;

/// Thrown for every contract violation (bad shapes, invalid parameters,
/// divergence). Messages are single-line so the CLI can forward them.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

template <typename... Args>
[[noreturn]] void Fail(fmt::format_string<Args...> fmt, Args &&...args)
{
  throw Error(fmt::format(fmt, std::forward<Args>(args)...));
}

/// Image grid. Voxels are stored column-major: v = m + M * n, with m the
/// readout index and n the phase-encode index. Multi-channel images are
/// (M*N) x K matrices, so each channel is a contiguous M x N plane.
struct Grid
{
  Index M = 0;
  Index N = 0;

  auto voxels() const -> Index { return M * N; }
  auto operator==(Grid const &) const -> bool = default;
};

} // namespace lsm
