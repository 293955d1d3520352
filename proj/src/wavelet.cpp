#include "lsm/wavelet.hpp"

#include <array>

namespace lsm {

namespace {

constexpr std::array<double, 8> kLow{0.23037781330885523,  0.7148465705525415,  0.6308807679295904,
                                     -0.02798376941698385, -0.18703481171888114, 0.030841381835986965,
                                     0.032883011666982945, -0.010597401784997278};

constexpr auto High() -> std::array<double, 8>
{
  std::array<double, 8> g{};
  for (size_t k = 0; k < 8; k++) {
    g[k] = (k % 2 == 0 ? 1.0 : -1.0) * kLow[7 - k];
  }
  return g;
}
constexpr std::array<double, 8> kHigh = High();

// One analysis step on the first n entries of a strided 1-D signal.
void Analyze(double *x, Index n, Index stride, std::vector<double> &tmp)
{
  Index const h = n / 2;
  tmp.assign(static_cast<size_t>(n), 0.0);
  for (Index i = 0; i < h; i++) {
    double a = 0.0, d = 0.0;
    for (Index k = 0; k < 8; k++) {
      double const v = x[((2 * i + k) % n) * stride];
      a += kLow[static_cast<size_t>(k)] * v;
      d += kHigh[static_cast<size_t>(k)] * v;
    }
    tmp[static_cast<size_t>(i)] = a;
    tmp[static_cast<size_t>(h + i)] = d;
  }
  for (Index i = 0; i < n; i++) {
    x[i * stride] = tmp[static_cast<size_t>(i)];
  }
}

void Synthesize(double *x, Index n, Index stride, std::vector<double> &tmp)
{
  Index const h = n / 2;
  tmp.assign(static_cast<size_t>(n), 0.0);
  for (Index i = 0; i < h; i++) {
    double const a = x[i * stride], d = x[(h + i) * stride];
    for (Index k = 0; k < 8; k++) {
      tmp[static_cast<size_t>((2 * i + k) % n)] += kLow[static_cast<size_t>(k)] * a + kHigh[static_cast<size_t>(k)] * d;
    }
  }
  for (Index i = 0; i < n; i++) {
    x[i * stride] = tmp[static_cast<size_t>(i)];
  }
}

} // namespace

void CheckWaveletSize(Index M, Index N, Index levels)
{
  if (levels < 0) { Fail("wavelet levels must be >= 0"); }
  Index const f = Index{1} << levels;
  if (M % f != 0 || N % f != 0) { Fail("image {}x{} is not divisible by 2^{}", M, N, levels); }
  if (levels > 0 && (M / f < 1 || N / f < 1)) { Fail("too many wavelet levels for {}x{}", M, N); }
}

auto Dwt2(Mat const &image, Index levels) -> Mat
{
  CheckWaveletSize(image.rows(), image.cols(), levels);
  Mat c = image;
  std::vector<double> tmp;
  Index m = c.rows(), n = c.cols();
  for (Index l = 0; l < levels; l++) {
    for (Index j = 0; j < n; j++) {
      Analyze(&c(0, j), m, 1, tmp);
    }
    for (Index i = 0; i < m; i++) {
      Analyze(&c(i, 0), n, c.rows(), tmp);
    }
    m /= 2;
    n /= 2;
  }
  return c;
}

auto Idwt2(Mat const &coeffs, Index levels) -> Mat
{
  CheckWaveletSize(coeffs.rows(), coeffs.cols(), levels);
  Mat x = coeffs;
  std::vector<double> tmp;
  for (Index l = levels - 1; l >= 0; l--) {
    Index const m = x.rows() >> l, n = x.cols() >> l;
    for (Index i = 0; i < m; i++) {
      Synthesize(&x(i, 0), n, x.rows(), tmp);
    }
    for (Index j = 0; j < n; j++) {
      Synthesize(&x(0, j), m, 1, tmp);
    }
  }
  return x;
}

} // namespace lsm
