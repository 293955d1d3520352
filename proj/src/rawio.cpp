#include "lsm/rawio.hpp"

#include <bit>
#include <fstream>
#include <numeric>

namespace lsm::io {

static_assert(std::endian::native == std::endian::little, "raw array files are little-endian");

namespace {

auto Product(std::vector<Index> const &shape) -> Index
{
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

template <typename T>
void WriteImpl(std::filesystem::path const &path,
               std::vector<Index> const &shape,
               std::span<T const> data,
               Json meta,
               char const *dtype)
{
  if (Product(shape) != static_cast<Index>(data.size())) {
    Fail("{}: shape holds {} elements but {} were given", path.string(), Product(shape), data.size());
  }
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::binary);
  if (!out) { Fail("cannot open {} for writing", path.string()); }
  out.write(reinterpret_cast<char const *>(data.data()), static_cast<std::streamsize>(data.size_bytes()));
  if (!out) { Fail("short write to {}", path.string()); }

  meta["shape"] = shape;
  meta["dtype"] = dtype;
  WriteJson(SidecarPath(path), meta);
}

template <typename T>
auto ReadImpl(std::filesystem::path const &path, char const *dtype) -> Array<T>
{
  Array<T> a;
  a.meta = ReadJson(SidecarPath(path));
  if (!a.meta.contains("shape") || !a.meta.contains("dtype")) {
    Fail("{}: sidecar lacks shape/dtype", path.string());
  }
  if (a.meta["dtype"].template get<std::string>() != dtype) {
    Fail("{}: expected dtype {} but sidecar says {}", path.string(), dtype, a.meta["dtype"].template get<std::string>());
  }
  a.shape = a.meta["shape"].template get<std::vector<Index>>();
  auto const n = Product(a.shape);
  auto const bytes = static_cast<std::uintmax_t>(n) * sizeof(T);
  if (!std::filesystem::exists(path)) { Fail("missing file {}", path.string()); }
  if (std::filesystem::file_size(path) != bytes) {
    Fail("{}: expected {} bytes, found {}", path.string(), bytes, std::filesystem::file_size(path));
  }
  a.data.resize(static_cast<size_t>(n));
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char *>(a.data.data()), static_cast<std::streamsize>(bytes));
  if (!in) { Fail("short read from {}", path.string()); }
  return a;
}

} // namespace

template <typename T>
auto Array<T>::size() const -> Index
{
  return Product(shape);
}
template struct Array<double>;
template struct Array<Cx>;

auto SidecarPath(std::filesystem::path const &path) -> std::filesystem::path
{
  return std::filesystem::path(path.string() + ".json");
}

void WriteReal(std::filesystem::path const &path, std::vector<Index> const &shape, std::span<double const> data, Json const &meta)
{
  WriteImpl<double>(path, shape, data, meta, "f64");
}

void WriteComplex(std::filesystem::path const &path, std::vector<Index> const &shape, std::span<Cx const> data, Json const &meta)
{
  WriteImpl<Cx>(path, shape, data, meta, "c128");
}

auto ReadReal(std::filesystem::path const &path) -> RealArray { return ReadImpl<double>(path, "f64"); }
auto ReadComplex(std::filesystem::path const &path) -> CxArray { return ReadImpl<Cx>(path, "c128"); }

namespace {

template <typename Scalar>
auto ToMapOrder(Grid g, Eigen::Matrix<Scalar, -1, -1> const &maps) -> std::vector<Scalar>
{
  if (maps.rows() != g.voxels()) { Fail("map has {} rows, grid has {} voxels", maps.rows(), g.voxels()); }
  std::vector<Scalar> out(static_cast<size_t>(maps.size()));
  Index const K = maps.cols();
  for (Index n = 0; n < g.N; n++) {
    for (Index m = 0; m < g.M; m++) {
      for (Index k = 0; k < K; k++) {
        out[static_cast<size_t>((m * g.N + n) * K + k)] = maps(m + g.M * n, k);
      }
    }
  }
  return out;
}

template <typename Scalar>
auto FromMapOrder(std::vector<Index> const &shape, std::vector<Scalar> const &data, std::filesystem::path const &path)
  -> std::pair<Grid, Eigen::Matrix<Scalar, -1, -1>>
{
  if (shape.size() != 2 && shape.size() != 3) { Fail("{}: maps must have shape [M, N] or [M, N, K]", path.string()); }
  Grid const g{shape[0], shape[1]};
  Index const K = shape.size() == 3 ? shape[2] : 1;
  Eigen::Matrix<Scalar, -1, -1> maps(g.voxels(), K);
  for (Index n = 0; n < g.N; n++) {
    for (Index m = 0; m < g.M; m++) {
      for (Index k = 0; k < K; k++) {
        maps(m + g.M * n, k) = data[static_cast<size_t>((m * g.N + n) * K + k)];
      }
    }
  }
  return {g, maps};
}

} // namespace

void WriteMaps(std::filesystem::path const &path, Grid g, Mat const &maps, Json const &meta)
{
  auto const d = ToMapOrder<double>(g, maps);
  WriteReal(path, {g.M, g.N, maps.cols()}, d, meta);
}

void WriteMaps(std::filesystem::path const &path, Grid g, CxMat const &maps, Json const &meta)
{
  auto const d = ToMapOrder<Cx>(g, maps);
  WriteComplex(path, {g.M, g.N, maps.cols()}, d, meta);
}

auto ReadRealMaps(std::filesystem::path const &path) -> RealMaps
{
  auto a = ReadReal(path);
  auto [g, m] = FromMapOrder<double>(a.shape, a.data, path);
  return {g, std::move(m), std::move(a.meta)};
}

auto ReadCxMaps(std::filesystem::path const &path) -> CxMaps
{
  auto a = ReadComplex(path);
  auto [g, m] = FromMapOrder<Cx>(a.shape, a.data, path);
  return {g, std::move(m), std::move(a.meta)};
}

auto ReadJson(std::filesystem::path const &path) -> Json
{
  std::ifstream in(path);
  if (!in) { Fail("missing file {}", path.string()); }
  try {
    return Json::parse(in);
  } catch (Json::exception const &e) {
    Fail("{}: invalid JSON ({})", path.string(), e.what());
  }
}

void WriteJson(std::filesystem::path const &path, Json const &j)
{
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  std::ofstream out(path);
  if (!out) { Fail("cannot open {} for writing", path.string()); }
  out << j.dump(2) << '\n';
}

} // namespace lsm::io
