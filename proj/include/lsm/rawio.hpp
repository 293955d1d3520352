#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "types.hpp"

namespace lsm::io {

using Json = nlohmann::json;

// Arrays are stored as raw little-endian bytes in row-major order (last
// shape entry fastest) with a JSON sidecar at "<path>.json":
//   {"shape": [...], "dtype": "f64" | "c128", ...metadata}
// Complex arrays are interleaved (re, im) 64-bit pairs.

template <typename T>
struct Array
{
  std::vector<Index> shape;
  std::vector<T> data;
  Json meta;

  auto size() const -> Index;
};

using RealArray = Array<double>;
using CxArray = Array<Cx>;

auto SidecarPath(std::filesystem::path const &path) -> std::filesystem::path;

void WriteReal(std::filesystem::path const &path,
               std::vector<Index> const &shape,
               std::span<double const> data,
               Json const &meta = Json::object());
void WriteComplex(std::filesystem::path const &path,
                  std::vector<Index> const &shape,
                  std::span<Cx const> data,
                  Json const &meta = Json::object());

auto ReadReal(std::filesystem::path const &path) -> RealArray;
auto ReadComplex(std::filesystem::path const &path) -> CxArray;

// Voxel maps (V x K matrices on a Grid) are stored with shape [M, N, K].
void WriteMaps(std::filesystem::path const &path, Grid g, Mat const &maps, Json const &meta = Json::object());
void WriteMaps(std::filesystem::path const &path, Grid g, CxMat const &maps, Json const &meta = Json::object());
struct RealMaps
{
  Grid grid;
  Mat maps;
  Json meta;
};
struct CxMaps
{
  Grid grid;
  CxMat maps;
  Json meta;
};
auto ReadRealMaps(std::filesystem::path const &path) -> RealMaps;
auto ReadCxMaps(std::filesystem::path const &path) -> CxMaps;

auto ReadJson(std::filesystem::path const &path) -> Json;
void WriteJson(std::filesystem::path const &path, Json const &j);

} // namespace lsm::io
