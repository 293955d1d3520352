#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "analysis.hpp"

namespace lsm {

/// Minimal CSV writer; numbers use %.10g.
class CsvWriter
{
public:
  CsvWriter(std::filesystem::path const &path, std::vector<std::string> const &header);
  ~CsvWriter();
  CsvWriter(CsvWriter const &) = delete;
  auto operator=(CsvWriter const &) -> CsvWriter & = delete;

  void row(std::vector<std::string> const &cells);
  static auto Num(double v) -> std::string;

private:
  struct Impl;
  Impl *impl_;
  size_t width_;
};

/// 8-bit binary PGM of one M x N plane (rows = readout index). Values are
/// clipped to [lo, hi]; the window goes into a JSON sidecar.
void WritePgm(std::filesystem::path const &path, Grid g, Vec const &plane, double lo, double hi);

/// Magnitude images of the chosen echoes, windowed by the truth echo's
/// min/max, plus error maps windowed to [0, max truth / 4].
void WriteEchoImages(std::filesystem::path const &dir, std::string const &prefix, Grid g, CxMat const &estimate,
                     CxMat const &truth, std::vector<Index> const &echoes);

void WriteMetricsCsv(std::filesystem::path const &path, EchoMetrics const &m);
void WriteObjectiveCsv(std::filesystem::path const &path, std::vector<ObjectiveEntry> const &log);

/// Default echo selection for images: first, a quarter, half and last.
auto DisplayEchoes(Index T) -> std::vector<Index>;

} // namespace lsm
