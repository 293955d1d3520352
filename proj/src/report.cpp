#include "lsm/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

namespace lsm {

struct CsvWriter::Impl
{
  std::ofstream out;
};

CsvWriter::CsvWriter(std::filesystem::path const &path, std::vector<std::string> const &header)
  : impl_(new Impl)
  , width_(header.size())
{
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    Fail("cannot open {} for writing", path.string());
  }
  row(header);
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(std::vector<std::string> const &cells)
{
  if (cells.size() != width_) { Fail("csv row has {} cells, header has {}", cells.size(), width_); }
  for (size_t i = 0; i < cells.size(); i++) { impl_->out << (i ? "," : "") << cells[i]; }
  impl_->out << '\n';
}

auto CsvWriter::Num(double v) -> std::string { return fmt::format("{:.10g}", v); }

void WritePgm(std::filesystem::path const &path, Grid g, Vec const &plane, double lo, double hi)
{
  if (plane.size() != g.voxels()) { Fail("pgm plane has {} values, grid has {}", plane.size(), g.voxels()); }
  if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
  std::ofstream out(path, std::ios::binary);
  if (!out) { Fail("cannot open {} for writing", path.string()); }
  out << "P5\n" << g.N << ' ' << g.M << "\n255\n";
  double const span = hi > lo ? hi - lo : 1.0;
  for (Index m = 0; m < g.M; m++) {
    for (Index n = 0; n < g.N; n++) {
      double const u = std::clamp((plane[m + g.M * n] - lo) / span, 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(u * 255.0))));
    }
  }
  io::WriteJson(io::SidecarPath(path), {{"window", {lo, hi}}, {"M", g.M}, {"N", g.N}});
}

auto DisplayEchoes(Index T) -> std::vector<Index>
{
  std::vector<Index> e{0, T / 4, T / 2, T - 1};
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return e;
}

void WriteEchoImages(std::filesystem::path const &dir, std::string const &prefix, Grid g, CxMat const &estimate,
                     CxMat const &truth, std::vector<Index> const &echoes)
{
  for (Index t : echoes) {
    if (t < 0 || t >= truth.cols()) { Fail("display echo {} out of range", t); }
    Vec const ref = truth.col(t).cwiseAbs();
    Vec const est = estimate.col(t).cwiseAbs();
    double const lo = ref.minCoeff(), hi = ref.maxCoeff();
    WritePgm(dir / fmt::format("{}_echo{:03d}.pgm", prefix, t), g, est, lo, hi);
    WritePgm(dir / fmt::format("{}_error{:03d}.pgm", prefix, t), g, (est - ref).cwiseAbs(), 0.0, hi / 4.0);
  }
}

void WriteMetricsCsv(std::filesystem::path const &path, EchoMetrics const &m)
{
  CsvWriter w(path, {"echo_index", "nrmse"});
  for (Index t = 0; t < m.per_echo.size(); t++) { w.row({std::to_string(t), CsvWriter::Num(m.per_echo[t])}); }
}

void WriteObjectiveCsv(std::filesystem::path const &path, std::vector<ObjectiveEntry> const &log)
{
  CsvWriter w(path, {"iter", "data", "reg", "total"});
  for (auto const &e : log) {
    w.row({std::to_string(e.iter), CsvWriter::Num(e.data), CsvWriter::Num(e.reg), CsvWriter::Num(e.data + e.reg)});
  }
}

} // namespace lsm
