#include <set>

#include <gtest/gtest.h>

#include "lsm/phantom.hpp"

using namespace lsm;

TEST(Phantom, DeterministicAndClassConsistent)
{
  auto const a = MakePhantom(96, 96, 3), b = MakePhantom(96, 96, 3);
  EXPECT_EQ(a.pd, b.pd);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(MakePhantom(96, 96, 4).pd, a.pd);
  std::set<int> seen;
  for (Index v = 0; v < a.grid.voxels(); v++) {
    int const l = a.labels[v];
    ASSERT_GE(l, 0);
    ASSERT_LE(l, 3);
    seen.insert(l);
    if (l == 0) {
      EXPECT_EQ(a.pd[v], Cx(0.0));
      EXPECT_EQ(a.t2[v], 0.0);
    } else {
      auto const tv = TissueTable(static_cast<Tissue>(l));
      EXPECT_EQ(a.t1[v], tv.t1);
      EXPECT_EQ(a.t2[v], tv.t2);
      EXPECT_EQ(a.t2star[v], tv.t2star);
      EXPECT_NEAR(std::abs(a.pd[v]), tv.pd, 0.15 * tv.pd);
    }
  }
  EXPECT_EQ(seen.size(), 4u);
  EXPECT_THROW(MakePhantom(16, 96, 0), Error);
}

TEST(Phantom, SaveLoadRoundTrip)
{
  auto const path = std::filesystem::temp_directory_path() / "lsm_test_phantom.bin";
  auto const p = MakePhantom(48, 40, 2);
  SavePhantom(path, p);
  auto const r = LoadPhantom(path);
  EXPECT_EQ(r.grid, p.grid);
  EXPECT_EQ(r.pd, p.pd);
  EXPECT_EQ(r.labels, p.labels);
  EXPECT_EQ(r.t2star, p.t2star);
}

TEST(Coils, RootSumOfSquaresIsOne)
{
  for (Index C : {1, 8}) {
    CxMat const s = MakeCoils(40, 48, C, 5);
    EXPECT_EQ(s.cols(), C);
    EXPECT_LT((s.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-12);
  }
  EXPECT_EQ(MakeCoils(40, 48, 8, 5), MakeCoils(40, 48, 8, 5));
  EXPECT_THROW(MakeCoils(8, 8, 0, 0), Error);
}

TEST(B0, PeakAndDeterminism)
{
  Vec const b = MakeB0Map(64, 64, 60.0, 9);
  EXPECT_NEAR(b.cwiseAbs().maxCoeff(), 60.0, 1e-9);
  EXPECT_EQ(b, MakeB0Map(64, 64, 60.0, 9));
  EXPECT_EQ(MakeB0Map(64, 64, 0.0, 9).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Masks, SampleCounts)
{
  auto const fse = MakeMaskShuffling(256, 80, 4, 1);
  EXPECT_EQ(fse.sampled_lines(), 320);
  EXPECT_EQ(fse.echoes(), 80);
  for (auto const &l : fse.lines) {
    EXPECT_EQ(l.size(), 4u);
    EXPECT_TRUE(std::is_sorted(l.begin(), l.end()));
    EXPECT_EQ(std::set<Index>(l.begin(), l.end()).size(), 4u);
  }
  EXPECT_EQ(MakeMaskShuffling(256, 32, 7, 1).sampled_lines(), 224);
  EXPECT_EQ(MakeMaskShuffling(256, 80, 4, 1).lines, fse.lines);

  auto const epti = MakeMaskEpti(216, 40, 2, 0);
  EXPECT_EQ(epti.sampled_lines(), 80);
  // Each shot stays in its own half.
  for (auto const &l : epti.lines) {
    EXPECT_LT(l[0], 108);
    EXPECT_GE(l[1], 108);
  }
  EXPECT_THROW(MakeMaskEpti(216, 40, 5, 0), Error);

  auto const rnd = MakeMaskRandom(96, 96, 80, 500, 3);
  EXPECT_EQ(rnd.sampled_lines(), 500);
  EXPECT_THROW(MakeMaskRandom(4, 4, 2, 9, 3), Error);
  EXPECT_THROW(MakeMaskShuffling(16, 8, 17, 0), Error);

  auto const cal = MakeMaskCalibration(96, 40, 22, 6);
  EXPECT_EQ(cal.sampled_lines(), 22 * 6);
  EXPECT_TRUE(cal.lines[6].empty());
  EXPECT_EQ(cal.lines[0].front(), 48 - 11);
}

TEST(Synthesis, UnsampledEntriesAreZero)
{
  auto const ph = MakePhantom(32, 32, 1);
  auto spec = SequenceSpec::FsePreset();
  spec.etl = 8;
  auto const mask = MakeMaskShuffling(32, 8, 3, 2);
  auto const r = SynthesizeKSpace(ph, spec, MakeCoils(32, 32, 2, 1), mask, {}, 0.1, 4);
  SaveKSpace(std::filesystem::temp_directory_path() / "lsm_test_k.bin", r.y);
  auto const back = LoadKSpace(std::filesystem::temp_directory_path() / "lsm_test_k.bin", mask);
  for (Index t = 0; t < 8; t++) {
    EXPECT_EQ(back.echoes[static_cast<size_t>(t)], r.y.echoes[static_cast<size_t>(t)]);
    for (Index line = 0; line < 32; line++) {
      if (!mask.contains(line, t)) { EXPECT_EQ(r.y.sample(5, line, 1, t), Cx(0.0)); }
    }
  }
}

TEST(Synthesis, NoiseEnergyAndZeroNoise)
{
  auto const ph = MakePhantom(32, 32, 1);
  auto spec = SequenceSpec::FsePreset();
  spec.etl = 8;
  auto const mask = MakeMaskShuffling(32, 8, 4, 2);
  auto const coils = MakeCoils(32, 32, 2, 1);
  auto const clean = SynthesizeKSpace(ph, spec, coils, mask, {}, 0.0, 0);
  EXPECT_EQ(clean.truth, SimulateTruth(ph, spec));
  EXPECT_EQ(AddNoise(clean.y, 0.0, 7).echoes, clean.y.echoes);

  double const sigma = 0.05;
  double energy = 0.0;
  for (std::uint64_t s = 0; s < 100; s++) { energy += (AddNoise(clean.y, sigma, s) - clean.y).squaredNorm(); }
  double const samples = static_cast<double>(32 * 2 * mask.sampled_lines());
  EXPECT_NEAR(energy / 100.0, samples * sigma * sigma, 0.05 * samples * sigma * sigma);
  EXPECT_THROW(AddNoise(clean.y, -1.0, 0), Error);
}

TEST(Synthesis, MixSeedSpreads)
{
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; i++) { seen.insert(MixSeed(7, i)); }
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(MixSeed(7, 3), MixSeed(7, 3));
}
