#include <gtest/gtest.h>

#include "lsm/experiment.hpp"

using namespace lsm;

namespace {

auto SmallConfig() -> DatasetConfig
{
  DatasetConfig c;
  c.M = c.N = 32;
  c.spec.etl = 80;
  c.coils = 3;
  c.noise_relative = 0.01;
  c.seed = 5;
  return c;
}

} // namespace

TEST(Dataset, DeterministicAndSeedsIndependent)
{
  auto const c = SmallConfig();
  auto const a = BuildDataset(c), b = BuildDataset(c);
  EXPECT_EQ(a.y.echoes, b.y.echoes);
  EXPECT_EQ(a.mask.lines, b.mask.lines);
  EXPECT_NEAR(a.sigma, 0.01 * a.clean.maxAbs(), 1e-15);

  // Changing only the noise seed leaves every other component untouched.
  auto c2 = c;
  c2.noise_seed = 99;
  auto const d = BuildDataset(c2);
  EXPECT_EQ(d.clean.echoes, a.clean.echoes);
  EXPECT_EQ(d.coils, a.coils);
  EXPECT_NE(d.y.echoes, a.y.echoes);
  EXPECT_EQ(Renoise(a, 99).echoes, d.y.echoes);

  EXPECT_NE(c.derived_seed(0, 1), c.derived_seed(0, 2));
  EXPECT_EQ(c.derived_seed(17, 1), 17u);
}

TEST(Dataset, JsonRoundTripRebuildsSameData)
{
  auto c = SmallConfig();
  c.b0_peak_hz = 30.0;
  c.calib_lines = 8;
  c.calib_echoes = 4;
  auto const back = DatasetConfigFromJson(ToJson(c));
  auto const a = BuildDataset(c), b = BuildDataset(back);
  EXPECT_EQ(a.y.echoes, b.y.echoes);
  EXPECT_EQ(a.b0, b.b0);
  ASSERT_TRUE(b.calib.has_value());
  EXPECT_EQ(a.calib->echoes, b.calib->echoes);
  EXPECT_EQ(b.calib->lines[0].size(), 8u);
}

TEST(Dataset, OperatorPhaseSources)
{
  auto c = SmallConfig();
  c.spec = SequenceSpec::EptiPreset();
  c.mask = MaskKind::Epti;
  c.shots = 2;
  c.b0_peak_hz = 25.0;
  auto const d = BuildDataset(c);
  EXPECT_FALSE(MakeOperator(d, PhaseSource::None).has_phase());
  EXPECT_TRUE(MakeOperator(d, PhaseSource::True).has_phase());
  EXPECT_THROW(MakeOperator(d, PhaseSource::Estimated), Error);
}

TEST(Dataset, ValidationErrors)
{
  auto c = SmallConfig();
  c.calib_lines = 4;
  EXPECT_THROW(c.validate(), Error);
  c = SmallConfig();
  c.M = 8;
  EXPECT_THROW(BuildDataset(c), Error);
  EXPECT_THROW(DatasetConfigFromJson(io::Json::parse(R"({"mask":{"kind":"spiral"}})")), Error);
}

TEST(Manifest, ParsesAndResolvesPaths)
{
  auto const j = io::Json::parse(R"({
    "data": {"M": 32, "N": 32, "coils": {"count": 2}, "noise": {"relative": 0.0}},
    "dictionary": {"grid": {"t1": 1000, "t2": {"lo": 50, "hi": 400, "step": 5}}},
    "ae": "models/ae.bin",
    "subspace": {"rank": 3},
    "recon": {"iters": 5},
    "phase": "none",
    "region": "all"
  })");
  auto const m = ManifestFromJson(j, "/data/run");
  EXPECT_EQ(m.ae_file, "/data/run/models/ae.bin");
  EXPECT_EQ(m.recon.iters, 5);
  EXPECT_EQ(m.phase, PhaseSource::None);
  EXPECT_FALSE(m.region_support);
  EXPECT_EQ(m.model_t1(), 1000.0);
  EXPECT_EQ(m.subspace().rank(), 3);
  EXPECT_THROW(ManifestFromJson(io::Json::parse(R"({"region":"half"})")), Error);
}

TEST(Recipes, ParseAndRun)
{
  auto const r = RecipeFromJson(io::Json::parse(R"({"method":"linear","rank":2,"iters":4})"));
  EXPECT_EQ(r.name, "linear2");
  EXPECT_EQ(r.cfg.iters, 4);
  EXPECT_THROW(RecipeFromJson(io::Json::parse(R"({"method":"linear"})")), Error);
  EXPECT_THROW(RecipeFromJson(io::Json::parse(R"({"method":"magic"})")), Error);

  Manifest m;
  m.data = SmallConfig();
  m.dictionary_grid = ParamGrid{{1000.0}, ParamGrid::Range(50, 400, 5)};
  auto const models = LoadModels(m, {r});
  auto const d = BuildDataset(m.data);
  auto const out = RunRecipe(r, d.y, MakeOperator(d, PhaseSource::True), models);
  EXPECT_EQ(out.images.rows(), 32 * 32);
  EXPECT_EQ(out.images.cols(), 80);
  EXPECT_EQ(out.log.size(), 5u);
  EXPECT_THROW(models.subspace(3), Error);

  Recipe latent;
  latent.method = Method::Latent;
  EXPECT_THROW(LoadModels(m, {latent}), Error); // no network named
}
