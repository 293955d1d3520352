#include "lsm/experiment.hpp"

#include "lsm/analysis.hpp"

namespace lsm {

auto ToString(MaskKind k) -> std::string
{
  switch (k) {
  case MaskKind::Shuffling: return "shuffling";
  case MaskKind::Random: return "random";
  case MaskKind::Epti: return "epti";
  }
  return "?";
}

auto ParseMaskKind(std::string const &s) -> MaskKind
{
  if (s == "shuffling") { return MaskKind::Shuffling; }
  if (s == "random") { return MaskKind::Random; }
  if (s == "epti") { return MaskKind::Epti; }
  Fail("unknown mask kind '{}' (expected shuffling, random or epti)", s);
}

auto ToString(PhaseSource p) -> std::string
{
  switch (p) {
  case PhaseSource::None: return "none";
  case PhaseSource::True: return "true";
  case PhaseSource::Estimated: return "estimated";
  }
  return "?";
}

auto ParsePhaseSource(std::string const &s) -> PhaseSource
{
  if (s == "none") { return PhaseSource::None; }
  if (s == "true") { return PhaseSource::True; }
  if (s == "estimated") { return PhaseSource::Estimated; }
  Fail("unknown phase source '{}' (expected none, true or estimated)", s);
}

void DatasetConfig::validate() const
{
  spec.validate();
  if (phantom_file.empty() && (M < 32 || N < 32)) { Fail("phantom grid must be at least 32x32, got {}x{}", M, N); }
  if (coils_file.empty() && coils < 1) { Fail("coil count must be >= 1, got {}", coils); }
  if (mask_file.empty()) {
    if (shots < 1) { Fail("shots must be >= 1, got {}", shots); }
    if (mask == MaskKind::Random && samples < 1) { Fail("random mask needs samples >= 1"); }
  }
  if (b0_peak_hz < 0.0) { Fail("b0_peak_hz must be >= 0"); }
  if (calib_lines < 0 || calib_echoes < 0 || (calib_lines > 0) != (calib_echoes > 0)) {
    Fail("calibration needs both lines and echoes > 0, or neither");
  }
  if (noise_relative < 0.0) { Fail("noise_relative must be >= 0"); }
}

auto DatasetConfig::derived_seed(std::uint64_t explicit_seed, std::uint64_t slot) const -> std::uint64_t
{
  return explicit_seed != 0 ? explicit_seed : MixSeed(seed, slot);
}

auto ToJson(DatasetConfig const &c) -> io::Json
{
  io::Json j;
  j["M"] = c.M;
  j["N"] = c.N;
  j["sequence"] = ToJson(c.spec);
  j["seed"] = c.seed;
  j["phantom"] = c.phantom_file.empty() ? io::Json{{"seed", c.derived_seed(c.phantom_seed, 1)}}
                                        : io::Json{{"file", c.phantom_file}};
  j["coils"] = c.coils_file.empty() ? io::Json{{"count", c.coils}, {"seed", c.derived_seed(c.coils_seed, 2)}}
                                    : io::Json{{"file", c.coils_file}};
  if (c.mask_file.empty()) {
    j["mask"] = {{"kind", ToString(c.mask)}, {"shots", c.shots}, {"seed", c.derived_seed(c.mask_seed, 3)}};
    if (c.mask == MaskKind::Random) { j["mask"]["samples"] = c.samples; }
  } else {
    j["mask"] = {{"file", c.mask_file}};
  }
  if (!c.b0_file.empty()) {
    j["b0"] = {{"file", c.b0_file}};
  } else if (c.b0_peak_hz > 0.0) {
    j["b0"] = {{"peak_hz", c.b0_peak_hz}, {"seed", c.derived_seed(c.b0_seed, 4)}};
  }
  if (c.calib_lines > 0) { j["calibration"] = {{"lines", c.calib_lines}, {"echoes", c.calib_echoes}}; }
  j["noise"] = {{"seed", c.derived_seed(c.noise_seed, 5)}};
  if (c.noise_sigma >= 0.0) {
    j["noise"]["sigma"] = c.noise_sigma;
  } else {
    j["noise"]["relative"] = c.noise_relative;
  }
  return j;
}

namespace {

auto Resolve(std::filesystem::path const &base, std::string const &p) -> std::string
{
  if (p.empty() || base.empty() || std::filesystem::path(p).is_absolute()) { return p; }
  return (base / p).string();
}

auto SubSeed(io::Json const &j, char const *key) -> std::uint64_t
{
  return j.contains(key) ? j[key].value("seed", std::uint64_t{0}) : 0;
}

} // namespace

auto DatasetConfigFromJson(io::Json const &j, std::filesystem::path const &base) -> DatasetConfig
{
  DatasetConfig c;
  c.M = j.value("M", c.M);
  c.N = j.value("N", c.N);
  if (j.contains("sequence")) { c.spec = SequenceSpecFromJson(j["sequence"]); }
  c.seed = j.value("seed", c.seed);
  if (j.contains("phantom")) {
    c.phantom_file = Resolve(base, j["phantom"].value("file", std::string{}));
    c.phantom_seed = SubSeed(j, "phantom");
  }
  if (j.contains("coils")) {
    c.coils_file = Resolve(base, j["coils"].value("file", std::string{}));
    c.coils = j["coils"].value("count", c.coils);
    c.coils_seed = SubSeed(j, "coils");
  }
  if (j.contains("mask")) {
    auto const &m = j["mask"];
    c.mask_file = Resolve(base, m.value("file", std::string{}));
    if (m.contains("kind")) { c.mask = ParseMaskKind(m["kind"].get<std::string>()); }
    c.shots = m.value("shots", c.shots);
    c.samples = m.value("samples", c.samples);
    c.mask_seed = SubSeed(j, "mask");
  }
  if (j.contains("b0")) {
    c.b0_file = Resolve(base, j["b0"].value("file", std::string{}));
    c.b0_peak_hz = j["b0"].value("peak_hz", c.b0_peak_hz);
    c.b0_seed = SubSeed(j, "b0");
  }
  if (j.contains("calibration")) {
    c.calib_lines = j["calibration"].value("lines", Index{0});
    c.calib_echoes = j["calibration"].value("echoes", Index{0});
  }
  if (j.contains("noise")) {
    c.noise_relative = j["noise"].value("relative", c.noise_relative);
    c.noise_sigma = j["noise"].value("sigma", c.noise_sigma);
    c.noise_seed = SubSeed(j, "noise");
  }
  c.validate();
  return c;
}

auto BuildDataset(DatasetConfig const &c) -> Dataset
{
  c.validate();
  Dataset d;
  d.config = c;
  d.phantom = c.phantom_file.empty() ? MakePhantom(c.M, c.N, c.derived_seed(c.phantom_seed, 1)) : LoadPhantom(c.phantom_file);
  Grid const g = d.phantom.grid;
  if (c.coils_file.empty()) {
    d.coils = MakeCoils(g.M, g.N, c.coils, c.derived_seed(c.coils_seed, 2));
  } else {
    auto r = io::ReadCxMaps(c.coils_file);
    if (r.grid != g) { Fail("{}: coil grid {}x{} differs from phantom {}x{}", c.coils_file, r.grid.M, r.grid.N, g.M, g.N); }
    d.coils = std::move(r.maps);
  }
  if (c.mask_file.empty()) {
    auto const ms = c.derived_seed(c.mask_seed, 3);
    switch (c.mask) {
    case MaskKind::Shuffling: d.mask = MakeMaskShuffling(g.N, c.spec.etl, c.shots, ms); break;
    case MaskKind::Random: d.mask = MakeMaskRandom(g.N, g.M, c.spec.etl, c.samples, ms); break;
    case MaskKind::Epti: d.mask = MakeMaskEpti(g.N, c.spec.etl, c.shots, ms); break;
    }
  } else {
    d.mask = LoadMask(c.mask_file);
  }
  if (d.mask.n_pe != g.N || d.mask.echoes() != c.spec.etl) {
    Fail("mask is {} lines x {} echoes, data needs {} x {}", d.mask.n_pe, d.mask.echoes(), g.N, c.spec.etl);
  }
  if (!c.b0_file.empty()) {
    auto r = io::ReadRealMaps(c.b0_file);
    if (r.grid != g || r.maps.cols() != 1) { Fail("{}: B0 map must be a single {}x{} map", c.b0_file, g.M, g.N); }
    d.b0 = r.maps.col(0);
  } else if (c.b0_peak_hz > 0.0) {
    d.b0 = MakeB0Map(g.M, g.N, c.b0_peak_hz, c.derived_seed(c.b0_seed, 4));
  }

  auto clean = SynthesizeKSpace(d.phantom, c.spec, d.coils, d.mask, d.b0, 0.0, 0);
  d.truth = std::move(clean.truth);
  d.clean = std::move(clean.y);
  d.sigma = c.noise_sigma >= 0.0 ? c.noise_sigma : c.noise_relative * d.clean.maxAbs();
  d.y = AddNoise(d.clean, d.sigma, c.derived_seed(c.noise_seed, 5));
  if (c.calib_lines > 0) {
    auto const cm = MakeMaskCalibration(g.N, c.spec.etl, c.calib_lines, c.calib_echoes);
    auto cal = SynthesizeKSpace(d.phantom, c.spec, d.coils, cm, d.b0, 0.0, 0);
    d.calib = AddNoise(cal.y, d.sigma, MixSeed(c.derived_seed(c.noise_seed, 5), 0xCA11B));
  }
  d.region = d.phantom.support();
  return d;
}

auto Renoise(Dataset const &d, std::uint64_t noise_seed) -> KSpaceData { return AddNoise(d.clean, d.sigma, noise_seed); }

auto MakeOperator(Dataset const &d, PhaseSource phase) -> EncodingOperator
{
  Grid const g = d.grid();
  switch (phase) {
  case PhaseSource::None: return EncodingOperator(g, d.coils, d.mask);
  case PhaseSource::True:
    return EncodingOperator(g, d.coils, d.mask, d.b0.size() > 0 ? BuildPhase(d.b0, d.config.spec) : CxMat{});
  case PhaseSource::Estimated:
    if (!d.calib) { Fail("estimated phase needs a calibration scan in the dataset"); }
    return EncodingOperator(g, d.coils, d.mask, BuildPhase(EstimateB0Lowres(*d.calib, d.config.spec), d.config.spec));
  }
  Fail("invalid phase source");
}

auto Manifest::dictionary() const -> SignalDictionary
{
  if (!dictionary_file.empty()) {
    auto d = LoadDictionary(dictionary_file);
    if (d.length() != data.spec.etl) {
      Fail("{}: dictionary has {} echoes, sequence has {}", dictionary_file, d.length(), data.spec.etl);
    }
    return d;
  }
  if (!dictionary_grid) { Fail("manifest names no dictionary (set dictionary.file or dictionary.grid)"); }
  return BuildDictionary(data.spec, *dictionary_grid);
}

auto Manifest::subspace() const -> Subspace
{
  if (!subspace_file.empty()) { return LoadSubspace(subspace_file); }
  if (subspace_rank < 1) { Fail("manifest names no subspace (set subspace.file or subspace.rank)"); }
  return FitSubspace(dictionary(), subspace_rank);
}

auto Manifest::autoencoder() const -> AutoEncoder
{
  if (ae_file.empty()) { Fail("manifest names no autoencoder (set ae)"); }
  auto ae = LoadAutoEncoder(ae_file);
  if (ae.length() != data.spec.etl) { Fail("{}: network expects {} echoes, sequence has {}", ae_file, ae.length(), data.spec.etl); }
  return ae;
}

auto Manifest::model_t1() const -> double
{
  if (dictionary_grid) { return dictionary_grid->t1_values.front(); }
  if (!dictionary_file.empty()) { return LoadDictionary(dictionary_file).grid.t1_values.front(); }
  return 1000.0;
}

auto ToJson(Manifest const &m) -> io::Json
{
  io::Json j;
  j["data"] = ToJson(m.data);
  if (!m.dictionary_file.empty()) {
    j["dictionary"] = {{"file", m.dictionary_file}};
  } else if (m.dictionary_grid) {
    j["dictionary"] = {{"grid", ToJson(*m.dictionary_grid)}};
  }
  if (!m.ae_file.empty()) { j["ae"] = m.ae_file; }
  if (!m.subspace_file.empty()) {
    j["subspace"] = {{"file", m.subspace_file}};
  } else if (m.subspace_rank > 0) {
    j["subspace"] = {{"rank", m.subspace_rank}};
  }
  j["recon"] = ToJson(m.recon);
  j["phase"] = ToString(m.phase);
  j["region"] = m.region_support ? "support" : "all";
  if (!m.output.empty()) { j["output"] = m.output; }
  return j;
}

auto ManifestFromJson(io::Json const &j, std::filesystem::path const &base) -> Manifest
{
  Manifest m;
  m.data = DatasetConfigFromJson(j.value("data", io::Json::object()), base);
  if (j.contains("dictionary")) {
    auto const &d = j["dictionary"];
    m.dictionary_file = Resolve(base, d.value("file", std::string{}));
    if (d.contains("grid")) { m.dictionary_grid = ParamGridFromJson(d["grid"]); }
  }
  m.ae_file = Resolve(base, j.value("ae", std::string{}));
  if (j.contains("subspace")) {
    m.subspace_file = Resolve(base, j["subspace"].value("file", std::string{}));
    m.subspace_rank = j["subspace"].value("rank", Index{0});
  }
  m.recon = ReconConfigFromJson(j.value("recon", io::Json::object()));
  m.phase = ParsePhaseSource(j.value("phase", std::string{"true"}));
  auto const region = j.value("region", std::string{"support"});
  if (region != "support" && region != "all") { Fail("region must be 'support' or 'all', got '{}'", region); }
  m.region_support = region == "support";
  m.output = Resolve(base, j.value("output", std::string{}));
  return m;
}

auto ToString(Method m) -> std::string
{
  switch (m) {
  case Method::Linear: return "linear";
  case Method::Latent: return "latent";
  case Method::Epg: return "epg";
  }
  return "?";
}

auto ParseMethod(std::string const &s) -> Method
{
  if (s == "linear") { return Method::Linear; }
  if (s == "latent") { return Method::Latent; }
  if (s == "epg") { return Method::Epg; }
  Fail("unknown recon method '{}' (expected linear, latent or epg)", s);
}

auto ToJson(Recipe const &r) -> io::Json
{
  auto j = ToJson(r.cfg);
  j["name"] = r.name;
  j["method"] = ToString(r.method);
  if (r.method == Method::Linear) { j["rank"] = r.rank; }
  return j;
}

auto RecipeFromJson(io::Json const &j, ReconConfig const &base) -> Recipe
{
  Recipe r;
  r.method = ParseMethod(j.at("method").get<std::string>());
  r.rank = j.value("rank", Index{0});
  if (r.method == Method::Linear && r.rank < 1) { Fail("linear recipe needs rank >= 1"); }
  r.name = j.value("name", r.method == Method::Linear ? fmt::format("linear{}", r.rank) : ToString(r.method));
  r.cfg = ReconConfigFromJson(j, base);
  return r;
}

auto Models::subspace(Index rank) const -> Subspace const &
{
  for (auto const &s : subspaces) {
    if (s.rank() == rank) { return s; }
  }
  Fail("no subspace of rank {} loaded", rank);
}

auto LoadModels(Manifest const &m, std::vector<Recipe> const &recipes) -> Models
{
  Models out;
  out.spec = m.data.spec;
  for (auto const &r : recipes) {
    switch (r.method) {
    case Method::Latent:
      if (!out.ae) { out.ae = m.autoencoder(); }
      break;
    case Method::Linear: {
      bool have = false;
      for (auto const &s : out.subspaces) { have = have || s.rank() == r.rank; }
      if (have) { break; }
      if (!m.subspace_file.empty()) {
        auto s = LoadSubspace(m.subspace_file);
        if (s.rank() != r.rank) { Fail("{}: subspace rank {} but recipe asks for {}", m.subspace_file, s.rank(), r.rank); }
        out.subspaces.push_back(std::move(s));
      } else {
        if (!out.dict) { out.dict = m.dictionary(); }
        out.subspaces.push_back(FitSubspace(*out.dict, r.rank));
      }
      break;
    }
    case Method::Epg:
      if (out.spec.kind != SequenceKind::FSE) { Fail("EPG recon needs an FSE sequence"); }
      break;
    }
  }
  out.t1 = m.model_t1();
  return out;
}

auto RunRecipe(Recipe const &r, KSpaceData const &y, EncodingOperator const &op, Models const &models,
               std::optional<EpgMaps> const &epg_init) -> ReconOutput
{
  ReconOutput out;
  switch (r.method) {
  case Method::Linear: {
    auto const &sub = models.subspace(r.rank);
    auto res = ReconLinear(y, op, sub, r.cfg);
    out.images = ExpandLinear(sub, res.alpha);
    out.alpha = std::move(res.alpha);
    out.log = std::move(res.log);
    out.seconds_per_iter = res.seconds_per_iter;
    out.step = res.step;
    break;
  }
  case Method::Latent: {
    if (!models.ae) { Fail("latent recipe without an autoencoder"); }
    auto res = ReconLatent(y, op, *models.ae, r.cfg);
    out.images = ExpandLatent(*models.ae, res.img);
    out.latent = std::move(res.img);
    out.log = std::move(res.log);
    out.seconds_per_iter = res.seconds_per_iter;
    break;
  }
  case Method::Epg: {
    auto res = ReconEpg(y, op, models.spec, models.t1, epg_init, r.cfg);
    out.images = ExpandEpg(res.maps.t2, res.maps.rho, models.spec, models.t1, r.cfg.epg_normalize);
    out.epg = std::move(res.maps);
    out.log = std::move(res.log);
    out.seconds_per_iter = res.seconds_per_iter;
    break;
  }
  }
  return out;
}

auto LoadManifest(std::filesystem::path const &path) -> Manifest
{
  return ManifestFromJson(io::ReadJson(path), path.parent_path());
}

} // namespace lsm
