// Command-line front end: dictionaries, models, synthetic data and reconstructions.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lsm/analysis.hpp"
#include "lsm/experiment.hpp"
#include "lsm/report.hpp"

using namespace lsm;
namespace fs = std::filesystem;

namespace {

auto JsonArg(std::string const &s) -> io::Json
{
  if (!s.empty() && (s.front() == '{' || s.front() == '[')) {
    try {
      return io::Json::parse(s);
    } catch (io::Json::exception const &e) {
      Fail("invalid inline JSON ({})", e.what());
    }
  }
  return io::ReadJson(s);
}

void WriteConfig(fs::path const &out, bool is_dir, std::string const &command, io::Json cfg)
{
  cfg["command"] = command;
  io::WriteJson(is_dir ? out / "config.json" : fs::path(out.string() + ".config.json"), cfg);
}

auto Seconds(std::chrono::steady_clock::time_point t0) -> double
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

auto Region(Dataset const &d, Manifest const &m) -> std::vector<bool>
{
  return m.region_support ? d.region : std::vector<bool>{};
}

// ---- dictionaries and models ----------------------------------------------

struct SimulateDictArgs
{
  std::string spec, grid, out;
};

void SimulateDict(SimulateDictArgs const &a)
{
  auto const spec = SequenceSpecFromJson(JsonArg(a.spec));
  auto const grid = ParamGridFromJson(JsonArg(a.grid));
  auto const t0 = std::chrono::steady_clock::now();
  auto const dict = BuildDictionary(spec, grid);
  SaveDictionary(a.out, dict);
  WriteConfig(a.out, false, "simulate-dict", {{"spec", ToJson(spec)}, {"grid", ToJson(grid)}});
  fmt::print("{} atoms x {} echoes in {:.2f}s -> {}\n", dict.size(), dict.length(), Seconds(t0), a.out);
}

struct FitSubspaceArgs
{
  std::string dict, out, weighting = "raw";
  Index rank = 4;
};

void FitSubspaceCmd(FitSubspaceArgs const &a)
{
  auto const dict = LoadDictionary(a.dict);
  if (a.weighting != "raw" && a.weighting != "normalized") { Fail("weighting must be raw or normalized"); }
  auto const w = a.weighting == "raw" ? SubspaceWeighting::Raw : SubspaceWeighting::Normalized;
  auto const sub = FitSubspace(dict, a.rank, w);
  io::Json const cfg{{"dict", a.dict}, {"B", a.rank}, {"weighting", a.weighting}};
  SaveSubspace(a.out, sub, cfg);
  WriteConfig(a.out, false, "fit-subspace", cfg);
  fmt::print("rank {} subspace, train NRMSE {:.4f}% -> {}\n", a.rank, 100.0 * CompressionNrmse(sub, dict).average, a.out);
}

struct TrainAeArgs
{
  std::string dict, out, activation = "tanh";
  Index latent = 1, layers = 2, epochs = 100000, log_stride = 100;
  double lr = 1e-5, target_peak = 0.0, final_fraction = 0.01;
  std::uint64_t seed = 0;
  bool cosine = false, linear_output = false, plain_gd = false;
};

void TrainAe(TrainAeArgs const &a)
{
  auto const dict = LoadDictionary(a.dict);
  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.learning_rate = a.lr;
  tc.seed = a.seed;
  tc.cosine = a.cosine;
  tc.final_lr_fraction = a.final_fraction;
  tc.target_peak = a.target_peak;
  tc.loss_log_stride = a.log_stride;
  tc.optimizer = a.plain_gd ? Optimizer::PlainGD : Optimizer::Adam;
  auto ae = InitAutoEncoder(dict.length(), a.latent, a.layers, ParseActivation(a.activation), a.seed);
  ae.linear_output = a.linear_output;
  auto const t0 = std::chrono::steady_clock::now();
  auto res = TrainAutoEncoder(dict, std::move(ae), tc);
  SaveAutoEncoder(a.out, res.ae);
  {
    CsvWriter w(a.out + ".loss.csv", {"epoch", "loss"});
    for (auto const &p : res.loss_curve) { w.row({std::to_string(p.epoch), CsvWriter::Num(p.loss)}); }
  }
  auto cfg = ToJson(tc);
  cfg["dict"] = a.dict;
  cfg["L"] = a.latent;
  cfg["layers"] = a.layers;
  cfg["activation"] = a.activation;
  cfg["linear_output"] = a.linear_output;
  WriteConfig(a.out, false, "train-ae", cfg);
  fmt::print("trained in {:.1f}s, train NRMSE {:.4f}% -> {}\n", Seconds(t0), 100.0 * AutoEncoderNrmse(res.ae, dict).average,
             a.out);
}

struct CompressEvalArgs
{
  std::string dict, fit_dict, subspace, ae, out;
  std::vector<Index> ranks;
};

void CompressEval(CompressEvalArgs const &a)
{
  auto const dict = LoadDictionary(a.dict);
  int const sources = !a.subspace.empty() + !a.ae.empty() + !a.ranks.empty();
  if (sources != 1) { Fail("give exactly one of --subspace, --ae or -B"); }
  CsvWriter w(a.out, {"model", "size", "average_nrmse", "max_nrmse"});
  auto emit = [&](std::string const &model, Index size, CompressionError const &e) {
    w.row({model, std::to_string(size), CsvWriter::Num(e.average), CsvWriter::Num(e.per_atom.maxCoeff())});
    fmt::print("{} {}: {:.4f}%\n", model, size, 100.0 * e.average);
  };
  if (!a.subspace.empty()) {
    auto const sub = LoadSubspace(a.subspace);
    emit("subspace", sub.rank(), CompressionNrmse(sub, dict));
  } else if (!a.ae.empty()) {
    auto const ae = LoadAutoEncoder(a.ae);
    emit("autoencoder", ae.latent(), AutoEncoderNrmse(ae, dict));
  } else {
    auto const fit = a.fit_dict.empty() ? dict : LoadDictionary(a.fit_dict);
    for (Index B : a.ranks) { emit("subspace", B, CompressionNrmse(FitSubspace(fit, B), dict)); }
  }
  WriteConfig(a.out, false, "compress-eval",
              {{"dict", a.dict}, {"fit_dict", a.fit_dict}, {"subspace", a.subspace}, {"ae", a.ae}, {"B", a.ranks}});
}

// ---- synthetic inputs ------------------------------------------------------

struct GridArgs
{
  Index M = 96, N = 96;
  std::uint64_t seed = 1;
  std::string out;
};

void MakePhantomCmd(GridArgs const &a)
{
  auto const ph = MakePhantom(a.M, a.N, a.seed);
  io::Json const cfg{{"M", a.M}, {"N", a.N}, {"seed", a.seed}};
  SavePhantom(a.out, ph, cfg);
  WriteConfig(a.out, false, "make-phantom", cfg);
}

void MakeCoilsCmd(GridArgs const &a, Index C)
{
  io::Json const cfg{{"M", a.M}, {"N", a.N}, {"C", C}, {"seed", a.seed}};
  io::WriteMaps(a.out, {a.M, a.N}, MakeCoils(a.M, a.N, C, a.seed), cfg);
  WriteConfig(a.out, false, "make-coils", cfg);
}

struct MaskArgs
{
  std::string kind, out;
  Index n_pe = 96, etl = 80, shots = 4, samples = 0, n_ro = 96, calib_lines = 0, calib_echoes = 0;
  std::uint64_t seed = 1;
};

void MakeMaskCmd(MaskArgs const &a)
{
  SamplingMask mask;
  switch (ParseMaskKind(a.kind)) {
  case MaskKind::Shuffling: mask = MakeMaskShuffling(a.n_pe, a.etl, a.shots, a.seed); break;
  case MaskKind::Random: mask = MakeMaskRandom(a.n_pe, a.n_ro, a.etl, a.samples, a.seed); break;
  case MaskKind::Epti: mask = MakeMaskEpti(a.n_pe, a.etl, a.shots, a.seed); break;
  }
  io::Json const cfg{{"kind", a.kind}, {"n_pe", a.n_pe}, {"etl", a.etl}, {"shots", a.shots},
                     {"samples", a.samples}, {"seed", a.seed}};
  SaveMask(a.out, mask, cfg);
  WriteConfig(a.out, false, "make-mask", cfg);
  fmt::print("{} lines sampled (R = {:.2f}) -> {}\n", mask.sampled_lines(), mask.acceleration(), a.out);
}

void Synth(std::string const &manifest_path, std::string out)
{
  auto const m = LoadManifest(manifest_path);
  if (out.empty()) { out = m.output; }
  if (out.empty()) { Fail("no output directory (use --out or set output in the manifest)"); }
  auto const d = BuildDataset(m.data);
  fs::path const dir(out);
  io::Json meta{{"sigma", d.sigma}};
  SaveKSpace(dir / "kspace.bin", d.y, meta);
  io::WriteMaps(dir / "truth.bin", d.grid(), d.truth);
  SavePhantom(dir / "phantom.bin", d.phantom);
  io::WriteMaps(dir / "coils.bin", d.grid(), d.coils);
  SaveMask(dir / "mask.bin", d.mask);
  if (d.b0.size() > 0) { io::WriteMaps(dir / "b0.bin", d.grid(), Mat(d.b0)); }
  if (d.calib) { SaveKSpace(dir / "calib.bin", *d.calib, meta); }
  WriteConfig(dir, true, "synth", ToJson(m));
  fmt::print("synthesized {}x{}x{} coils x {} echoes, sigma {:.4g} -> {}\n", d.grid().M, d.grid().N, d.coils.cols(),
             d.config.spec.etl, d.sigma, out);
}

// ---- reconstruction --------------------------------------------------------

struct ReconArgs
{
  std::string method, manifest, out, reg, lambda;
  Index iters = 0, rank = 0, sweep_points = 8;
  double sweep_lo = 1e-4, sweep_hi = 1e-1;
};

void SaveSolution(fs::path const &dir, Grid g, Recipe const &r, ReconOutput const &o)
{
  io::WriteMaps(dir / "images.bin", g, o.images);
  switch (r.method) {
  case Method::Linear: io::WriteMaps(dir / "alpha.bin", g, o.alpha); break;
  case Method::Latent:
    io::WriteMaps(dir / "beta.bin", g, o.latent.beta);
    io::WriteMaps(dir / "rho.bin", g, CxMat(o.latent.rho));
    break;
  case Method::Epg:
    io::WriteMaps(dir / "t2.bin", g, Mat(o.epg.t2));
    io::WriteMaps(dir / "rho.bin", g, CxMat(o.epg.rho));
    break;
  }
}

void Recon(ReconArgs const &a)
{
  auto m = LoadManifest(a.manifest);
  std::string const out = a.out.empty() ? m.output : a.out;
  if (out.empty()) { Fail("no output directory (use --out or set output in the manifest)"); }
  Recipe r;
  r.method = ParseMethod(a.method);
  r.cfg = m.recon;
  if (a.iters > 0) { r.cfg.iters = a.iters; }
  if (!a.reg.empty()) { r.cfg.reg = ParseRegularizer(a.reg); }
  r.rank = a.rank > 0 ? a.rank : m.subspace_rank;
  if (r.method == Method::Linear && r.rank < 1) { Fail("linear recon needs a rank (-B or subspace.rank)"); }
  r.name = r.method == Method::Linear ? fmt::format("linear{}", r.rank) : ToString(r.method);
  bool const sweep = a.lambda == "sweep";
  if (!sweep && !a.lambda.empty()) {
    try {
      r.cfg.lambda = std::stod(a.lambda);
    } catch (std::exception const &) {
      Fail("--lambda must be a number or 'sweep', got '{}'", a.lambda);
    }
  }
  if (sweep && r.cfg.reg == Regularizer::None) { Fail("--lambda sweep needs a regularizer"); }
  r.cfg.validate();

  auto const d = BuildDataset(m.data);
  auto const op = MakeOperator(d, m.phase);
  auto const models = LoadModels(m, {r});
  auto const region = Region(d, m);
  fs::path const dir(out);

  if (sweep) {
    auto const lambdas = LogSpace(a.sweep_lo, a.sweep_hi, a.sweep_points);
    double step = 0.0;
    auto const res = SweepLambda(lambdas, [&](double lam) {
      Recipe x = r;
      x.cfg.lambda = lam;
      x.cfg.step = r.cfg.step > 0.0 ? r.cfg.step : step;
      auto const o = RunRecipe(x, d.y, op, models);
      step = o.step;
      double const e = Nrmse(o.images, d.truth, region).average;
      fmt::print("lambda {:.4g}: NRMSE {:.4f}%\n", lam, 100.0 * e);
      return e;
    });
    CsvWriter w(dir / "lambda_sweep.csv", {"lambda", "average_nrmse", "best"});
    for (size_t i = 0; i < res.points.size(); i++) {
      w.row({CsvWriter::Num(res.points[i].lambda), CsvWriter::Num(res.points[i].score),
             static_cast<Index>(i) == res.best ? "1" : "0"});
    }
    r.cfg.lambda = res.points[static_cast<size_t>(res.best)].lambda;
  }

  auto const t0 = std::chrono::steady_clock::now();
  auto const o = RunRecipe(r, d.y, op, models);
  double const elapsed = Seconds(t0);
  auto const metrics = Nrmse(o.images, d.truth, region, true);
  SaveSolution(dir, d.grid(), r, o);
  io::WriteMaps(dir / "error.bin", d.grid(), metrics.error_map);
  WriteObjectiveCsv(dir / "objective.csv", o.log);
  WriteMetricsCsv(dir / "metrics.csv", metrics);
  WriteEchoImages(dir, r.name, d.grid(), o.images, d.truth, DisplayEchoes(d.config.spec.etl));
  auto cfg = ToJson(m);
  cfg["recipe"] = ToJson(r);
  cfg["lambda_mode"] = sweep ? "sweep" : "fixed";
  WriteConfig(dir, true, "recon", cfg);
  io::WriteJson(dir / "summary.json", {{"recipe", r.name},
                                        {"lambda", r.cfg.lambda},
                                        {"average_nrmse", metrics.average},
                                        {"seconds", elapsed},
                                        {"seconds_per_iter", o.seconds_per_iter},
                                        {"region", m.region_support ? "support" : "all"}});
  fmt::print("{}: average NRMSE {:.4f}% ({:.1f}s) -> {}\n", r.name, 100.0 * metrics.average, elapsed, out);
}

struct NoiseSweepArgs
{
  std::string manifest, recipes, out;
  Index n = 50;
  std::uint64_t seed = 0;
};

void NoiseSweepCmd(NoiseSweepArgs const &a)
{
  auto const m = LoadManifest(a.manifest);
  auto const rj = JsonArg(a.recipes);
  if (!rj.is_array() || rj.empty()) { Fail("--recipes must be a non-empty JSON array"); }
  std::vector<Recipe> recipes;
  for (auto const &j : rj) { recipes.push_back(RecipeFromJson(j, m.recon)); }
  auto const d = BuildDataset(m.data);
  auto const op = MakeOperator(d, m.phase);
  auto const models = LoadModels(m, recipes);
  std::vector<SweepRecipe> runs;
  for (auto r : recipes) {
    auto step = std::make_shared<double>(r.cfg.step);
    runs.push_back({r.name, [&, r, step](KSpaceData const &y) mutable {
                      r.cfg.step = *step;
                      auto o = RunRecipe(r, y, op, models);
                      *step = o.step;
                      return o.images;
                    }});
  }
  std::uint64_t const seed = a.seed != 0 ? a.seed : m.data.derived_seed(m.data.noise_seed, 5);
  auto const t0 = std::chrono::steady_clock::now();
  auto const res = NoiseSweep(d.clean, d.truth, d.sigma, runs, a.n, seed, Region(d, m));
  fs::path const dir(a.out);
  {
    CsvWriter w(dir / "instances.csv", {"recipe", "instance", "seed", "echo_index", "nrmse"});
    CsvWriter f(dir / "failures.csv", {"recipe", "instance", "error"});
    for (auto const &rec : res.records) {
      if (!rec.ok) {
        f.row({rec.recipe, std::to_string(rec.instance), fmt::format("\"{}\"", rec.error)});
        continue;
      }
      for (Index t = 0; t < rec.per_echo.size(); t++) {
        w.row({rec.recipe, std::to_string(rec.instance), std::to_string(rec.seed), std::to_string(t),
               CsvWriter::Num(rec.per_echo[t])});
      }
    }
  }
  io::Json summary = io::Json::array();
  {
    CsvWriter w(dir / "summary.csv", {"recipe", "echo_index", "mean", "std"});
    for (auto const &s : res.summary) {
      for (Index t = 0; t < s.mean.size(); t++) {
        w.row({s.name, std::to_string(t), CsvWriter::Num(s.mean[t]), CsvWriter::Num(s.std[t])});
      }
      if (s.mean_error_map.size() > 0) { io::WriteMaps(dir / fmt::format("mean_error_{}.bin", s.name), d.grid(), s.mean_error_map); }
      summary.push_back({{"recipe", s.name},
                         {"completed", s.completed},
                         {"failed", s.failed},
                         {"average_mean_nrmse", s.mean.size() ? s.mean.mean() : 0.0}});
      fmt::print("{}: {} ok, {} failed, mean NRMSE {:.4f}%\n", s.name, s.completed, s.failed,
                 s.mean.size() ? 100.0 * s.mean.mean() : 0.0);
    }
  }
  io::WriteJson(dir / "summary.json", {{"recipes", summary}, {"instances", a.n}, {"seconds", Seconds(t0)}});
  auto cfg = ToJson(m);
  cfg["recipes"] = io::Json::array();
  for (auto const &r : recipes) { cfg["recipes"].push_back(ToJson(r)); }
  cfg["n"] = a.n;
  cfg["seed"] = seed;
  WriteConfig(dir, true, "noise-sweep", cfg);
}

struct ProxyAuditArgs
{
  std::string manifest, out;
  Index iters = 1000, every = 50;
};

void ProxyAuditCmd(ProxyAuditArgs const &a)
{
  auto const m = LoadManifest(a.manifest);
  if (a.every < 1 || a.iters < a.every) { Fail("need 1 <= --every <= --iters"); }
  auto const d = BuildDataset(m.data);
  auto const op = MakeOperator(d, m.phase);
  auto const ae = m.autoencoder();
  auto const dict = m.dictionary();
  LatentMatcher const matcher(ae, dict);
  auto cfg = m.recon;
  cfg.iters = a.iters;
  std::vector<std::pair<Index, LatentImage>> trace;
  ReconLatent(d.y, op, ae, cfg, std::nullopt, [&](Index it, LatentImage const &img) { trace.emplace_back(it, img); },
              a.every);
  auto const pts = ProxyGradientAudit(trace, matcher, d.y, op, d.config.spec, m.model_t1());
  CsvWriter w(a.out, {"iter", "t2_grad_norm", "rho_grad_norm", "objective"});
  for (auto const &p : pts) {
    w.row({std::to_string(p.iter), CsvWriter::Num(p.t2_grad), CsvWriter::Num(p.rho_grad), CsvWriter::Num(p.objective)});
  }
  auto c = ToJson(m);
  c["iters"] = a.iters;
  c["every"] = a.every;
  WriteConfig(a.out, false, "proxy-audit", c);
}

struct AblateArgs
{
  std::string dict, test_dict, grid, out;
};

void AblateAe(AblateArgs const &a)
{
  auto const dict = LoadDictionary(a.dict);
  std::optional<SignalDictionary> test;
  if (!a.test_dict.empty()) { test = LoadDictionary(a.test_dict); }
  auto const g = JsonArg(a.grid);
  auto list = [&](char const *key, auto fallback) {
    using T = decltype(fallback);
    if (!g.contains(key)) { return std::vector<T>{fallback}; }
    auto v = g[key].get<std::vector<T>>();
    if (v.empty()) { Fail("hyperparameter list '{}' is empty", key); }
    return v;
  };
  auto const Ls = list("L", Index{1});
  auto const layers = list("layers", Index{2});
  auto const acts = list("activation", std::string{"tanh"});
  auto const lrs = list("lr", 1e-5);
  auto const epochs = list("epochs", Index{100000});
  auto const seeds = list("seed", std::uint64_t{0});
  bool const cosine = g.value("cosine", false);
  double const peak = g.value("target_peak", 0.0);

  CsvWriter w(a.out, {"L", "layers", "activation", "lr", "epochs", "seed", "train_nrmse", "test_nrmse", "seconds"});
  for (Index L : Ls) {
    for (Index nl : layers) {
      for (auto const &act : acts) {
        for (double lr : lrs) {
          for (Index ep : epochs) {
            for (auto seed : seeds) {
              TrainConfig tc;
              tc.epochs = ep;
              tc.learning_rate = lr;
              tc.seed = seed;
              tc.cosine = cosine;
              tc.target_peak = peak;
              tc.loss_log_stride = std::max<Index>(ep, 1);
              auto const t0 = std::chrono::steady_clock::now();
              auto const res = TrainAutoEncoder(dict, InitAutoEncoder(dict.length(), L, nl, ParseActivation(act), seed), tc);
              double const tr = AutoEncoderNrmse(res.ae, dict).average;
              double const te = test ? AutoEncoderNrmse(res.ae, *test).average : tr;
              w.row({std::to_string(L), std::to_string(nl), act, CsvWriter::Num(lr), std::to_string(ep),
                     std::to_string(seed), CsvWriter::Num(tr), CsvWriter::Num(te), CsvWriter::Num(Seconds(t0))});
              fmt::print("L={} layers={} {} lr={:g} epochs={} seed={}: train {:.4f}% test {:.4f}%\n", L, nl, act, lr, ep,
                         seed, 100.0 * tr, 100.0 * te);
            }
          }
        }
      }
    }
  }
  auto c = g;
  c["dict"] = a.dict;
  c["test_dict"] = a.test_dict;
  WriteConfig(a.out, false, "ablate-ae", c);
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Latent signal model toolkit"};
  app.require_subcommand(1);

  SimulateDictArgs sd;
  auto *c_sd = app.add_subcommand("simulate-dict", "Simulate a signal dictionary over a parameter grid");
  c_sd->add_option("--spec", sd.spec, "Sequence JSON (file or inline)")->required();
  c_sd->add_option("--grid", sd.grid, "Parameter grid JSON (file or inline)")->required();
  c_sd->add_option("--out", sd.out)->required();

  FitSubspaceArgs fsa;
  auto *c_fs = app.add_subcommand("fit-subspace", "Fit a rank-B temporal subspace");
  c_fs->add_option("--dict", fsa.dict)->required()->check(CLI::ExistingFile);
  c_fs->add_option("-B", fsa.rank)->required();
  c_fs->add_option("--weighting", fsa.weighting, "raw or normalized");
  c_fs->add_option("--out", fsa.out)->required();

  TrainAeArgs ta;
  auto *c_ta = app.add_subcommand("train-ae", "Train an autoencoder on a dictionary");
  c_ta->add_option("--dict", ta.dict)->required()->check(CLI::ExistingFile);
  c_ta->add_option("-L", ta.latent);
  c_ta->add_option("--layers", ta.layers);
  c_ta->add_option("--activation", ta.activation);
  c_ta->add_option("--lr", ta.lr);
  c_ta->add_option("--epochs", ta.epochs);
  c_ta->add_option("--seed", ta.seed);
  c_ta->add_option("--target-peak", ta.target_peak, "Rescale inputs so the dictionary peak maps here (0: off)");
  c_ta->add_flag("--cosine", ta.cosine, "Cosine learning-rate decay");
  c_ta->add_option("--final-lr-fraction", ta.final_fraction);
  c_ta->add_flag("--linear-output", ta.linear_output, "No activation on the decoder output layer");
  c_ta->add_flag("--plain-gd", ta.plain_gd, "Plain gradient descent instead of Adam");
  c_ta->add_option("--log-stride", ta.log_stride);
  c_ta->add_option("--out", ta.out)->required();

  CompressEvalArgs ce;
  auto *c_ce = app.add_subcommand("compress-eval", "Per-model compression NRMSE on a dictionary");
  c_ce->add_option("--dict", ce.dict)->required()->check(CLI::ExistingFile);
  c_ce->add_option("--subspace", ce.subspace)->check(CLI::ExistingFile);
  c_ce->add_option("--ae", ce.ae)->check(CLI::ExistingFile);
  c_ce->add_option("-B", ce.ranks, "Fit subspaces of these ranks")->delimiter(',');
  c_ce->add_option("--fit-dict", ce.fit_dict, "Dictionary for -B fits (default --dict)")->check(CLI::ExistingFile);
  c_ce->add_option("--out", ce.out)->required();

  GridArgs ph, co;
  Index n_coils = 8;
  auto *c_ph = app.add_subcommand("make-phantom", "Procedural brain phantom");
  c_ph->add_option("--M", ph.M);
  c_ph->add_option("--N", ph.N);
  c_ph->add_option("--seed", ph.seed);
  c_ph->add_option("--out", ph.out)->required();
  auto *c_co = app.add_subcommand("make-coils", "Smooth coil sensitivity maps");
  c_co->add_option("--M", co.M);
  c_co->add_option("--N", co.N);
  c_co->add_option("-C,--coils", n_coils);
  c_co->add_option("--seed", co.seed);
  c_co->add_option("--out", co.out)->required();

  MaskArgs ma;
  auto *c_ma = app.add_subcommand("make-mask", "Phase-encode by echo sampling mask");
  c_ma->add_option("kind", ma.kind, "shuffling, random or epti")->required();
  c_ma->add_option("--n-pe", ma.n_pe);
  c_ma->add_option("--etl", ma.etl);
  c_ma->add_option("--shots", ma.shots);
  c_ma->add_option("--samples", ma.samples, "random: total sampled lines");
  c_ma->add_option("--n-ro", ma.n_ro);
  c_ma->add_option("--seed", ma.seed);
  c_ma->add_option("--out", ma.out)->required();

  std::string synth_manifest, synth_out;
  auto *c_sy = app.add_subcommand("synth", "Synthesize k-space from a manifest");
  c_sy->add_option("--manifest", synth_manifest)->required()->check(CLI::ExistingFile);
  c_sy->add_option("--out", synth_out);

  ReconArgs ra;
  auto *c_re = app.add_subcommand("recon", "Reconstruct a manifest dataset");
  c_re->add_option("method", ra.method, "linear, latent or epg")->required();
  c_re->add_option("--manifest", ra.manifest)->required()->check(CLI::ExistingFile);
  c_re->add_option("--reg", ra.reg, "none, wavelet or llr");
  c_re->add_option("--lambda", ra.lambda, "Number or 'sweep'");
  c_re->add_option("--iters", ra.iters);
  c_re->add_option("-B", ra.rank, "Linear subspace rank");
  c_re->add_option("--sweep-lo", ra.sweep_lo);
  c_re->add_option("--sweep-hi", ra.sweep_hi);
  c_re->add_option("--sweep-points", ra.sweep_points);
  c_re->add_option("--out", ra.out);

  NoiseSweepArgs ns;
  auto *c_ns = app.add_subcommand("noise-sweep", "Repeat recipes over noise instances");
  c_ns->add_option("--manifest", ns.manifest)->required()->check(CLI::ExistingFile);
  c_ns->add_option("--n", ns.n);
  c_ns->add_option("--recipes", ns.recipes, "JSON array of recipes (file or inline)")->required();
  c_ns->add_option("--seed", ns.seed, "Base noise seed (default: manifest noise seed)");
  c_ns->add_option("--out", ns.out)->required();

  ProxyAuditArgs pa;
  auto *c_pa = app.add_subcommand("proxy-audit", "EPG gradient norms along a latent recon");
  c_pa->add_option("--manifest", pa.manifest)->required()->check(CLI::ExistingFile);
  c_pa->add_option("--iters", pa.iters);
  c_pa->add_option("--every", pa.every);
  c_pa->add_option("--out", pa.out)->required();

  AblateArgs ab;
  auto *c_ab = app.add_subcommand("ablate-ae", "Autoencoder hyperparameter grid");
  c_ab->add_option("--dict", ab.dict)->required()->check(CLI::ExistingFile);
  c_ab->add_option("--test-dict", ab.test_dict)->check(CLI::ExistingFile);
  c_ab->add_option("--grid-of-hyperparams", ab.grid)->required();
  c_ab->add_option("--out", ab.out)->required();

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    if (e.get_exit_code() == 0) { return app.exit(e); }
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*c_sd) { SimulateDict(sd); }
    if (*c_fs) { FitSubspaceCmd(fsa); }
    if (*c_ta) { TrainAe(ta); }
    if (*c_ce) { CompressEval(ce); }
    if (*c_ph) { MakePhantomCmd(ph); }
    if (*c_co) { MakeCoilsCmd(co, n_coils); }
    if (*c_ma) { MakeMaskCmd(ma); }
    if (*c_sy) { Synth(synth_manifest, synth_out); }
    if (*c_re) { Recon(ra); }
    if (*c_ns) { NoiseSweepCmd(ns); }
    if (*c_pa) { ProxyAuditCmd(pa); }
    if (*c_ab) { AblateAe(ab); }
  } catch (std::exception const &e) {
    std::string msg = e.what();
    for (auto &ch : msg) {
      if (ch == '\n') { ch = ' '; }
    }
    std::cerr << "error: " << msg << '\n';
    return 1;
  }
  return 0;
}
