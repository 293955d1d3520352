// Acceptance runner: one PASS/FAIL line per criterion. Exit status 0 only if
// every selected criterion passes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "lsm/analysis.hpp"
#include "lsm/experiment.hpp"
#include "lsm/report.hpp"

namespace fs = std::filesystem;
using namespace lsm;

namespace {

struct Verdict
{
  bool pass = false;
  std::string detail;
};

struct Context
{
  fs::path cache;
  fs::path out;
};

class Stopwatch
{
public:
  auto seconds() const -> double
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

auto Pct(double x) -> std::string { return fmt::format("{:.3f}", 100.0 * x); }

auto Fse() -> SequenceSpec { return SequenceSpec::FsePreset(); }

// Train and held-out grids. Held-out points sit halfway between training points.
auto FseTrain() -> ParamGrid { return {{1000.0}, ParamGrid::Range(50, 400, 1)}; }
auto FseTest() -> ParamGrid { return {{1000.0}, ParamGrid::Range(50.5, 399.5, 1)}; }
auto MprageTrain() -> ParamGrid { return {ParamGrid::Range(500, 3000, 5), {1.0}}; }
auto MprageTest() -> ParamGrid { return {ParamGrid::Range(502.5, 2997.5, 5), {1.0}}; }
auto EptiTrain() -> ParamGrid { return {{1.0}, ParamGrid::Range(10, 300, 1)}; }

struct AeRecipe
{
  std::string tag;
  SequenceSpec spec;
  ParamGrid train;
  Index epochs;
};

auto AeFor(std::string const &which) -> AeRecipe
{
  if (which == "fse") { return {"fse", Fse(), FseTrain(), 20000}; }
  if (which == "mprage") { return {"mprage", SequenceSpec::MpragePreset(), MprageTrain(), 5000}; }
  return {"epti", SequenceSpec::EptiPreset(), EptiTrain(), 20000};
}

auto TrainAe(AeRecipe const &r, SignalDictionary const &dict, std::uint64_t seed) -> AutoEncoder
{
  TrainConfig c;
  c.epochs = r.epochs;
  c.learning_rate = 2e-3;
  c.cosine = true;
  c.target_peak = 0.9;
  c.seed = seed;
  c.loss_log_stride = r.epochs;
  return TrainAutoEncoder(dict, InitAutoEncoder(dict.length(), 1, 2, Activation::Tanh, seed), c).ae;
}

auto CachePath(Context const &ctx, AeRecipe const &r) -> fs::path
{
  return ctx.cache / fmt::format("{}_L1_tanh2_e{}_s0.bin", r.tag, r.epochs);
}

// Seed-0 network, trained once and shared between criteria.
auto CachedAe(Context const &ctx, std::string const &which) -> AutoEncoder
{
  auto const r = AeFor(which);
  auto const path = CachePath(ctx, r);
  if (fs::exists(path)) { return LoadAutoEncoder(path); }
  auto ae = TrainAe(r, BuildDictionary(r.spec, r.train), 0);
  fs::create_directories(ctx.cache);
  SaveAutoEncoder(path, ae);
  return ae;
}

auto ShufflingConfig(Index size, double noise) -> DatasetConfig
{
  DatasetConfig c;
  c.M = c.N = size;
  c.coils = 8;
  c.shots = 4;
  c.noise_relative = noise;
  return c;
}

auto CompressionCheck(std::string const &name, SequenceSpec const &spec, ParamGrid const &fit, ParamGrid const &eval,
                      std::vector<double> const &target, double budget, Context const &ctx) -> Verdict
{
  Stopwatch sw;
  auto const train = BuildDictionary(spec, fit);
  auto const test = BuildDictionary(spec, eval);
  std::vector<double> got;
  for (Index B = 1; B <= 4; B++) { got.push_back(100.0 * CompressionNrmse(FitSubspace(train, B), test).average); }
  double const secs = sw.seconds();

  CsvWriter csv(ctx.out / (name + "_compression.csv"), {"basis_size", "nrmse_percent", "target_percent"});
  bool ok = secs < budget;
  double worst = 0.0;
  for (size_t i = 0; i < got.size(); i++) {
    csv.row({std::to_string(i + 1), CsvWriter::Num(got[i]), CsvWriter::Num(target[i])});
    worst = std::max(worst, std::abs(got[i] - target[i]));
  }
  ok = ok && worst <= 0.5;
  return {ok, fmt::format("B=1..4 NRMSE {:.3f} % vs target {} % (max deviation {:.3f}, limit 0.5); {:.1f} s (limit {:.0f})",
                          fmt::join(got, " "), fmt::join(target, " "), worst, secs, budget)};
}

auto Criterion1(Context const &ctx) -> Verdict
{
  return CompressionCheck("fse", Fse(), FseTrain(), FseTest(), {18.68, 3.30, 0.47, 0.06}, 10.0, ctx);
}

auto Criterion2(Context const &ctx) -> Verdict
{
  auto const grid = MprageTrain();
  return CompressionCheck("mprage", SequenceSpec::MpragePreset(), grid, grid, {14.5, 0.36, 0.03, 0.00}, 60.0, ctx);
}

auto Criterion3(Context const &ctx) -> Verdict
{
  Stopwatch sw;
  CsvWriter csv(ctx.out / "autoencoder_seeds.csv", {"sequence", "seed", "train_nrmse_percent", "test_nrmse_percent"});
  bool ok = true;
  std::vector<std::string> parts;
  for (auto const &[which, eval] : std::vector<std::pair<std::string, ParamGrid>>{{"fse", FseTest()}, {"mprage", MprageTest()}}) {
    auto const r = AeFor(which);
    auto const train = BuildDictionary(r.spec, r.train);
    auto const test = BuildDictionary(r.spec, eval);
    double const b2 = 100.0 * CompressionNrmse(FitSubspace(train, 2), test).average;
    std::vector<double> errs;
    for (std::uint64_t seed = 0; seed < 5; seed++) {
      auto const ae = TrainAe(r, train, seed);
      double const e = 100.0 * AutoEncoderNrmse(ae, test).average;
      errs.push_back(e);
      csv.row({which, std::to_string(seed), CsvWriter::Num(100.0 * AutoEncoderNrmse(ae, train).average), CsvWriter::Num(e)});
      if (seed == 0) {
        fs::create_directories(ctx.cache);
        SaveAutoEncoder(CachePath(ctx, r), ae);
      }
    }
    auto const [lo, hi] = std::minmax_element(errs.begin(), errs.end());
    bool const here = *hi <= 0.5 && *hi < b2 && (*hi - *lo) < 0.2;
    ok = ok && here;
    parts.push_back(fmt::format("{} test NRMSE {:.3f}..{:.3f} % over 5 seeds (limit 0.5, B=2 {:.3f}, spread {:.3f} < 0.2)",
                                which, *lo, *hi, b2, *hi - *lo));
  }
  double const secs = sw.seconds();
  ok = ok && secs < 900.0;
  return {ok, fmt::format("{}; {:.0f} s (limit 900)", fmt::join(parts, "; "), secs)};
}

struct Scored
{
  double lambda = 0.0;
  double nrmse = 0.0;
  Vec per_echo;
};

// Runs the recipe at each lambda; returns the best point and logs all of them.
auto BestOver(Recipe base, std::vector<double> const &lambdas, KSpaceData const &y, EncodingOperator const &op,
                 Models const &models, Dataset const &d, CsvWriter &csv, std::string const &label) -> Scored
{
  Scored best{0.0, 1e300, {}};
  for (double lam : lambdas) {
    base.cfg.lambda = lam;
    auto const out = RunRecipe(base, y, op, models);
    if (base.method == Method::Linear && base.cfg.step == 0.0) { base.cfg.step = out.step; }
    auto const m = Nrmse(out.images, d.truth, d.region);
    csv.row({label, CsvWriter::Num(lam), CsvWriter::Num(100.0 * m.average)});
    if (m.average < best.nrmse) { best = {lam, m.average, m.per_echo}; }
  }
  return best;
}

void WritePerEcho(fs::path const &path, std::vector<std::pair<std::string, Vec const *>> const &cols)
{
  std::vector<std::string> header{"echo_index"};
  for (auto const &c : cols) { header.push_back(c.first); }
  CsvWriter csv(path, header);
  for (Index t = 0; t < cols.front().second->size(); t++) {
    std::vector<std::string> row{std::to_string(t)};
    for (auto const &c : cols) { row.push_back(CsvWriter::Num((*c.second)[t])); }
    csv.row(row);
  }
}

auto Criterion4(Context const &ctx) -> Verdict
{
  Models models;
  models.spec = Fse();
  models.ae = CachedAe(ctx, "fse");
  auto const dict = BuildDictionary(Fse(), FseTrain());
  models.subspaces = {FitSubspace(dict, 2), FitSubspace(dict, 3)};

  Stopwatch sw;
  auto const d = BuildDataset(ShufflingConfig(96, 0.01));
  auto const op = MakeOperator(d, PhaseSource::True);
  CsvWriter csv(ctx.out / "shuffling_sweep.csv", {"method", "lambda", "nrmse_percent"});

  Recipe lin;
  lin.method = Method::Linear;
  lin.cfg.reg = Regularizer::Wavelet;
  lin.cfg.iters = 300;
  std::vector<double> const lin_lams{3e-3, 1e-2, 3e-2};
  lin.rank = 2;
  auto const b2 = BestOver(lin, lin_lams, d.y, op, models, d, csv, "linear_B2");
  lin.rank = 3;
  auto const b3 = BestOver(lin, lin_lams, d.y, op, models, d, csv, "linear_B3");

  Recipe lat;
  lat.method = Method::Latent;
  lat.cfg.reg = Regularizer::Wavelet;
  lat.cfg.iters = 1000;
  auto const latent = BestOver(lat, {3e-2, 1e-1, 3e-1}, d.y, op, models, d, csv, "latent_L1");
  double const secs = sw.seconds();

  WritePerEcho(ctx.out / "shuffling_per_echo.csv",
               {{"latent_L1", &latent.per_echo}, {"linear_B2", &b2.per_echo}, {"linear_B3", &b3.per_echo}});
  double const ratio = latent.nrmse / b3.nrmse;
  bool const ok = latent.nrmse < b2.nrmse && latent.nrmse < b3.nrmse && ratio <= 0.9 && secs < 600.0;
  return {ok, fmt::format("average NRMSE latent {} % (lambda {:g}), linear B=2 {} % (lambda {:g}), B=3 {} % (lambda {:g}); "
                          "ratio latent/B=3 {:.4f} (limit 0.9); {:.0f} s (limit 600)",
                          Pct(latent.nrmse), latent.lambda, Pct(b2.nrmse), b2.lambda, Pct(b3.nrmse), b3.lambda, ratio,
                          secs)};
}

auto Criterion5(Context const &ctx) -> Verdict
{
  auto const ae = CachedAe(ctx, "fse");
  auto const dict = BuildDictionary(Fse(), FseTrain());
  auto const s2 = FitSubspace(dict, 2), s3 = FitSubspace(dict, 3);

  Stopwatch sw;
  auto const d = BuildDataset(ShufflingConfig(64, 0.01));
  auto const op = MakeOperator(d, PhaseSource::True);
  ReconConfig lin;
  lin.iters = 100;
  ReconConfig lat;
  lat.iters = 300;
  std::vector<lsm::SweepRecipe> recipes{
    {"latent_L1", [&](KSpaceData const &y) { return ExpandLatent(ae, ReconLatent(y, op, ae, lat).img); }},
    {"linear_B2", [&](KSpaceData const &y) { return ExpandLinear(s2, ReconLinear(y, op, s2, lin).alpha); }},
    {"linear_B3", [&](KSpaceData const &y) { return ExpandLinear(s3, ReconLinear(y, op, s3, lin).alpha); }}};
  auto const r = NoiseSweep(d.clean, d.truth, d.sigma, recipes, 50, d.config.seed, d.region);
  double const secs = sw.seconds();

  std::vector<std::string> header{"echo_index"};
  for (auto const &s : r.summary) {
    header.push_back(s.name + "_mean");
    header.push_back(s.name + "_std");
  }
  CsvWriter csv(ctx.out / "noise_sweep.csv", header);
  Index const T = r.summary[0].mean.size();
  for (Index t = 0; t < T; t++) {
    std::vector<std::string> row{std::to_string(t)};
    for (auto const &s : r.summary) {
      row.push_back(CsvWriter::Num(s.mean[t]));
      row.push_back(CsvWriter::Num(s.std[t]));
    }
    csv.row(row);
  }

  auto const &L = r.summary[0];
  bool ok = secs < 1800.0;
  std::vector<std::string> parts;
  for (size_t k = 1; k < r.summary.size(); k++) {
    auto const &B = r.summary[k];
    Index below = 0, std_ok = 0;
    for (Index t = 0; t < T; t++) {
      below += L.mean[t] < B.mean[t];
      std_ok += L.std[t] <= 2.0 * B.std[t];
    }
    double const frac = static_cast<double>(below) / static_cast<double>(T);
    ok = ok && frac >= 0.9 && std_ok == T && B.failed == 0;
    parts.push_back(fmt::format("vs {}: mean below at {}/{} echoes ({:.1f} %, limit 90), std within 2x at {}/{}", B.name, below,
                                T, 100.0 * frac, std_ok, T));
  }
  ok = ok && L.failed == 0 && L.completed == 50;
  return {ok, fmt::format("{} instances, latent mean {} %; {}; {:.0f} s (limit 1800)", L.completed, Pct(L.mean.mean()),
                          fmt::join(parts, "; "), secs)};
}

auto Criterion6(Context const &ctx) -> Verdict
{
  auto const ae = CachedAe(ctx, "fse");
  auto const dict = BuildDictionary(Fse(), FseTrain());
  LatentMatcher const matcher(ae, dict);
  auto const d = BuildDataset(ShufflingConfig(96, 0.0));
  auto const op = MakeOperator(d, PhaseSource::True);

  ReconConfig cfg;
  cfg.iters = 1000;
  cfg.lr_final = 0.01;
  std::vector<std::pair<Index, LatentImage>> trace;
  auto const lat = ReconLatent(d.y, op, ae, cfg, std::nullopt,
                               [&](Index it, LatentImage const &img) { trace.emplace_back(it, img); }, 50);
  auto const audit = ProxyGradientAudit(trace, matcher, d.y, op, Fse(), 1000.0);
  {
    CsvWriter csv(ctx.out / "gradient_audit.csv", {"iter", "t2_grad_norm", "rho_grad_norm", "objective"});
    for (auto const &a : audit) {
      csv.row({std::to_string(a.iter), CsvWriter::Num(a.t2_grad), CsvWriter::Num(a.rho_grad), CsvWriter::Num(a.objective)});
    }
  }
  auto const &first = audit.front();
  auto const &last = audit.back();
  double const t2_ratio = last.t2_grad / first.t2_grad;
  double const rho_ratio = last.rho_grad / first.rho_grad;

  double const lat_err = Nrmse(ExpandLatent(ae, lat.img), d.truth, d.region).average;
  Models models;
  models.spec = Fse();
  Recipe epg;
  epg.method = Method::Epg;
  epg.cfg.iters = 200;
  auto const warm = RunRecipe(epg, d.y, op, models, EpgMaps{matcher.match_map(lat.img.beta), lat.img.rho});
  double const epg_err = Nrmse(warm.images, d.truth, d.region).average;
  double const change = 100.0 * std::abs(epg_err - lat_err);
  double const speedup = warm.seconds_per_iter / lat.seconds_per_iter;

  bool const ok = first.iter == 50 && last.iter == 1000 && t2_ratio <= 0.05 && rho_ratio <= 0.05 && change < 1.0 &&
                  speedup >= 5.0;
  return {ok, fmt::format("gradient norm at 1000 / at 50: T2 {:.4f}, rho {:.4f} (limit 0.05); EPG warm start NRMSE "
                          "{} % to {} % (change {:.3f} points, limit 1); per-iteration cost latent {:.3f} s, EPG {:.3f} s "
                          "(ratio {:.1f}, limit 5)",
                          t2_ratio, rho_ratio, Pct(lat_err), Pct(epg_err), change, lat.seconds_per_iter,
                          warm.seconds_per_iter, speedup)};
}

auto Criterion7(Context const &ctx) -> Verdict
{
  auto const spec = SequenceSpec::EptiPreset();
  auto const dict = BuildDictionary(spec, EptiTrain());
  Models models;
  models.spec = spec;
  models.ae = CachedAe(ctx, "epti");
  models.subspaces = {FitSubspace(dict, 2), FitSubspace(dict, 3)};

  DatasetConfig c;
  c.M = c.N = 96;
  c.spec = spec;
  c.mask = MaskKind::Epti;
  c.shots = 2;
  c.coils = 8;
  c.b0_peak_hz = 40.0;
  c.calib_lines = 22;
  c.calib_echoes = 6;
  c.noise_relative = 0.01;
  auto const d = BuildDataset(c);
  CsvWriter csv(ctx.out / "epti_sweep.csv", {"method", "lambda", "nrmse_percent"});

  Recipe lat;
  lat.method = Method::Latent;
  lat.cfg.reg = Regularizer::Wavelet;
  lat.cfg.iters = 300;
  Recipe lin;
  lin.method = Method::Linear;
  lin.cfg.reg = Regularizer::Llr;
  lin.cfg.iters = 300;

  // Regularization weights are chosen with the true phase and reused with the estimate.
  auto const op_true = MakeOperator(d, PhaseSource::True);
  auto const latent = BestOver(lat, {3e-2, 1e-1, 3e-1, 1.0}, d.y, op_true, models, d, csv, "true_latent_L1");
  std::vector<double> const lin_lams{3e-3, 1e-2, 3e-2, 1e-1};
  lin.rank = 2;
  auto const b2 = BestOver(lin, lin_lams, d.y, op_true, models, d, csv, "true_linear_B2");
  lin.rank = 3;
  auto const b3 = BestOver(lin, lin_lams, d.y, op_true, models, d, csv, "true_linear_B3");

  auto const op_est = MakeOperator(d, PhaseSource::Estimated);
  auto const latent_e = BestOver(lat, {latent.lambda}, d.y, op_est, models, d, csv, "estimated_latent_L1");
  lin.rank = 2;
  auto const b2_e = BestOver(lin, {b2.lambda}, d.y, op_est, models, d, csv, "estimated_linear_B2");
  lin.rank = 3;
  auto const b3_e = BestOver(lin, {b3.lambda}, d.y, op_est, models, d, csv, "estimated_linear_B3");

  WritePerEcho(ctx.out / "epti_per_echo.csv", {{"true_latent_L1", &latent.per_echo},
                                                {"true_linear_B2", &b2.per_echo},
                                                {"true_linear_B3", &b3.per_echo},
                                                {"estimated_latent_L1", &latent_e.per_echo},
                                                {"estimated_linear_B2", &b2_e.per_echo},
                                                {"estimated_linear_B3", &b3_e.per_echo}});
  double const degradation = 100.0 * (latent_e.nrmse - latent.nrmse);
  bool const ok = latent.nrmse < b2.nrmse && latent.nrmse < b3.nrmse && latent_e.nrmse < b2_e.nrmse &&
                  latent_e.nrmse < b3_e.nrmse && std::isfinite(degradation);
  return {ok, fmt::format("true B0: latent {} %, B=2 {} %, B=3 {} %; estimated B0: latent {} %, B=2 {} %, B=3 {} %; "
                          "latent degradation {:+.3f} points",
                          Pct(latent.nrmse), Pct(b2.nrmse), Pct(b3.nrmse), Pct(latent_e.nrmse), Pct(b2_e.nrmse),
                          Pct(b3_e.nrmse), degradation)};
}

auto Criterion8(Context const &) -> Verdict
{
  Stopwatch sw;
  std::string const cmd = std::string(LSM_TESTS_PATH) + " --gtest_brief=1 2>&1";
  FILE *p = popen(cmd.c_str(), "r");
  if (p == nullptr) { return {false, "could not start the property test binary"}; }
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, p)) { out += buf; }
  int const status = pclose(p);
  double const secs = sw.seconds();
  bool const ok = WIFEXITED(status) && WEXITSTATUS(status) == 0 && secs < 120.0;
  // Last non-empty line of gtest output carries the pass count.
  auto end = out.find_last_not_of('\n');
  auto start = out.rfind('\n', end);
  std::string const tail = end == std::string::npos ? "" : out.substr(start == std::string::npos ? 0 : start + 1, end - start);
  return {ok, fmt::format("property suites exit {} ({}); {:.1f} s (limit 120)", WIFEXITED(status) ? WEXITSTATUS(status) : -1,
                          tail, secs)};
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Acceptance runner"};
  std::vector<int> only;
  std::string cache = "acceptance_cache", out = "acceptance_out";
  app.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 8));
  app.add_option("--cache", cache, "Directory for trained networks");
  app.add_option("--out", out, "Directory for detail CSVs");
  CLI11_PARSE(app, argc, argv);

  Context const ctx{cache, out};
  fs::create_directories(ctx.out);

  std::map<int, std::function<Verdict(Context const &)>> const criteria{
    {1, Criterion1}, {2, Criterion2}, {3, Criterion3}, {4, Criterion4},
    {5, Criterion5}, {6, Criterion6}, {7, Criterion7}, {8, Criterion8}};
  std::set<int> const selected(only.begin(), only.end());

  bool all = true;
  for (auto const &[id, run] : criteria) {
    if (!selected.empty() && !selected.contains(id)) { continue; }
    Verdict v;
    try {
      v = run(ctx);
    } catch (std::exception const &e) {
      v = {false, fmt::format("error: {}", e.what())};
    }
    all = all && v.pass;
    fmt::print("criterion {}: {} {}\n", id, v.pass ? "PASS" : "FAIL", v.detail);
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
