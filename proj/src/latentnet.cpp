#include "lsm/latentnet.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace lsm {

namespace {

constexpr double kLeak = 0.01;

struct Trace
{
  std::vector<Mat> input; // input to each layer
  std::vector<Mat> slope; // activation derivative at each layer's pre-activation
};

auto Apply(Activation act, Mat &z, Mat *slope)
{
  switch (act) {
  case Activation::Tanh:
    z = z.array().tanh();
    if (slope) { *slope = 1.0 - z.array().square(); }
    break;
  case Activation::Relu:
    if (slope) { *slope = (z.array() > 0.0).cast<double>(); }
    z = z.cwiseMax(0.0);
    break;
  case Activation::LeakyRelu:
    if (slope) { *slope = (z.array() > 0.0).select(Mat::Ones(z.rows(), z.cols()), kLeak); }
    z = (z.array() > 0.0).select(z, kLeak * z);
    break;
  case Activation::Identity:
    if (slope) { *slope = Mat::Ones(z.rows(), z.cols()); }
    break;
  }
}

auto Run(AutoEncoder const &ae, Index first, Index last, Mat x, Trace *trace) -> Mat
{
  Index const n_total = static_cast<Index>(ae.layers.size());
  for (Index k = first; k < last; k++) {
    auto const &layer = ae.layers[static_cast<size_t>(k)];
    if (trace) { trace->input.push_back(x); }
    Mat z = layer.weight * x;
    z.colwise() += layer.bias;
    Activation const act = (ae.linear_output && k == n_total - 1) ? Activation::Identity : ae.activation;
    Mat slope;
    Apply(act, z, trace ? &slope : nullptr);
    if (trace) { trace->slope.push_back(std::move(slope)); }
    x = std::move(z);
  }
  return x;
}

// Reverse pass over layers [first, last) recorded in trace. Writes parameter
// gradients into grad (if given) and returns the cotangent of the input.
auto Backward(AutoEncoder const &ae, Index first, Index last, Trace const &trace, Mat g,
              std::vector<DenseLayer> *grad) -> Mat
{
  for (Index k = last - 1; k >= first; k--) {
    size_t const t = static_cast<size_t>(k - first);
    g.array() *= trace.slope[t].array();
    if (grad) {
      auto &dl = (*grad)[static_cast<size_t>(k)];
      dl.weight = g * trace.input[t].transpose();
      dl.bias = g.rowwise().sum();
    }
    g = ae.layers[static_cast<size_t>(k)].weight.transpose() * g;
  }
  return g;
}

void CheckFinite(Mat const &m, char const *what)
{
  if (!m.allFinite()) { Fail("{} contains non-finite values", what); }
}

} // namespace

auto ToString(Activation a) -> std::string
{
  switch (a) {
  case Activation::Tanh: return "tanh";
  case Activation::Relu: return "relu";
  case Activation::LeakyRelu: return "leaky_relu";
  case Activation::Identity: return "identity";
  }
  return "?";
}

auto ParseActivation(std::string const &s) -> Activation
{
  if (s == "tanh") { return Activation::Tanh; }
  if (s == "relu") { return Activation::Relu; }
  if (s == "leaky_relu") { return Activation::LeakyRelu; }
  if (s == "identity") { return Activation::Identity; }
  Fail("unknown activation '{}'", s);
}

auto AutoEncoder::parameter_count() const -> Index
{
  Index n = 0;
  for (auto const &l : layers) {
    n += l.weight.size() + l.bias.size();
  }
  return n;
}

auto InitAutoEncoder(Index T, Index L, Index n_layers, Activation act, std::uint64_t seed) -> AutoEncoder
{
  if (n_layers < 1 || n_layers > 3) { Fail("layer count must be 1, 2 or 3 (got {})", n_layers); }
  if (L < 1) { Fail("latent width must be >= 1"); }
  if (T < L) { Fail("signal length {} is below latent width {}", T, L); }
  AutoEncoder ae;
  ae.activation = act;
  ae.seed = seed;
  ae.dims.push_back(T);
  for (Index k = 1; k < n_layers; k++) {
    Index const w = ae.dims.back() / 2;
    if (w < L) { Fail("intermediate width {} falls below latent width {}", w, L); }
    ae.dims.push_back(w);
  }
  ae.dims.push_back(L);

  std::vector<Index> widths = ae.dims;
  widths.insert(widths.end(), ae.dims.rbegin() + 1, ae.dims.rend());
  std::mt19937_64 rng(seed);
  for (size_t k = 0; k + 1 < widths.size(); k++) {
    Index const in = widths[k], out = widths[k + 1];
    double const bound = std::sqrt(1.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer l{Mat(out, in), Vec(out)};
    for (Index j = 0; j < in; j++) {
      for (Index i = 0; i < out; i++) {
        l.weight(i, j) = u(rng);
      }
    }
    for (Index i = 0; i < out; i++) {
      l.bias[i] = u(rng);
    }
    ae.layers.push_back(std::move(l));
  }
  return ae;
}

auto EncodeBatch(AutoEncoder const &ae, Mat const &signals) -> Mat
{
  if (signals.rows() != ae.length()) { Fail("signal length {} does not match network input {}", signals.rows(), ae.length()); }
  CheckFinite(signals, "encoder input");
  return Run(ae, 0, ae.encoder_layers(), ae.input_scale * signals, nullptr);
}

auto DecodeBatch(AutoEncoder const &ae, Mat const &latents) -> Mat
{
  if (latents.rows() != ae.latent()) { Fail("latent width {} does not match network latent {}", latents.rows(), ae.latent()); }
  CheckFinite(latents, "decoder input");
  Index const n = static_cast<Index>(ae.layers.size());
  return Run(ae, ae.encoder_layers(), n, latents, nullptr) / ae.input_scale;
}

auto Encode(AutoEncoder const &ae, Vec const &signal) -> Vec { return EncodeBatch(ae, signal); }
auto Decode(AutoEncoder const &ae, Vec const &latent) -> Vec { return DecodeBatch(ae, latent); }

auto ComputeParamGradient(AutoEncoder const &ae, Mat const &batch) -> ParamGradient
{
  if (batch.rows() != ae.length()) { Fail("batch rows {} do not match network input {}", batch.rows(), ae.length()); }
  Index const n = static_cast<Index>(ae.layers.size());
  Mat const x = ae.input_scale * batch;
  Trace trace;
  Mat const out = Run(ae, 0, n, x, &trace);
  Mat const r = out - x;
  double const count = static_cast<double>(r.size());
  ParamGradient pg;
  pg.loss = r.squaredNorm() / count;
  pg.grad.resize(ae.layers.size());
  Backward(ae, 0, n, trace, (2.0 / count) * r, &pg.grad);
  return pg;
}

auto LinearizeDecoder(AutoEncoder const &ae, Mat const &latents) -> DecoderLinearization
{
  if (latents.rows() != ae.latent()) { Fail("latent width {} does not match network latent {}", latents.rows(), ae.latent()); }
  CheckFinite(latents, "decoder input");
  Trace trace;
  Mat out = Run(ae, ae.encoder_layers(), static_cast<Index>(ae.layers.size()), latents, &trace);
  return {out / ae.input_scale, std::move(trace.input), std::move(trace.slope)};
}

auto DecoderVjp(AutoEncoder const &ae, DecoderLinearization const &lin, Mat const &cotangents) -> Mat
{
  if (cotangents.rows() != ae.length() || cotangents.cols() != lin.output.cols()) { Fail("input gradient shape mismatch"); }
  Trace const trace{lin.inputs, lin.slopes};
  return Backward(ae, ae.encoder_layers(), static_cast<Index>(ae.layers.size()), trace, cotangents / ae.input_scale,
                  nullptr);
}

auto InputGradient(AutoEncoder const &ae, Mat const &latents, Mat const &cotangents) -> Mat
{
  if (latents.cols() != cotangents.cols()) { Fail("input gradient shape mismatch"); }
  return DecoderVjp(ae, LinearizeDecoder(ae, latents), cotangents);
}

void TrainConfig::validate() const
{
  if (epochs < 1) { Fail("epochs must be >= 1"); }
  if (!(learning_rate > 0.0)) { Fail("learning rate must be positive"); }
  if (loss_log_stride < 1) { Fail("loss log stride must be >= 1"); }
  if (cosine && !(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) { Fail("final_lr_fraction must be in (0, 1]"); }
  if (target_peak < 0.0 || target_peak >= 1.0) { Fail("target_peak must be in [0, 1)"); }
}

auto TrainAutoEncoder(SignalDictionary const &dict, AutoEncoder ae, TrainConfig const &cfg) -> TrainResult
{
  cfg.validate();
  if (dict.length() != ae.length()) { Fail("dictionary length {} does not match network input {}", dict.length(), ae.length()); }
  Mat const batch = dict.atoms.transpose();
  ae.input_scale = 1.0;
  if (cfg.target_peak > 0.0) { ae.input_scale = std::max(1.0, cfg.target_peak / batch.cwiseAbs().maxCoeff()); }

  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<DenseLayer> m, v;
  for (auto const &l : ae.layers) {
    m.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), Vec::Zero(l.bias.size())});
  }
  v = m;

  TrainResult res;
  double p1 = 1.0, p2 = 1.0;
  for (Index e = 0; e < cfg.epochs; e++) {
    auto pg = ComputeParamGradient(ae, batch);
    if (!std::isfinite(pg.loss)) { Fail("training diverged at epoch {} (loss {})", e, pg.loss); }
    if (e % cfg.loss_log_stride == 0) { res.loss_curve.push_back({e, pg.loss}); }
    double lr = cfg.learning_rate;
    if (cfg.cosine) {
      double const lo = cfg.learning_rate * cfg.final_lr_fraction;
      lr = lo + 0.5 * (cfg.learning_rate - lo) * (1.0 + std::cos(std::numbers::pi * static_cast<double>(e) / static_cast<double>(cfg.epochs)));
    }
    if (cfg.optimizer == Optimizer::PlainGD) {
      for (size_t k = 0; k < ae.layers.size(); k++) {
        ae.layers[k].weight -= lr * pg.grad[k].weight;
        ae.layers[k].bias -= lr * pg.grad[k].bias;
      }
      continue;
    }
    p1 *= b1;
    p2 *= b2;
    double const c1 = 1.0 / (1.0 - p1), c2 = 1.0 / (1.0 - p2);
    auto step = [&](auto &param, auto &mom, auto &var, auto const &g) {
      mom = b1 * mom + (1.0 - b1) * g;
      var = b2 * var.array() + (1.0 - b2) * g.array().square();
      param.array() -= lr * (c1 * mom.array()) / ((c2 * var.array()).sqrt() + eps);
    };
    for (size_t k = 0; k < ae.layers.size(); k++) {
      step(ae.layers[k].weight, m[k].weight, v[k].weight, pg.grad[k].weight);
      step(ae.layers[k].bias, m[k].bias, v[k].bias, pg.grad[k].bias);
    }
  }
  Mat const out = Run(ae, 0, static_cast<Index>(ae.layers.size()), ae.input_scale * batch, nullptr);
  double const final_loss = (out - ae.input_scale * batch).squaredNorm() / static_cast<double>(batch.size());
  if (!std::isfinite(final_loss)) { Fail("training diverged at epoch {} (loss {})", cfg.epochs, final_loss); }
  res.loss_curve.push_back({cfg.epochs, final_loss});

  Mat const codes = EncodeBatch(ae, batch);
  ae.latent_lo = codes.rowwise().minCoeff();
  ae.latent_hi = codes.rowwise().maxCoeff();
  ae.training = ToJson(cfg);
  ae.training["final_loss"] = final_loss;
  res.ae = std::move(ae);
  return res;
}

auto AutoEncoderNrmse(AutoEncoder const &ae, SignalDictionary const &dict) -> CompressionError
{
  Mat const x = dict.atoms.transpose();
  Mat const r = DecodeBatch(ae, EncodeBatch(ae, x)) - x;
  CompressionError e;
  e.per_atom = r.colwise().norm().transpose().cwiseQuotient(x.colwise().norm().transpose());
  e.average = e.per_atom.mean();
  return e;
}

auto ToJson(TrainConfig const &c) -> io::Json
{
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"seed", c.seed},
          {"optimizer", c.optimizer == Optimizer::Adam ? "adam_like" : "plain_gd"},
          {"loss_log_stride", c.loss_log_stride},
          {"cosine", c.cosine},
          {"final_lr_fraction", c.final_lr_fraction},
          {"target_peak", c.target_peak}};
}

// Blob layout: for each layer in order (encoder then decoder), the weight
// matrix row-major (out x in) followed by the bias.
void SaveAutoEncoder(std::filesystem::path const &path, AutoEncoder const &ae)
{
  std::vector<double> blob;
  blob.reserve(static_cast<size_t>(ae.parameter_count()));
  for (auto const &l : ae.layers) {
    for (Index i = 0; i < l.weight.rows(); i++) {
      for (Index j = 0; j < l.weight.cols(); j++) {
        blob.push_back(l.weight(i, j));
      }
    }
    blob.insert(blob.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  io::Json meta{{"dims", ae.dims},
                {"activation", ToString(ae.activation)},
                {"linear_output", ae.linear_output},
                {"normalization", {{"input_scale", ae.input_scale}}},
                {"seed", ae.seed},
                {"training", ae.training}};
  if (ae.latent_lo.size() > 0) {
    meta["latent_range"] = {{"lo", std::vector<double>(ae.latent_lo.data(), ae.latent_lo.data() + ae.latent_lo.size())},
                            {"hi", std::vector<double>(ae.latent_hi.data(), ae.latent_hi.data() + ae.latent_hi.size())}};
  }
  io::WriteReal(path, {static_cast<Index>(blob.size())}, blob, meta);
}

auto LoadAutoEncoder(std::filesystem::path const &path) -> AutoEncoder
{
  auto const a = io::ReadReal(path);
  auto const &meta = a.meta;
  auto const dims = meta.at("dims").get<std::vector<Index>>();
  if (dims.size() < 2) { Fail("{}: model needs at least two widths", path.string()); }
  AutoEncoder ae = InitAutoEncoder(dims.front(), dims.back(), static_cast<Index>(dims.size()) - 1,
                                   ParseActivation(meta.at("activation").get<std::string>()), meta.value("seed", std::uint64_t{0}));
  if (ae.dims != dims) { Fail("{}: widths {} are not a halving chain", path.string(), meta.at("dims").dump()); }
  ae.linear_output = meta.value("linear_output", false);
  ae.input_scale = meta.at("normalization").at("input_scale").get<double>();
  ae.training = meta.value("training", io::Json::object());
  if (a.size() != ae.parameter_count()) {
    Fail("{}: blob has {} values, architecture needs {}", path.string(), a.size(), ae.parameter_count());
  }
  size_t p = 0;
  for (auto &l : ae.layers) {
    for (Index i = 0; i < l.weight.rows(); i++) {
      for (Index j = 0; j < l.weight.cols(); j++) {
        l.weight(i, j) = a.data[p++];
      }
    }
    for (Index i = 0; i < l.bias.size(); i++) {
      l.bias[i] = a.data[p++];
    }
  }
  if (meta.contains("latent_range")) {
    auto const lo = meta["latent_range"].at("lo").get<std::vector<double>>();
    auto const hi = meta["latent_range"].at("hi").get<std::vector<double>>();
    ae.latent_lo = Eigen::Map<Vec const>(lo.data(), static_cast<Index>(lo.size()));
    ae.latent_hi = Eigen::Map<Vec const>(hi.data(), static_cast<Index>(hi.size()));
  }
  return ae;
}

} // namespace lsm
