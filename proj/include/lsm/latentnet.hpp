#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "signal_sim.hpp"
#include "subspace.hpp"

namespace lsm {

enum class Activation
{
  Tanh,
  Relu,
  LeakyRelu,
  Identity // test mode
};

auto ToString(Activation a) -> std::string;
auto ParseActivation(std::string const &s) -> Activation;

struct DenseLayer
{
  Mat weight; // out x in
  Vec bias;
};

/// Fully-connected autoencoder. Layers [0, n_enc) form the encoder, the rest
/// the decoder; decoder widths mirror the encoder widths.
///
/// Signals are multiplied by input_scale before entering the network and
/// decoded outputs divided by it, so the activation range is used fully.
struct AutoEncoder
{
  std::vector<Index> dims; // encoder widths [T, ..., L]
  Activation activation = Activation::Tanh;
  bool linear_output = false;
  double input_scale = 1.0;
  std::uint64_t seed = 0;
  std::vector<DenseLayer> layers;
  Vec latent_lo, latent_hi; // latent code range over the training dictionary
  io::Json training = io::Json::object();

  auto length() const -> Index { return dims.front(); }
  auto latent() const -> Index { return dims.back(); }
  auto encoder_layers() const -> Index { return static_cast<Index>(dims.size()) - 1; }
  auto parameter_count() const -> Index;
};

auto InitAutoEncoder(Index T, Index L, Index n_layers, Activation act, std::uint64_t seed) -> AutoEncoder;

// Batched maps take one sample per column.
auto EncodeBatch(AutoEncoder const &ae, Mat const &signals) -> Mat;
auto DecodeBatch(AutoEncoder const &ae, Mat const &latents) -> Mat;
auto Encode(AutoEncoder const &ae, Vec const &signal) -> Vec;
auto Decode(AutoEncoder const &ae, Vec const &latent) -> Vec;

/// Gradient of the mean squared reconstruction error over the batch, in the
/// network's scaled units.
struct ParamGradient
{
  double loss = 0.0;
  std::vector<DenseLayer> grad;
};
auto ComputeParamGradient(AutoEncoder const &ae, Mat const &batch) -> ParamGradient;

/// J^T c per column, J the Jacobian of Decode at each latent.
auto InputGradient(AutoEncoder const &ae, Mat const &latents, Mat const &cotangents) -> Mat;

/// A decoder forward pass that keeps what the reverse pass needs, so decode
/// and J^T c at the same latents cost one pass each.
struct DecoderLinearization
{
  Mat output; // T x n, same as DecodeBatch
  std::vector<Mat> inputs, slopes;
};
auto LinearizeDecoder(AutoEncoder const &ae, Mat const &latents) -> DecoderLinearization;
auto DecoderVjp(AutoEncoder const &ae, DecoderLinearization const &lin, Mat const &cotangents) -> Mat;

enum class Optimizer
{
  Adam,
  PlainGD
};

struct TrainConfig
{
  Index epochs = 100000;
  double learning_rate = 1e-5;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Adam;
  Index loss_log_stride = 100;
  bool cosine = false;         // cosine decay to final_lr_fraction * learning_rate
  double final_lr_fraction = 0.01;
  double target_peak = 0.0;    // > 0: rescale inputs so max |D| maps to this value (never shrinks)

  void validate() const;
};

struct LossPoint
{
  Index epoch;
  double loss;
};

struct TrainResult
{
  AutoEncoder ae;
  std::vector<LossPoint> loss_curve;
};

auto TrainAutoEncoder(SignalDictionary const &dict, AutoEncoder ae, TrainConfig const &cfg) -> TrainResult;

/// Per-atom ||decode(encode(a)) - a|| / ||a||.
auto AutoEncoderNrmse(AutoEncoder const &ae, SignalDictionary const &dict) -> CompressionError;

void SaveAutoEncoder(std::filesystem::path const &path, AutoEncoder const &ae);
auto LoadAutoEncoder(std::filesystem::path const &path) -> AutoEncoder;

auto ToJson(TrainConfig const &c) -> io::Json;

} // namespace lsm
