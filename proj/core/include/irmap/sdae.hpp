#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "irmap/bytes.hpp"
#include "irmap/features.hpp"

namespace irmap::models {

using features::Matrix;

/// Affine map y = W x + b with W stored row-major (outputs x inputs).
struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(int in, int out) : inputs(in), outputs(out), weights(static_cast<std::size_t>(in) * out, 0.0), bias(static_cast<std::size_t>(out), 0.0) {}

  void affine(std::span<const double> x, std::span<double> y) const;
  std::size_t parameter_count() const { return weights.size() + bias.size(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Glorot-uniform weights, zero bias.
DenseLayer init_layer(int inputs, int outputs, std::uint64_t seed);

/// One denoising autoencoder: sigmoid encoder, linear decoder, trained to
/// reconstruct the clean input from a masking-corrupted copy.
struct DenoisingAutoencoder {
  DenseLayer encoder;
  DenseLayer decoder;
  /// Entry 0: objective before training; entry e: mean mini-batch loss of epoch e.
  std::vector<double> loss_trace;

  /// Sigmoid codes for every row.
  Matrix encode(const Matrix& x) const;
};

/// Mean over rows of 0.5 * |decode(encode(corrupted)) - clean|^2.
double dae_loss(const DenoisingAutoencoder& dae, const Matrix& corrupted, const Matrix& clean);
/// Gradient of dae_loss, returned as {encoder grads, decoder grads}.
std::array<DenseLayer, 2> dae_gradient(const DenoisingAutoencoder& dae, const Matrix& corrupted, const Matrix& clean);

/// Zeroes each coordinate independently with probability `corruption`.
Matrix mask_corrupt(const Matrix& x, double corruption, std::uint64_t seed);

/// Mini-batch SGD on the denoising objective. Throws TrainingError (with the
/// loss trace in the message) if the loss becomes non-finite.
DenoisingAutoencoder pretrain_dae_layer(const Matrix& x, int hidden, double corruption, int epochs, double learning_rate,
                                        std::uint64_t seed, int batch_size = 64);

struct SDAEConfig {
  std::vector<int> hidden = {32, 16};
  double corruption = 0.2;
  double learning_rate = 0.05;
  int batch_size = 64;
  int pretrain_epochs = 15;
  int finetune_epochs = 100;
  int patience = 20;
  double holdout = 0.1;
};

/// Sigmoid hidden layers followed by a 2-way softmax head.
struct SDAEModel {
  SDAEConfig config;
  std::uint64_t seed = 0;
  std::vector<DenseLayer> layers;
  std::vector<std::vector<double>> pretrain_traces;  // one per hidden layer
  std::vector<double> train_loss;                    // fine-tuning, per epoch
  std::vector<double> validation_loss;
  int best_epoch = 0;

  std::size_t input_dimension() const { return layers.empty() ? 0 : static_cast<std::size_t>(layers.front().inputs); }
  std::array<double, 2> softmax(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const { return softmax(x)[1]; }
};

/// Mean cross-entropy of the stack on (x, y).
double classification_loss(std::span<const DenseLayer> layers, const Matrix& x, std::span<const std::uint8_t> y);
/// Analytic gradient of classification_loss, layer by layer.
std::vector<DenseLayer> classification_gradient(std::span<const DenseLayer> layers, const Matrix& x,
                                                std::span<const std::uint8_t> y);

/// Layerwise denoising pretraining, then supervised fine-tuning of the whole
/// stack with early stopping on a held-out split.
SDAEModel train_sdae(const Matrix& x, std::span<const std::uint8_t> y, const SDAEConfig& config, std::uint64_t seed);

void write_sdae(ByteWriter& w, const SDAEModel& model);
SDAEModel read_sdae(ByteReader& r);

}  // namespace irmap::models
