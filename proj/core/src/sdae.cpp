#include "irmap/sdae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "irmap/error.hpp"
#include "irmap/random.hpp"

namespace irmap::models {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void zero(DenseLayer& g) {
  std::fill(g.weights.begin(), g.weights.end(), 0.0);
  std::fill(g.bias.begin(), g.bias.end(), 0.0);
}

DenseLayer zeros_like(const DenseLayer& l) { return DenseLayer(l.inputs, l.outputs); }

// g += delta * input^T
void accumulate_outer(DenseLayer& g, std::span<const double> delta, std::span<const double> input) {
  for (int o = 0; o < g.outputs; ++o) {
    const double d = delta[static_cast<std::size_t>(o)];
    g.bias[static_cast<std::size_t>(o)] += d;
    if (d == 0.0) continue;
    double* row = g.weights.data() + static_cast<std::size_t>(o) * g.inputs;
    for (int i = 0; i < g.inputs; ++i) row[i] += d * input[static_cast<std::size_t>(i)];
  }
}

// out = W^T delta
void back_project(const DenseLayer& l, std::span<const double> delta, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (int o = 0; o < l.outputs; ++o) {
    const double d = delta[static_cast<std::size_t>(o)];
    const double* row = l.weights.data() + static_cast<std::size_t>(o) * l.inputs;
    for (int i = 0; i < l.inputs; ++i) out[static_cast<std::size_t>(i)] += row[i] * d;
  }
}

void sgd_step(DenseLayer& l, const DenseLayer& g, double step) {
  for (std::size_t i = 0; i < l.weights.size(); ++i) l.weights[i] -= step * g.weights[i];
  for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] -= step * g.bias[i];
}

void check_layers(std::span<const DenseLayer> layers, std::size_t input_dim) {
  if (layers.empty()) throw DataError("network has no layers");
  if (static_cast<std::size_t>(layers.front().inputs) != input_dim)
    throw DataError("network input dimension " + std::to_string(layers.front().inputs) + " does not match " +
                    std::to_string(input_dim));
  for (std::size_t i = 1; i < layers.size(); ++i)
    if (layers[i].inputs != layers[i - 1].outputs) throw DataError("network layer dimensions do not chain");
  if (layers.back().outputs != 2) throw DataError("network head must have 2 outputs");
}

// Per-sample forward/backward through sigmoid hidden layers and a softmax head.
class Backprop {
 public:
  explicit Backprop(std::span<const DenseLayer> layers) : layers_(layers) {
    acts_.resize(layers.size() + 1);
    deltas_.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l) {
      acts_[l + 1].resize(static_cast<std::size_t>(layers[l].outputs));
      deltas_[l].resize(static_cast<std::size_t>(layers[l].outputs));
    }
    acts_[0].resize(static_cast<std::size_t>(layers.front().inputs));
  }

  // Returns -log p(label); accumulates gradients into `grads` when non-null.
  double run(std::span<const double> x, std::uint8_t label, std::vector<DenseLayer>* grads) {
    std::copy(x.begin(), x.end(), acts_[0].begin());
    const std::size_t n_layers = layers_.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
      layers_[l].affine(acts_[l], acts_[l + 1]);
      if (l + 1 < n_layers)
        for (double& a : acts_[l + 1]) a = sigmoid(a);
    }
    auto& z = acts_[n_layers];
    const double zmax = std::max(z[0], z[1]);
    const double lse = zmax + std::log(std::exp(z[0] - zmax) + std::exp(z[1] - zmax));
    const double loss = lse - z[label];
    if (!grads) return loss;

    auto& top = deltas_[n_layers - 1];
    for (std::size_t k = 0; k < 2; ++k) top[k] = std::exp(z[k] - lse) - (k == label ? 1.0 : 0.0);
    for (std::size_t l = n_layers; l-- > 0;) {
      accumulate_outer((*grads)[l], deltas_[l], acts_[l]);
      if (l == 0) break;
      back_project(layers_[l], deltas_[l], deltas_[l - 1]);
      for (std::size_t i = 0; i < deltas_[l - 1].size(); ++i) {
        const double a = acts_[l][i];
        deltas_[l - 1][i] *= a * (1.0 - a);
      }
    }
    return loss;
  }

 private:
  std::span<const DenseLayer> layers_;
  std::vector<std::vector<double>> acts_;
  std::vector<std::vector<double>> deltas_;
};

// Per-sample denoising reconstruction pass.
class DaePass {
 public:
  explicit DaePass(const DenoisingAutoencoder& dae)
      : dae_(dae),
        hidden_(static_cast<std::size_t>(dae.encoder.outputs)),
        recon_(static_cast<std::size_t>(dae.decoder.outputs)),
        delta_h_(hidden_.size()) {}

  double run(std::span<const double> corrupted, std::span<const double> clean, std::array<DenseLayer, 2>* grads) {
    dae_.encoder.affine(corrupted, hidden_);
    for (double& h : hidden_) h = sigmoid(h);
    dae_.decoder.affine(hidden_, recon_);
    double loss = 0.0;
    for (std::size_t i = 0; i < recon_.size(); ++i) {
      recon_[i] -= clean[i];
      loss += 0.5 * recon_[i] * recon_[i];
    }
    if (!grads) return loss;
    accumulate_outer((*grads)[1], recon_, hidden_);
    back_project(dae_.decoder, recon_, delta_h_);
    for (std::size_t i = 0; i < hidden_.size(); ++i) delta_h_[i] *= hidden_[i] * (1.0 - hidden_[i]);
    accumulate_outer((*grads)[0], delta_h_, corrupted);
    return loss;
  }

 private:
  const DenoisingAutoencoder& dae_;
  std::vector<double> hidden_;
  std::vector<double> recon_;
  std::vector<double> delta_h_;
};

std::string trace_text(std::span<const double> trace) {
  std::ostringstream os;
  os << "loss trace:";
  for (double v : trace) os << ' ' << v;
  return os.str();
}

void mask_row(std::span<const double> in, std::span<double> out, double corruption, Rng& rng) {
  std::bernoulli_distribution drop(corruption);
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = (corruption > 0.0 && drop(rng)) ? 0.0 : in[i];
}

}  // namespace

void DenseLayer::affine(std::span<const double> x, std::span<double> y) const {
  for (int o = 0; o < outputs; ++o) {
    const double* row = weights.data() + static_cast<std::size_t>(o) * inputs;
    double acc = bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < inputs; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] = acc;
  }
}

DenseLayer init_layer(int inputs, int outputs, std::uint64_t seed) {
  if (inputs <= 0 || outputs <= 0) throw DataError("layer dimensions must be positive");
  DenseLayer l(inputs, outputs);
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / (inputs + outputs));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& w : l.weights) w = u(rng);
  return l;
}

Matrix DenoisingAutoencoder::encode(const Matrix& x) const {
  Matrix out(x.rows(), static_cast<std::size_t>(encoder.outputs));
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = out.row(r);
    encoder.affine(x.row(r), row);
    for (double& v : row) v = sigmoid(v);
  }
  return out;
}

double dae_loss(const DenoisingAutoencoder& dae, const Matrix& corrupted, const Matrix& clean) {
  DaePass pass(dae);
  double sum = 0.0;
  for (std::size_t r = 0; r < clean.rows(); ++r) sum += pass.run(corrupted.row(r), clean.row(r), nullptr);
  return sum / static_cast<double>(clean.rows());
}

std::array<DenseLayer, 2> dae_gradient(const DenoisingAutoencoder& dae, const Matrix& corrupted, const Matrix& clean) {
  std::array<DenseLayer, 2> g = {zeros_like(dae.encoder), zeros_like(dae.decoder)};
  DaePass pass(dae);
  for (std::size_t r = 0; r < clean.rows(); ++r) pass.run(corrupted.row(r), clean.row(r), &g);
  const double inv = 1.0 / static_cast<double>(clean.rows());
  for (auto& layer : g) {
    for (double& v : layer.weights) v *= inv;
    for (double& v : layer.bias) v *= inv;
  }
  return g;
}

Matrix mask_corrupt(const Matrix& x, double corruption, std::uint64_t seed) {
  Matrix out(x.rows(), x.cols());
  Rng rng(seed);
  for (std::size_t r = 0; r < x.rows(); ++r) mask_row(x.row(r), out.row(r), corruption, rng);
  return out;
}

DenoisingAutoencoder pretrain_dae_layer(const Matrix& x, int hidden, double corruption, int epochs, double learning_rate,
                                        std::uint64_t seed, int batch_size) {
  if (!(corruption >= 0.0 && corruption < 1.0)) throw DataError("pretrain_dae_layer: corruption must be in [0, 1)");
  if (x.rows() == 0 || hidden <= 0 || epochs < 0 || batch_size <= 0 || !(learning_rate > 0.0))
    throw DataError("pretrain_dae_layer: invalid arguments");
  const int d = static_cast<int>(x.cols());
  DenoisingAutoencoder dae;
  dae.encoder = init_layer(d, hidden, derive_seed(seed, 0));
  dae.decoder = init_layer(hidden, d, derive_seed(seed, 1));
  Rng rng(derive_seed(seed, 2));

  dae.loss_trace.push_back(dae_loss(dae, mask_corrupt(x, corruption, derive_seed(seed, 3)), x));
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::array<DenseLayer, 2> grads = {zeros_like(dae.encoder), zeros_like(dae.decoder)};
  std::vector<double> corrupted(x.cols());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      zero(grads[0]);
      zero(grads[1]);
      DaePass pass(dae);
      for (std::size_t k = start; k < end; ++k) {
        mask_row(x.row(order[k]), corrupted, corruption, rng);
        epoch_loss += pass.run(corrupted, x.row(order[k]), &grads);
      }
      const double step = learning_rate / static_cast<double>(end - start);
      sgd_step(dae.encoder, grads[0], step);
      sgd_step(dae.decoder, grads[1], step);
    }
    epoch_loss /= static_cast<double>(x.rows());
    dae.loss_trace.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss))
      throw TrainingError("denoising autoencoder diverged at epoch " + std::to_string(epoch + 1) + "; " +
                          trace_text(dae.loss_trace));
  }
  return dae;
}

std::array<double, 2> SDAEModel::softmax(std::span<const double> x) const {
  if (x.size() != input_dimension())
    throw DataError("SDAE expected " + std::to_string(input_dimension()) + " features, got " + std::to_string(x.size()));
  std::vector<double> a(x.begin(), x.end()), next;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    next.assign(static_cast<std::size_t>(layers[l].outputs), 0.0);
    layers[l].affine(a, next);
    if (l + 1 < layers.size())
      for (double& v : next) v = sigmoid(v);
    a.swap(next);
  }
  const double zmax = std::max(a[0], a[1]);
  const double e0 = std::exp(a[0] - zmax), e1 = std::exp(a[1] - zmax);
  const double p1 = e1 / (e0 + e1);
  return {1.0 - p1, p1};
}

double classification_loss(std::span<const DenseLayer> layers, const Matrix& x, std::span<const std::uint8_t> y) {
  check_layers(layers, x.cols());
  Backprop bp(layers);
  double sum = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) sum += bp.run(x.row(r), y[r], nullptr);
  return sum / static_cast<double>(x.rows());
}

std::vector<DenseLayer> classification_gradient(std::span<const DenseLayer> layers, const Matrix& x,
                                                std::span<const std::uint8_t> y) {
  check_layers(layers, x.cols());
  std::vector<DenseLayer> grads;
  for (const auto& l : layers) grads.push_back(zeros_like(l));
  Backprop bp(layers);
  for (std::size_t r = 0; r < x.rows(); ++r) bp.run(x.row(r), y[r], &grads);
  const double inv = 1.0 / static_cast<double>(x.rows());
  for (auto& g : grads) {
    for (double& v : g.weights) v *= inv;
    for (double& v : g.bias) v *= inv;
  }
  return grads;
}

SDAEModel train_sdae(const Matrix& x, std::span<const std::uint8_t> y, const SDAEConfig& config, std::uint64_t seed) {
  if (x.rows() == 0 || x.rows() != y.size()) throw DataError("train_sdae: need matching, non-empty X and y");
  for (auto label : y)
    if (label > 1) throw DataError("train_sdae: labels must be 0 or 1");
  if (config.hidden.empty() || config.batch_size <= 0 || config.finetune_epochs < 0 || config.patience < 1 ||
      !(config.holdout >= 0.0 && config.holdout < 1.0))
    throw DataError("train_sdae: invalid config");

  SDAEModel model;
  model.config = config;
  model.seed = seed;

  Rng split_rng(derive_seed(seed, 100));
  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  const std::size_t n_val = x.rows() >= 10 ? static_cast<std::size_t>(std::lround(config.holdout * x.rows())) : 0;
  Matrix train_x, val_x;
  std::vector<std::uint8_t> train_y, val_y;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k < n_val) {
      val_x.append_row(x.row(order[k]));
      val_y.push_back(y[order[k]]);
    } else {
      train_x.append_row(x.row(order[k]));
      train_y.push_back(y[order[k]]);
    }
  }

  Matrix codes = train_x;
  for (std::size_t l = 0; l < config.hidden.size(); ++l) {
    DenoisingAutoencoder dae = pretrain_dae_layer(codes, config.hidden[l], config.corruption, config.pretrain_epochs,
                                                  config.learning_rate, derive_seed(seed, l), config.batch_size);
    codes = dae.encode(codes);
    model.layers.push_back(std::move(dae.encoder));
    model.pretrain_traces.push_back(std::move(dae.loss_trace));
  }
  model.layers.push_back(init_layer(config.hidden.back(), 2, derive_seed(seed, 50)));

  Rng rng(derive_seed(seed, 101));
  std::vector<std::size_t> idx(train_x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<DenseLayer> grads;
  for (const auto& l : model.layers) grads.push_back(zeros_like(l));
  std::vector<DenseLayer> best = model.layers;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 1; epoch <= config.finetune_epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(config.batch_size));
      for (auto& g : grads) zero(g);
      Backprop bp(model.layers);
      for (std::size_t k = start; k < end; ++k) epoch_loss += bp.run(train_x.row(idx[k]), train_y[idx[k]], &grads);
      const double step = config.learning_rate / static_cast<double>(end - start);
      for (std::size_t l = 0; l < model.layers.size(); ++l) sgd_step(model.layers[l], grads[l], step);
    }
    epoch_loss /= static_cast<double>(std::max<std::size_t>(1, idx.size()));
    model.train_loss.push_back(epoch_loss);
    if (!std::isfinite(epoch_loss))
      throw TrainingError("SDAE fine-tuning diverged at epoch " + std::to_string(epoch) + "; " +
                          trace_text(model.train_loss));
    if (n_val == 0) {
      best = model.layers;
      model.best_epoch = epoch;
      continue;
    }
    const double val = classification_loss(model.layers, val_x, val_y);
    model.validation_loss.push_back(val);
    if (val < best_val) {
      best_val = val;
      best = model.layers;
      model.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model.layers = std::move(best);
  return model;
}

namespace {
void write_layer(ByteWriter& w, const DenseLayer& l) {
  w.i32(l.inputs);
  w.i32(l.outputs);
  w.f64s(l.weights);
  w.f64s(l.bias);
}

DenseLayer read_layer(ByteReader& r) {
  DenseLayer l;
  l.inputs = r.i32();
  l.outputs = r.i32();
  l.weights = r.f64s();
  l.bias = r.f64s();
  if (l.inputs <= 0 || l.outputs <= 0 || l.weights.size() != static_cast<std::size_t>(l.inputs) * l.outputs ||
      l.bias.size() != static_cast<std::size_t>(l.outputs))
    throw DataError("SDAE block: layer dimensions inconsistent");
  return l;
}
}  // namespace

void write_sdae(ByteWriter& w, const SDAEModel& m) {
  w.u64(m.config.hidden.size());
  for (int h : m.config.hidden) w.i32(h);
  w.f64(m.config.corruption);
  w.f64(m.config.learning_rate);
  w.i32(m.config.batch_size);
  w.i32(m.config.pretrain_epochs);
  w.i32(m.config.finetune_epochs);
  w.i32(m.config.patience);
  w.f64(m.config.holdout);
  w.u64(m.seed);
  w.i32(m.best_epoch);
  w.u64(m.layers.size());
  for (const auto& l : m.layers) write_layer(w, l);
  w.u64(m.pretrain_traces.size());
  for (const auto& t : m.pretrain_traces) w.f64s(t);
  w.f64s(m.train_loss);
  w.f64s(m.validation_loss);
}

SDAEModel read_sdae(ByteReader& r) {
  SDAEModel m;
  const std::uint64_t n_hidden = r.u64();
  if (n_hidden > 64) throw DataError("SDAE block: too many hidden layers");
  m.config.hidden.resize(n_hidden);
  for (auto& h : m.config.hidden) h = r.i32();
  m.config.corruption = r.f64();
  m.config.learning_rate = r.f64();
  m.config.batch_size = r.i32();
  m.config.pretrain_epochs = r.i32();
  m.config.finetune_epochs = r.i32();
  m.config.patience = r.i32();
  m.config.holdout = r.f64();
  m.seed = r.u64();
  m.best_epoch = r.i32();
  const std::uint64_t n_layers = r.u64();
  if (n_layers == 0 || n_layers > 65) throw DataError("SDAE block: bad layer count");
  for (std::uint64_t i = 0; i < n_layers; ++i) m.layers.push_back(read_layer(r));
  check_layers(m.layers, static_cast<std::size_t>(m.layers.front().inputs));
  const std::uint64_t n_traces = r.u64();
  if (n_traces > 64) throw DataError("SDAE block: bad trace count");
  for (std::uint64_t i = 0; i < n_traces; ++i) m.pretrain_traces.push_back(r.f64s());
  m.train_loss = r.f64s();
  m.validation_loss = r.f64s();
  return m;
}

}  // namespace irmap::models
