#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "irmap/error.hpp"
#include "irmap/sdae.hpp"

using namespace irmap;
using namespace irmap::models;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = d(rng);
  return m;
}

std::vector<DenseLayer> random_stack(std::vector<int> dims, std::uint64_t seed) {
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    auto l = init_layer(dims[i], dims[i + 1], seed + i);
    std::mt19937_64 rng(seed * 31 + i);
    std::normal_distribution<double> d(0.0, 0.1);
    for (double& b : l.bias) b = d(rng);
    layers.push_back(std::move(l));
  }
  return layers;
}

// Largest relative error between an analytic gradient and central differences,
// with the denominator floored so near-zero entries do not dominate.
template <typename Loss>
double fd_check(std::vector<DenseLayer*> params, const std::vector<const DenseLayer*>& grads, Loss loss) {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t l = 0; l < params.size(); ++l) {
    auto check = [&](double& p, double analytic) {
      const double saved = p;
      p = saved + h;
      const double up = loss();
      p = saved - h;
      const double down = loss();
      p = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-3}));
    };
    for (std::size_t i = 0; i < params[l]->weights.size(); ++i) check(params[l]->weights[i], grads[l]->weights[i]);
    for (std::size_t i = 0; i < params[l]->bias.size(); ++i) check(params[l]->bias[i], grads[l]->bias[i]);
  }
  return worst;
}

}  // namespace

TEST(DenseLayer, AffineHandArithmetic) {
  DenseLayer l(2, 2);
  l.weights = {1.0, 2.0, -1.0, 0.5};
  l.bias = {0.5, -1.0};
  const std::vector<double> x = {3.0, 4.0};
  std::vector<double> y(2);
  l.affine(x, y);
  EXPECT_DOUBLE_EQ(y[0], 11.5);
  EXPECT_DOUBLE_EQ(y[1], -2.0);
}

TEST(DenseLayer, GlorotBounds) {
  const auto l = init_layer(16, 8, 3);
  const double bound = std::sqrt(6.0 / 24.0);
  for (double w : l.weights) EXPECT_LE(std::abs(w), bound);
  for (double b : l.bias) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(l.parameter_count(), 16u * 8u + 8u);
  EXPECT_THROW(init_layer(0, 3, 1), DataError);
}

TEST(Sdae, ClassificationGradientMatchesFiniteDifferences) {
  const auto x = random_matrix(12, 5, 1);
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 12; ++i) y.push_back(static_cast<std::uint8_t>(i % 3 == 0));
  auto layers = random_stack({5, 4, 3, 2}, 7);
  const auto grads = classification_gradient(layers, x, y);
  std::vector<DenseLayer*> p;
  std::vector<const DenseLayer*> g;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    p.push_back(&layers[i]);
    g.push_back(&grads[i]);
  }
  EXPECT_LT(fd_check(p, g, [&] { return classification_loss(layers, x, y); }), 1e-4);
}

TEST(Sdae, DenoisingGradientMatchesFiniteDifferences) {
  const auto clean = random_matrix(10, 6, 2);
  const auto corrupted = mask_corrupt(clean, 0.3, 5);
  DenoisingAutoencoder dae;
  dae.encoder = random_stack({6, 4}, 3)[0];
  dae.decoder = random_stack({4, 6}, 4)[0];
  const auto grads = dae_gradient(dae, corrupted, clean);
  EXPECT_LT(fd_check({&dae.encoder, &dae.decoder}, {&grads[0], &grads[1]},
                     [&] { return dae_loss(dae, corrupted, clean); }),
            1e-4);
}

TEST(Sdae, MaskCorruptZeroesOnlyEntries) {
  const auto x = random_matrix(50, 10, 3);
  const auto c = mask_corrupt(x, 0.25, 1);
  std::size_t zeros = 0;
  for (std::size_t r = 0; r < 50; ++r)
    for (std::size_t k = 0; k < 10; ++k) {
      if (c(r, k) == 0.0) ++zeros;
      else EXPECT_EQ(c(r, k), x(r, k));
    }
  EXPECT_NEAR(zeros / 500.0, 0.25, 0.06);
  EXPECT_EQ(mask_corrupt(x, 0.0, 1), x);
}

TEST(Sdae, PretrainingReducesReconstructionLoss) {
  // Inputs on a 2-D subspace of R^6 so a 3-unit code can reconstruct them.
  const auto z = random_matrix(400, 2, 4);
  Matrix x(400, 6);
  for (std::size_t r = 0; r < 400; ++r)
    for (std::size_t c = 0; c < 6; ++c) x(r, c) = z(r, 0) * (c + 1) * 0.2 + z(r, 1) * (c % 2 ? 0.5 : -0.5);
  const auto dae = pretrain_dae_layer(x, 3, 0.1, 20, 0.05, 9);
  ASSERT_EQ(dae.loss_trace.size(), 21u);
  EXPECT_LT(dae.loss_trace.back(), 0.5 * dae.loss_trace.front());
  const auto codes = dae.encode(x);
  EXPECT_EQ(codes.cols(), 3u);
  for (double v : codes.values()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(Sdae, SeparableBlobsAndSoftmax) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix x(600, 4);
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < 600; ++i) {
    const std::uint8_t cls = i % 2;
    for (std::size_t c = 0; c < 4; ++c) x(i, c) = d(rng) + (c < 2 ? (cls ? 2.5 : -2.5) : 0.0);
    y.push_back(cls);
  }
  SDAEConfig cfg;
  cfg.hidden = {8, 4};
  cfg.pretrain_epochs = 5;
  cfg.finetune_epochs = 40;
  const auto m = train_sdae(x, y, cfg, 3);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < 600; ++i) {
    const auto s = m.softmax(x.row(i));
    EXPECT_NEAR(s[0] + s[1], 1.0, 1e-12);
    EXPECT_GE(s[0], 0.0);
    EXPECT_GE(s[1], 0.0);
    ok += (s[1] >= 0.5) == (y[i] == 1);
  }
  EXPECT_GE(ok / 600.0, 0.95);
  EXPECT_EQ(m.pretrain_traces.size(), 2u);
  EXPECT_EQ(m.layers.size(), 3u);
  EXPECT_FALSE(m.train_loss.empty());
}

TEST(Sdae, DeterministicForSeed) {
  const auto x = random_matrix(120, 3, 6);
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < 120; ++i) y.push_back(x(i, 0) > 0.0);
  SDAEConfig cfg;
  cfg.hidden = {4};
  cfg.pretrain_epochs = 2;
  cfg.finetune_epochs = 5;
  const auto a = train_sdae(x, y, cfg, 8), b = train_sdae(x, y, cfg, 8);
  EXPECT_EQ(a.layers, b.layers);
  EXPECT_EQ(a.train_loss, b.train_loss);
}

TEST(Sdae, SerializationRoundTripAndErrors) {
  const auto x = random_matrix(60, 3, 7);
  std::vector<std::uint8_t> y;
  for (std::size_t i = 0; i < 60; ++i) y.push_back(x(i, 1) > 0.0);
  SDAEConfig cfg;
  cfg.hidden = {3};
  cfg.pretrain_epochs = 1;
  cfg.finetune_epochs = 3;
  const auto m = train_sdae(x, y, cfg, 2);
  ByteWriter w;
  write_sdae(w, m);
  ByteReader r(w.bytes());
  const auto back = read_sdae(r);
  EXPECT_EQ(back.layers, m.layers);
  for (std::size_t i = 0; i < 60; ++i) EXPECT_EQ(back.predict_proba(x.row(i)), m.predict_proba(x.row(i)));
  const std::vector<double> wrong = {1.0};
  EXPECT_THROW(m.predict_proba(wrong), DataError);
  std::vector<std::uint8_t> bad(y);
  bad[0] = 3;
  EXPECT_THROW(train_sdae(x, bad, cfg, 1), DataError);
}
