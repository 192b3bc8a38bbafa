#include <gtest/gtest.h>

#include "lcasc/autoencoder.hpp"
#include "lcasc/corpus.hpp"
#include "oracles.hpp"

using namespace lcasc;

namespace {

// Loss through dense matrices only: a = We^T x + b, recon = Wd a.
double dense_loss(const AutoencoderModel& m, const ImageTensor& clean, const ImageTensor& noisy) {
  const auto pe = oracle::dense_synthesis(m.encoder, clean.rows(), clean.cols());
  const auto pd = oracle::dense_synthesis(m.decoder, clean.rows(), clean.cols());
  auto a = oracle::multiply_t(pe, {noisy.values().begin(), noisy.values().end()});
  for (std::size_t j = 0; j < a.size(); ++j) a[j] += m.encoder_bias[j % pe.K];
  const auto r = oracle::multiply(pd, a);
  double l = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) l += (clean.values()[i] - r[i]) * (clean.values()[i] - r[i]);
  return 0.5 * l;
}

struct Instance {
  AutoencoderModel model;
  ImageTensor clean, noisy;
};

Instance tiny(std::uint64_t seed) {
  Instance in;
  in.model = init_autoencoder(seed, 3, 3, 2, 1);
  std::mt19937_64 g(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  for (double& b : in.model.encoder_bias) b = n(g);
  in.clean = oracle::random_image(seed + 1, 5, 4, 2);
  in.noisy = add_gaussian_noise(in.clean, 0.5, seed);
  return in;
}

}  // namespace

TEST(Autoencoder, LossMatchesDenseOracle) {
  const Instance in = tiny(1);
  const AeGradients g = ae_backward(in.clean, in.noisy, in.model);
  EXPECT_NEAR(g.loss, dense_loss(in.model, in.clean, in.noisy), 1e-10);
}

TEST(Autoencoder, EncoderGradientFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Instance in = tiny(seed);
    const AeGradients g = ae_backward(in.clean, in.noisy, in.model);
    std::vector<double> p(in.model.encoder.values().begin(), in.model.encoder.values().end());
    const auto num = oracle::numeric_gradient(p, [&] {
      AutoencoderModel m = in.model;
      std::copy(p.begin(), p.end(), m.encoder.values().begin());
      return dense_loss(m, in.clean, in.noisy);
    });
    EXPECT_LT(oracle::max_relative_error(num, g.encoder.values()), 1e-5) << "seed " << seed;
  }
}

TEST(Autoencoder, DecoderGradientFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Instance in = tiny(seed);
    const AeGradients g = ae_backward(in.clean, in.noisy, in.model);
    std::vector<double> p(in.model.decoder.values().begin(), in.model.decoder.values().end());
    const auto num = oracle::numeric_gradient(p, [&] {
      AutoencoderModel m = in.model;
      std::copy(p.begin(), p.end(), m.decoder.values().begin());
      return dense_loss(m, in.clean, in.noisy);
    });
    EXPECT_LT(oracle::max_relative_error(num, g.decoder.values()), 1e-5) << "seed " << seed;
  }
}

TEST(Autoencoder, BiasGradientFiniteDifference) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Instance in = tiny(seed);
    const AeGradients g = ae_backward(in.clean, in.noisy, in.model);
    std::vector<double> p = in.model.encoder_bias;
    const auto num = oracle::numeric_gradient(p, [&] {
      AutoencoderModel m = in.model;
      m.encoder_bias = p;
      return dense_loss(m, in.clean, in.noisy);
    });
    EXPECT_LT(oracle::max_relative_error(num, g.bias), 1e-5) << "seed " << seed;
  }
}

TEST(Noise, SeededAndSigmaZeroIsIdentity) {
  const ImageTensor x = oracle::random_image(1, 8, 8, 3);
  EXPECT_TRUE(add_gaussian_noise(x, 0.0, 5) == x);
  EXPECT_TRUE(add_gaussian_noise(x, 0.5, 5) == add_gaussian_noise(x, 0.5, 5));
  EXPECT_FALSE(add_gaussian_noise(x, 0.5, 5) == add_gaussian_noise(x, 0.5, 6));
  EXPECT_THROW(add_gaussian_noise(x, -1.0, 5), InvalidArgument);
}

TEST(Noise, SampleMomentsMatchSigma) {
  const ImageTensor zero(64, 64, 3);
  const ImageTensor n = add_gaussian_noise(zero, 0.5, 11);
  double s = 0.0, s2 = 0.0;
  for (double v : n.values()) {
    s += v;
    s2 += v * v;
  }
  const double count = static_cast<double>(n.size());
  EXPECT_NEAR(s / count, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(s2 / count), 0.5, 0.02);
}

TEST(AeTraining, ZeroEpochsReturnsInit) {
  std::vector<ImageTensor> corpus{preprocess(synth_graphic(SynthSpec::from_seed(1, 16, 16)))};
  AeTrainConfig cfg;
  cfg.epochs = 0;
  const AutoencoderModel init = init_autoencoder(3, 4, 8, 3, 4);
  EXPECT_TRUE(train_autoencoder(corpus, init, cfg).model == init);
}

TEST(AeTraining, LossDecreasesAndIsDeterministic) {
  std::vector<ImageTensor> corpus;
  for (std::uint64_t i = 0; i < 8; ++i) {
    corpus.push_back(preprocess(synth_graphic(SynthSpec::from_seed(i, 24, 24))));
  }
  AeTrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 4;
  const AutoencoderModel init = init_autoencoder(3, 8, 8, 3, 4);
  const AeTrainResult a = train_autoencoder(corpus, init, cfg);
  EXPECT_LT(a.stats.back().mse, a.stats.front().mse);
  AeTrainConfig threaded = cfg;
  threaded.threads = 3;
  const AeTrainResult b = train_autoencoder(corpus, init, threaded);
  EXPECT_TRUE(a.model == b.model);
}

TEST(AeTraining, SigmaZeroAllowed) {
  std::vector<ImageTensor> corpus{preprocess(synth_graphic(SynthSpec::from_seed(2, 16, 16)))};
  AeTrainConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.epochs = 2;
  EXPECT_NO_THROW(train_autoencoder(corpus, init_autoencoder(1, 4, 8, 3, 4), cfg));
}

TEST(AeTraining, InstabilityIsAnError) {
  std::vector<ImageTensor> corpus{oracle::random_image(1, 16, 16, 3, 10.0)};
  AeTrainConfig cfg;
  cfg.learning_rate = 10.0;
  cfg.epochs = 5;
  cfg.batch_size = 1;
  EXPECT_THROW(train_autoencoder(corpus, init_autoencoder(1, 4, 8, 3, 4), cfg), InstabilityError);
}

TEST(Analysis, NormalizationScalesFiltersAndBias) {
  AutoencoderModel m = init_autoencoder(4, 5, 4, 3, 2);
  scale(3.0, m.encoder.values());
  m.encoder_bias = {1, 2, 3, 4, 5};
  const AutoencoderModel n = normalized_for_analysis(m);
  const ImageTensor x = oracle::random_image(2, 8, 8, 3);
  const ActivationTensor raw = ae_encode(x, m);
  const ActivationTensor unit = ae_encode(x, n);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_NEAR(squared_norm(n.encoder.element(k)), 1.0, 1e-12);
    EXPECT_NEAR(unit(1, 2, k) * 3.0, raw(1, 2, k), 1e-10);
  }
  EXPECT_TRUE(n.decoder == m.decoder);
}

TEST(Analysis, EncodingIsDense) {
  const AutoencoderModel m = init_autoencoder(4, 16, 8, 3, 4);
  const ImageTensor x = preprocess(synth_graphic(SynthSpec::from_seed(9, 32, 32)));
  const ActivationTensor a = ae_encode(x, m);
  const auto zeros = std::count(a.values().begin(), a.values().end(), 0.0);
  EXPECT_LT(static_cast<double>(zeros) / static_cast<double>(a.size()), 0.01);
}

TEST(Model, ShapeMismatchRejected) {
  AutoencoderModel m = init_autoencoder(4, 5, 4, 3, 2);
  m.encoder_bias.pop_back();
  EXPECT_THROW(m.validate(), DimensionError);
}

TEST(Autoencoder, ZeroInputZeroBiasGivesZeros) {
  const AutoencoderModel m = init_autoencoder(1, 4, 4, 3, 2);
  const AeForward f = ae_forward(ImageTensor(8, 8, 3), m);
  for (double v : f.acts.values()) EXPECT_EQ(v, 0.0);
  for (double v : f.recon.values()) EXPECT_EQ(v, 0.0);
}

TEST(Autoencoder, DeltaFilterCopiesStrideSamples) {
  // Encoder = decoder = one delta at the patch origin: the reconstruction keeps
  // the pixels at stride-sampled positions and zeroes the rest.
  AutoencoderModel m = init_autoencoder(1, 1, 2, 1, 2);
  m.encoder = Dictionary({1, 2, 1, 2}, {1, 0, 0, 0});
  m.decoder = m.encoder;
  m.encoder_bias = {0.0};
  const ImageTensor x = oracle::random_image(3, 6, 6, 1);
  const AeForward f = ae_forward(x, m);
  ActivationTensor sampled(3, 3, 1);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) sampled(r, c, 0) = x(2 * r, 2 * c, 0);
  }
  EXPECT_TRUE(f.acts == sampled);
  EXPECT_TRUE(f.recon == conv_transpose(sampled, m.decoder, 6, 6));
}

TEST(Autoencoder, ZeroResidualGivesZeroGradients) {
  const Instance in = tiny(4);
  const AeForward f = ae_forward(in.noisy, in.model);
  const AeGradients g = ae_backward(f.recon, in.noisy, in.model);
  for (double v : g.encoder.values()) EXPECT_EQ(v, 0.0);
  for (double v : g.decoder.values()) EXPECT_EQ(v, 0.0);
  for (double v : g.bias) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.loss, 0.0);
}

TEST(Autoencoder, BiasGradientIsSummedBackProjection) {
  const Instance in = tiny(6);
  const AeForward f = ae_forward(in.noisy, in.model);
  const ActivationTensor back = correlate(subtract(in.clean, f.recon), in.model.decoder);
  const AeGradients g = ae_backward(in.clean, in.noisy, in.model);
  for (std::size_t k = 0; k < back.depth(); ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < back.rows(); ++r) {
      for (std::size_t c = 0; c < back.cols(); ++c) s += back(r, c, k);
    }
    EXPECT_NEAR(g.bias[k], -s, 1e-12);
  }
}

TEST(Noise, StdWithinFivePercentOnLargeImage) {
  const ImageTensor x = oracle::random_image(2, 128, 128, 3);
  const ImageTensor n = add_gaussian_noise(x, 0.5, 3);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = n.values()[i] - x.values()[i];
    s += d;
    s2 += d * d;
  }
  const double count = static_cast<double>(x.size());
  const double sd = std::sqrt(s2 / count - (s / count) * (s / count));
  EXPECT_NEAR(sd, 0.5, 0.025);
}

TEST(AeTraining, ZeroLearningRateLeavesModelUnchanged) {
  std::vector<ImageTensor> corpus{preprocess(synth_graphic(SynthSpec::from_seed(3, 16, 16)))};
  AeTrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  const AutoencoderModel init = init_autoencoder(2, 4, 8, 3, 4);
  EXPECT_TRUE(train_autoencoder(corpus, init, cfg).model == init);
}

TEST(AeTraining, FixedNoiseLossNonIncreasingForTenEpochs) {
  std::vector<ImageTensor> corpus;
  for (std::uint64_t i = 0; i < 8; ++i) {
    corpus.push_back(preprocess(synth_graphic(SynthSpec::from_seed(20 + i, 32, 32))));
  }
  AeTrainConfig cfg;
  cfg.epochs = 10;
  cfg.resample_noise = false;
  const AeTrainResult r = train_autoencoder(corpus, init_autoencoder(7, 16, 8, 3, 4), cfg);
  ASSERT_EQ(r.stats.size(), 10u);
  for (std::size_t e = 1; e < r.stats.size(); ++e) {
    EXPECT_LE(r.stats[e].mse, r.stats[e - 1].mse) << "epoch " << e + 1;
  }
}
