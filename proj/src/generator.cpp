#include "dipreg/generator.hpp"

#include "dipreg/nn.hpp"

#include <stdexcept>
#include <string>

namespace dipreg {

void GeneratorConfig::validate() const {
  if (levels < 1) {
    throw std::invalid_argument("generator: levels must be >= 1");
  }
  const auto expect_per_level = [this](const std::vector<int>& v,
                                       const char* name) {
    if (v.size() != static_cast<std::size_t>(levels)) {
      throw std::invalid_argument(std::string("generator: ") + name +
                                  " must list one entry per level (" +
                                  std::to_string(levels) + "), got " +
                                  std::to_string(v.size()));
    }
    for (int c : v) {
      if (c < 1) {
        throw std::invalid_argument(std::string("generator: ") + name +
                                    " entries must be positive");
      }
    }
  };
  expect_per_level(channels_down, "channels_down");
  expect_per_level(channels_up, "channels_up");
  expect_per_level(channels_skip, "channels_skip");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw std::invalid_argument("generator: kernel_size must be odd, got " +
                                std::to_string(kernel_size));
  }
  if (activation_slope < 0.0 || activation_slope >= 1.0) {
    throw std::invalid_argument(
        "generator: activation_slope must lie in [0,1)");
  }
  if (input_channels < 1) {
    throw std::invalid_argument("generator: input_channels must be >= 1");
  }
}

namespace {

Tensor sample_conv_weight(Rng& rng, Index cout, Index cin, Index k) {
  Tensor w = sample_normal(rng, {cout, cin, k, k}, 0.0, kParamInitStd,
                           /*requires_grad=*/true);
  return w;
}

Tensor sample_conv_bias(Rng& rng, Index cout) {
  return sample_normal(rng, {cout}, 0.0, kParamInitStd,
                       /*requires_grad=*/true);
}

}  // namespace

GeneratorNet GeneratorNet::init_params(const GeneratorConfig& config,
                                       Rng& rng) {
  config.validate();
  GeneratorNet net;
  net.config_ = config;
  const Index k = config.kernel_size;

  // Sampling order is part of the determinism contract: encoder levels,
  // skip branches, decoder levels deep-to-shallow, output head.
  Index in_ch = config.input_channels;
  for (int i = 0; i < config.levels; ++i) {
    Conv conv{sample_conv_weight(rng, config.channels_down[i], in_ch, k),
              sample_conv_bias(rng, config.channels_down[i])};
    net.encoder_.push_back(conv);
    in_ch = config.channels_down[i];
  }

  Index level_in = config.input_channels;
  for (int i = 0; i < config.levels; ++i) {
    Conv conv{sample_conv_weight(rng, config.channels_skip[i], level_in, 1),
              sample_conv_bias(rng, config.channels_skip[i])};
    net.skip_.push_back(conv);
    level_in = config.channels_down[i];
  }

  net.decoder_.resize(config.levels);
  Index carried = config.channels_down[config.levels - 1];
  for (int i = config.levels - 1; i >= 0; --i) {
    const Index cat = config.channels_skip[i] + carried;
    net.decoder_[i] = Conv{sample_conv_weight(rng, config.channels_up[i],
                                              cat, k),
                           sample_conv_bias(rng, config.channels_up[i])};
    carried = config.channels_up[i];
  }

  net.output_ = Conv{sample_conv_weight(rng, GeneratorConfig::output_channels,
                                        config.channels_up[0], 1),
                     sample_conv_bias(rng, GeneratorConfig::output_channels)};

  for (const Conv& c : net.encoder_) {
    net.params_.push_back(c.weight);
    net.params_.push_back(c.bias);
  }
  for (const Conv& c : net.skip_) {
    net.params_.push_back(c.weight);
    net.params_.push_back(c.bias);
  }
  for (int i = config.levels - 1; i >= 0; --i) {
    net.params_.push_back(net.decoder_[i].weight);
    net.params_.push_back(net.decoder_[i].bias);
  }
  net.params_.push_back(net.output_.weight);
  net.params_.push_back(net.output_.bias);
  return net;
}

Tensor GeneratorNet::forward(const Tensor& z) const {
  if (z.shape().size() != 3 || z.dim(0) != config_.input_channels) {
    throw std::invalid_argument(
        "generator forward: input must be {" +
        std::to_string(config_.input_channels) + ",H,W}, got " +
        shape_to_string(z.shape()));
  }
  const Index div = config_.divisibility();
  if (z.dim(1) % div != 0 || z.dim(2) % div != 0) {
    throw std::invalid_argument(
        "generator forward: spatial size " + std::to_string(z.dim(1)) + "x" +
        std::to_string(z.dim(2)) + " must be divisible by " +
        std::to_string(div) + " (levels=" + std::to_string(config_.levels) +
        ")");
  }
  // The bottleneck is normalized over its spatial extent, which needs at
  // least two samples.
  if ((z.dim(1) / div) * (z.dim(2) / div) < 2) {
    throw std::invalid_argument(
        "generator forward: " + std::to_string(z.dim(1)) + "x" +
        std::to_string(z.dim(2)) + " collapses to a single pixel after " +
        std::to_string(config_.levels) + " levels; use a larger image or "
        "fewer levels");
  }
  const int pad = config_.kernel_size / 2;
  const double slope = config_.activation_slope;

  // Encoder; level_inputs[i] feeds both encoder level i and skip branch i.
  std::vector<Tensor> level_inputs;
  level_inputs.reserve(config_.levels);
  Tensor x = z;
  for (int i = 0; i < config_.levels; ++i) {
    level_inputs.push_back(x);
    x = conv2d(x, encoder_[i].weight, encoder_[i].bias, /*stride=*/2, pad);
    x = instance_norm(x);
    x = leaky_relu(x, slope);
  }

  // Decoder with skip concatenation, deep to shallow.
  for (int i = config_.levels - 1; i >= 0; --i) {
    Tensor skip = conv2d(level_inputs[i], skip_[i].weight, skip_[i].bias,
                         /*stride=*/1, /*padding=*/0);
    x = upsample_bilinear2x(x);
    x = concat_channels(skip, x);
    x = conv2d(x, decoder_[i].weight, decoder_[i].bias, /*stride=*/1, pad);
    x = instance_norm(x);
    x = leaky_relu(x, slope);
  }

  return conv2d(x, output_.weight, output_.bias, /*stride=*/1, /*padding=*/0);
}

Tensor sample_input(Rng& rng, Index channels, Index height, Index width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("sample_input: dimensions must be positive");
  }
  return sample_normal(rng, {channels, height, width}, 0.0, kNoiseStd);
}

}  // namespace dipreg
