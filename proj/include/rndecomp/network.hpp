#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rndecomp/tape.hpp"

namespace rndecomp {

/// One entry of a network architecture. Convolutions are stride 1 with zero
/// "same" padding; skip_save/skip_add bracket an identity shortcut.
struct Layer {
  enum class Kind { conv, relu, skip_save, skip_add };
  Kind kind = Kind::conv;
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t kernel = 3;

  static Layer conv(std::size_t in, std::size_t out, std::size_t k = 3) {
    return {Kind::conv, in, out, k};
  }
  static Layer relu() { return {Kind::relu, 0, 0, 0}; }
  static Layer skip_save() { return {Kind::skip_save, 0, 0, 0}; }
  static Layer skip_add() { return {Kind::skip_add, 0, 0, 0}; }

  std::size_t weight_count() const {
    return kind == Kind::conv ? out_ch * in_ch * kernel * kernel : 0;
  }
  std::size_t bias_count() const { return kind == Kind::conv ? out_ch : 0; }
};

/// A convolutional network whose weights live in one flat parameter vector.
class Network {
 public:
  /// Leaf nodes created for one forward pass on a tape.
  struct Bound {
    std::vector<NodeId> weights;
    std::vector<NodeId> biases;
  };

  Network(std::vector<Layer> arch, std::uint64_t seed) : arch_(std::move(arch)) {
    std::size_t total = 0;
    std::size_t channels = 0;
    int open_skips = 0;
    for (const Layer& l : arch_) {
      offsets_.push_back(total);
      total += l.weight_count() + l.bias_count();
      if (l.kind == Layer::Kind::conv) {
        if (l.kernel % 2 == 0 || l.in_ch == 0 || l.out_ch == 0) {
          throw Error("Network: conv layers need odd kernels and positive channels");
        }
        if (channels != 0 && channels != l.in_ch) {
          throw Error("Network: layer expects " + std::to_string(l.in_ch) +
                      " channels but previous layer gives " + std::to_string(channels));
        }
        channels = l.out_ch;
      } else if (l.kind == Layer::Kind::skip_save) {
        ++open_skips;
      } else if (l.kind == Layer::Kind::skip_add) {
        if (--open_skips < 0) throw Error("Network: skip_add without skip_save");
      }
    }
    if (open_skips != 0) throw Error("Network: unbalanced skip connection");
    if (total == 0) throw Error("Network: architecture has no convolution");

    std::vector<double> p(total);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < arch_.size(); ++i) {
      const Layer& l = arch_[i];
      if (l.kind != Layer::Kind::conv) continue;
      const double s = 1.0 / std::sqrt(static_cast<double>(l.in_ch * l.kernel * l.kernel));
      std::uniform_real_distribution<double> u(-s, s);
      const std::size_t n = l.weight_count() + l.bias_count();
      for (std::size_t j = 0; j < n; ++j) p[offsets_[i] + j] = u(rng);
    }
    params_ = Tensor(Shape{total}, std::move(p));
  }

  /// c -> width -> width -> width -> c, 3x3 kernels, ReLU after the first three.
  static Network range_cnn(std::size_t channels, std::uint64_t seed, std::size_t width = 64) {
    return Network({Layer::conv(channels, width), Layer::relu(), Layer::conv(width, width),
                    Layer::relu(), Layer::conv(width, width), Layer::relu(),
                    Layer::conv(width, channels)},
                   seed);
  }

  /// c -> 32 -> 32 -> 32 -> 32 -> c with a shortcut from the first hidden
  /// activation to the input of the last convolution.
  static Network skip_cnn(std::size_t channels, std::uint64_t seed, std::size_t width = 32) {
    return Network({Layer::conv(channels, width), Layer::relu(), Layer::skip_save(),
                    Layer::conv(width, width), Layer::relu(), Layer::conv(width, width),
                    Layer::relu(), Layer::conv(width, width), Layer::relu(),
                    Layer::skip_add(), Layer::conv(width, channels)},
                   seed);
  }

  const std::vector<Layer>& arch() const noexcept { return arch_; }
  const std::vector<std::size_t>& param_layout() const noexcept { return offsets_; }
  const Tensor& params() const noexcept { return params_; }
  Tensor& params() noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  std::size_t input_channels() const {
    for (const Layer& l : arch_) {
      if (l.kind == Layer::Kind::conv) return l.in_ch;
    }
    return 0;
  }

  void set_params(Tensor p) {
    if (p.shape() != params_.shape()) {
      throw Error("Network::set_params: expected " + shape_string(params_.shape()) + ", got " +
                  shape_string(p.shape()));
    }
    params_ = std::move(p);
  }

  Bound bind(Tape& tape) const {
    Bound b;
    for (std::size_t i = 0; i < arch_.size(); ++i) {
      const Layer& l = arch_[i];
      if (l.kind != Layer::Kind::conv) continue;
      const double* base = params_.values().data() + offsets_[i];
      std::vector<double> w(base, base + l.weight_count());
      std::vector<double> bias(base + l.weight_count(),
                               base + l.weight_count() + l.bias_count());
      b.weights.push_back(
          tape.leaf(Tensor(Shape{l.out_ch, l.in_ch, l.kernel, l.kernel}, std::move(w))));
      b.biases.push_back(tape.leaf(Tensor(Shape{l.out_ch}, std::move(bias))));
    }
    return b;
  }

  /// Records the forward pass of an N x C x H x W input.
  NodeId forward(Tape& tape, const Bound& bound, NodeId input) const {
    const Shape& s = tape.value(input).shape();
    if (s.size() != 4 || s[1] != input_channels()) {
      throw Error("network_forward: expected N x " + std::to_string(input_channels()) +
                  " x H x W input, got " + shape_string(s));
    }
    NodeId h = input;
    std::vector<NodeId> skips;
    std::size_t conv_index = 0;
    for (const Layer& l : arch_) {
      switch (l.kind) {
        case Layer::Kind::conv:
          h = tape.conv2d(h, bound.weights[conv_index], bound.biases[conv_index]);
          ++conv_index;
          break;
        case Layer::Kind::relu:
          h = tape.relu(h);
          break;
        case Layer::Kind::skip_save:
          skips.push_back(h);
          break;
        case Layer::Kind::skip_add:
          h = tape.add(h, skips.back());
          skips.pop_back();
          break;
      }
    }
    return h;
  }

  Tensor forward(const Tensor& input) const {
    Tape tape;
    const Bound b = bind(tape);
    return tape.value(forward(tape, b, tape.leaf(input)));
  }

  /// Flattens per-layer gradients back into the parameter layout. Layers the
  /// loss does not depend on get zeros.
  Tensor gather_gradient(const GradientMap& grads, const Bound& bound) const {
    Tensor g(params_.shape());
    std::size_t conv_index = 0;
    for (std::size_t i = 0; i < arch_.size(); ++i) {
      const Layer& l = arch_[i];
      if (l.kind != Layer::Kind::conv) continue;
      double* base = g.values().data() + offsets_[i];
      if (grads.has(bound.weights[conv_index])) {
        const Tensor& gw = grads.at(bound.weights[conv_index]);
        std::copy(gw.values().begin(), gw.values().end(), base);
      }
      if (grads.has(bound.biases[conv_index])) {
        const Tensor& gb = grads.at(bound.biases[conv_index]);
        std::copy(gb.values().begin(), gb.values().end(), base + l.weight_count());
      }
      ++conv_index;
    }
    return g;
  }

 private:
  std::vector<Layer> arch_;
  std::vector<std::size_t> offsets_;
  Tensor params_;
};

}  // namespace rndecomp
