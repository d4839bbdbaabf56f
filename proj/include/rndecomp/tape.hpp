#pragma once

// Reverse-mode automatic differentiation over an append-only tape.
//
// Each node stores the primitive that produced it, the ids of its inputs and
// its value. Inputs always precede a node, so a single reverse sweep from the
// loss computes every gradient.

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rndecomp/tensor.hpp"

namespace rndecomp {

using NodeId = std::size_t;

enum class Primitive {
  leaf,
  add,
  sub,
  scale,
  mul,
  matmul,
  conv2d,
  relu,
  reshape,
  sum,
  mean,
  linear_map,
};

inline const char* primitive_name(Primitive p) {
  switch (p) {
    case Primitive::leaf: return "leaf";
    case Primitive::add: return "add";
    case Primitive::sub: return "sub";
    case Primitive::scale: return "scale";
    case Primitive::mul: return "mul";
    case Primitive::matmul: return "matmul";
    case Primitive::conv2d: return "conv2d";
    case Primitive::relu: return "relu";
    case Primitive::reshape: return "reshape";
    case Primitive::sum: return "sum";
    case Primitive::mean: return "mean";
    case Primitive::linear_map: return "linear_map";
  }
  return "unknown";
}

/// A fixed linear map together with its adjoint. Applied per sample when the
/// input carries a leading batch dimension.
class LinearMap {
 public:
  virtual ~LinearMap() = default;
  virtual std::size_t input_size() const = 0;
  virtual Shape output_shape() const = 0;
  virtual void forward(std::span<const double> in, std::span<double> out) const = 0;
  virtual void adjoint(std::span<const double> in, std::span<double> out) const = 0;
  virtual std::string name() const { return "linear_map"; }

  std::size_t output_size() const { return shape_size(output_shape()); }
};

struct PrimitiveAttrs {
  double scalar = 1.0;                     // scale
  Shape shape;                             // reshape
  std::shared_ptr<const LinearMap> map;    // linear_map
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

[[noreturn]] inline void shape_error(Primitive p, const Shape& a, const Shape& b) {
  throw Error(std::string(primitive_name(p)) + ": incompatible shapes " +
              shape_string(a) + " and " + shape_string(b));
}

inline void require_arity(Primitive p, std::size_t got, std::size_t lo, std::size_t hi) {
  if (got < lo || got > hi) {
    throw Error(std::string(primitive_name(p)) + ": expected " + std::to_string(lo) +
                (lo == hi ? "" : "-" + std::to_string(hi)) + " inputs, got " +
                std::to_string(got));
  }
}

struct ConvGeometry {
  std::size_t batch, in_ch, out_ch, height, width, kernel, pad;
};

inline ConvGeometry conv_geometry(const Shape& x, const Shape& w) {
  if (x.size() != 4 || w.size() != 4 || w[1] != x[1] || w[2] != w[3] || w[2] % 2 == 0) {
    shape_error(Primitive::conv2d, x, w);
  }
  return {x[0], x[1], w[0], x[2], x[3], w[2], w[2] / 2};
}

// Unfolds one sample (C x H x W) into a (C*k*k) x (H*W) matrix, zero padding.
inline void im2col(const double* img, const ConvGeometry& g, double* col) {
  const std::size_t hw = g.height * g.width;
  const long h = static_cast<long>(g.height), w = static_cast<long>(g.width);
  const long pad = static_cast<long>(g.pad);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    const double* plane = img + c * hw;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        double* out = col + row * hw;
        const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
        for (long y = 0; y < h; ++y) {
          const long sy = y + dy;
          double* orow = out + y * w;
          if (sy < 0 || sy >= h) {
            std::fill(orow, orow + w, 0.0);
            continue;
          }
          const double* irow = plane + sy * w;
          for (long x = 0; x < w; ++x) {
            const long sx = x + dx;
            orow[x] = (sx < 0 || sx >= w) ? 0.0 : irow[sx];
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters a column matrix back onto the image (adding).
inline void col2im(const double* col, const ConvGeometry& g, double* img) {
  const std::size_t hw = g.height * g.width;
  const long h = static_cast<long>(g.height), w = static_cast<long>(g.width);
  const long pad = static_cast<long>(g.pad);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    double* plane = img + c * hw;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx, ++row) {
        const double* in = col + row * hw;
        const long dy = static_cast<long>(ky) - pad, dx = static_cast<long>(kx) - pad;
        for (long y = 0; y < h; ++y) {
          const long sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const double* irow = in + y * w;
          double* prow = plane + sy * w;
          for (long x = 0; x < w; ++x) {
            const long sx = x + dx;
            if (sx >= 0 && sx < w) prow[sx] += irow[x];
          }
        }
      }
    }
  }
}

/// Splits an N x (sample) input into N samples of the map's input size.
inline std::pair<std::size_t, Shape> map_batch(const LinearMap& map, const Shape& in) {
  const std::size_t n = shape_size(in);
  if (in.size() >= 2 && n == in[0] * map.input_size()) {
    Shape out{in[0]};
    for (std::size_t d : map.output_shape()) out.push_back(d);
    return {in[0], out};
  }
  throw Error("linear_map(" + map.name() + "): input " + shape_string(in) +
              " does not match operator input size " + std::to_string(map.input_size()));
}

}  // namespace detail

/// Evaluates one primitive on concrete inputs without recording anything.
inline Tensor evaluate_primitive(Primitive kind, std::span<const Tensor* const> in,
                                 const PrimitiveAttrs& attrs = {}) {
  using namespace detail;
  Tensor out;
  switch (kind) {
    case Primitive::leaf:
      throw Error("leaf: not an operation");
    case Primitive::add:
    case Primitive::sub:
    case Primitive::mul: {
      require_arity(kind, in.size(), 2, 2);
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.shape() != b.shape()) shape_error(kind, a.shape(), b.shape());
      out = a;
      if (kind == Primitive::add) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
      } else if (kind == Primitive::sub) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
      } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
      }
      break;
    }
    case Primitive::scale: {
      require_arity(kind, in.size(), 1, 1);
      out = *in[0];
      for (std::size_t i = 0; i < out.size(); ++i) out[i] *= attrs.scalar;
      break;
    }
    case Primitive::matmul: {
      require_arity(kind, in.size(), 2, 2);
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        shape_error(kind, a.shape(), b.shape());
      }
      out = Tensor(Shape{a.dim(0), b.dim(1)});
      MatMap(out.values().data(), a.dim(0), b.dim(1)).noalias() =
          ConstMatMap(a.values().data(), a.dim(0), a.dim(1)) *
          ConstMatMap(b.values().data(), b.dim(0), b.dim(1));
      break;
    }
    case Primitive::conv2d: {
      require_arity(kind, in.size(), 2, 3);
      const Tensor& x = *in[0];
      const Tensor& w = *in[1];
      const ConvGeometry g = conv_geometry(x.shape(), w.shape());
      if (in.size() == 3 && in[2]->shape() != Shape{g.out_ch}) {
        shape_error(kind, w.shape(), in[2]->shape());
      }
      const std::size_t hw = g.height * g.width;
      const std::size_t patch = g.in_ch * g.kernel * g.kernel;
      out = Tensor(Shape{g.batch, g.out_ch, g.height, g.width});
      std::vector<double> col(patch * hw);
      ConstMatMap wm(w.values().data(), g.out_ch, patch);
      for (std::size_t n = 0; n < g.batch; ++n) {
        im2col(x.values().data() + n * g.in_ch * hw, g, col.data());
        MatMap ym(out.values().data() + n * g.out_ch * hw, g.out_ch, hw);
        ym.noalias() = wm * ConstMatMap(col.data(), patch, hw);
        if (in.size() == 3) {
          for (std::size_t c = 0; c < g.out_ch; ++c) ym.row(c).array() += (*in[2])[c];
        }
      }
      break;
    }
    case Primitive::relu: {
      require_arity(kind, in.size(), 1, 1);
      out = *in[0];
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
      break;
    }
    case Primitive::reshape: {
      require_arity(kind, in.size(), 1, 1);
      if (shape_size(attrs.shape) != in[0]->size()) {
        shape_error(kind, in[0]->shape(), attrs.shape);
      }
      out = in[0]->reshaped(attrs.shape);
      break;
    }
    case Primitive::sum:
    case Primitive::mean: {
      require_arity(kind, in.size(), 1, 1);
      double s = 0.0;
      for (double v : in[0]->values()) s += v;
      if (kind == Primitive::mean) s /= static_cast<double>(in[0]->size());
      out = Tensor::scalar(s);
      break;
    }
    case Primitive::linear_map: {
      require_arity(kind, in.size(), 1, 1);
      if (!attrs.map) throw Error("linear_map: no operator attached");
      const LinearMap& map = *attrs.map;
      auto [batch, shape] = map_batch(map, in[0]->shape());
      out = Tensor(shape);
      const std::size_t ni = map.input_size(), no = map.output_size();
      for (std::size_t n = 0; n < batch; ++n) {
        map.forward(in[0]->values().subspan(n * ni, ni), out.values().subspan(n * no, no));
      }
      break;
    }
  }
  out.require_finite(primitive_name(kind));
  return out;
}

/// Gradients of a scalar node, aligned with tape nodes. Only ancestors of the
/// loss carry a gradient.
class GradientMap {
 public:
  explicit GradientMap(std::size_t n) : grads_(n) {}

  bool has(NodeId id) const { return id < grads_.size() && grads_[id].has_value(); }
  const Tensor& at(NodeId id) const {
    if (!has(id)) throw Error("GradientMap: node " + std::to_string(id) + " has no gradient");
    return *grads_[id];
  }

  void accumulate(NodeId id, const Tensor& g) {
    if (!grads_[id]) {
      grads_[id] = g;
      return;
    }
    Tensor& acc = *grads_[id];
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
  }

 private:
  std::vector<std::optional<Tensor>> grads_;
};

/// Append-only record of primitive applications; confined to one thread.
class Tape {
 public:
  struct Node {
    Primitive kind;
    std::vector<NodeId> inputs;
    Tensor value;
    PrimitiveAttrs attrs;
  };

  NodeId leaf(Tensor value) {
    value.require_finite("leaf");
    nodes_.push_back({Primitive::leaf, {}, std::move(value), {}});
    return nodes_.size() - 1;
  }

  NodeId apply(Primitive kind, std::span<const NodeId> inputs, PrimitiveAttrs attrs = {}) {
    std::vector<const Tensor*> values;
    values.reserve(inputs.size());
    for (NodeId id : inputs) values.push_back(&value(id));
    Tensor out = evaluate_primitive(kind, values, attrs);
    nodes_.push_back({kind, {inputs.begin(), inputs.end()}, std::move(out), std::move(attrs)});
    return nodes_.size() - 1;
  }

  NodeId add(NodeId a, NodeId b) { return apply2(Primitive::add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return apply2(Primitive::sub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return apply2(Primitive::mul, a, b); }
  NodeId matmul(NodeId a, NodeId b) { return apply2(Primitive::matmul, a, b); }
  NodeId scale(NodeId a, double s) {
    const NodeId in[] = {a};
    return apply(Primitive::scale, in, {.scalar = s});
  }
  NodeId relu(NodeId a) { return apply1(Primitive::relu, a); }
  NodeId sum(NodeId a) { return apply1(Primitive::sum, a); }
  NodeId mean(NodeId a) { return apply1(Primitive::mean, a); }
  NodeId reshape(NodeId a, Shape shape) {
    const NodeId in[] = {a};
    return apply(Primitive::reshape, in, {.shape = std::move(shape)});
  }
  NodeId conv2d(NodeId x, NodeId w) { return apply2(Primitive::conv2d, x, w); }
  NodeId conv2d(NodeId x, NodeId w, NodeId b) {
    const NodeId in[] = {x, w, b};
    return apply(Primitive::conv2d, in);
  }
  NodeId linear(std::shared_ptr<const LinearMap> map, NodeId x) {
    const NodeId in[] = {x};
    return apply(Primitive::linear_map, in, {.map = std::move(map)});
  }
  /// mean((a - b)^2)
  NodeId mse(NodeId a, NodeId b) {
    const NodeId d = sub(a, b);
    return mean(mul(d, d));
  }

  const Tensor& value(NodeId id) const {
    if (id >= nodes_.size()) throw Error("Tape: unknown node " + std::to_string(id));
    return nodes_[id].value;
  }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  std::size_t size() const noexcept { return nodes_.size(); }

  GradientMap backward(NodeId loss) const;

 private:
  NodeId apply1(Primitive k, NodeId a) {
    const NodeId in[] = {a};
    return apply(k, in);
  }
  NodeId apply2(Primitive k, NodeId a, NodeId b) {
    const NodeId in[] = {a, b};
    return apply(k, in);
  }

  std::vector<Node> nodes_;
};

inline GradientMap Tape::backward(NodeId loss) const {
  using namespace detail;
  if (value(loss).size() != 1) {
    throw Error("backward: loss node must be scalar, got shape " +
                shape_string(value(loss).shape()));
  }
  GradientMap grads(nodes_.size());
  grads.accumulate(loss, Tensor(value(loss).shape(), 1.0));

  for (NodeId id = loss + 1; id-- > 0;) {
    if (!grads.has(id)) continue;
    const Node& nd = nodes_[id];
    const Tensor& g = grads.at(id);
    switch (nd.kind) {
      case Primitive::leaf:
        break;
      case Primitive::add:
        grads.accumulate(nd.inputs[0], g);
        grads.accumulate(nd.inputs[1], g);
        break;
      case Primitive::sub: {
        grads.accumulate(nd.inputs[0], g);
        grads.accumulate(nd.inputs[1], -1.0 * g);
        break;
      }
      case Primitive::mul: {
        const Tensor& a = value(nd.inputs[0]);
        const Tensor& b = value(nd.inputs[1]);
        Tensor ga = g, gb = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
          ga[i] *= b[i];
          gb[i] *= a[i];
        }
        grads.accumulate(nd.inputs[0], ga);
        grads.accumulate(nd.inputs[1], gb);
        break;
      }
      case Primitive::scale:
        grads.accumulate(nd.inputs[0], nd.attrs.scalar * g);
        break;
      case Primitive::matmul: {
        const Tensor& a = value(nd.inputs[0]);
        const Tensor& b = value(nd.inputs[1]);
        const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
        Tensor ga(a.shape()), gb(b.shape());
        ConstMatMap gm(g.values().data(), m, n);
        MatMap(ga.values().data(), m, k).noalias() =
            gm * ConstMatMap(b.values().data(), k, n).transpose();
        MatMap(gb.values().data(), k, n).noalias() =
            ConstMatMap(a.values().data(), m, k).transpose() * gm;
        grads.accumulate(nd.inputs[0], ga);
        grads.accumulate(nd.inputs[1], gb);
        break;
      }
      case Primitive::conv2d: {
        const Tensor& x = value(nd.inputs[0]);
        const Tensor& w = value(nd.inputs[1]);
        const ConvGeometry geo = conv_geometry(x.shape(), w.shape());
        const std::size_t hw = geo.height * geo.width;
        const std::size_t patch = geo.in_ch * geo.kernel * geo.kernel;
        Tensor gx(x.shape()), gw(w.shape());
        std::vector<double> col(patch * hw), dcol(patch * hw);
        ConstMatMap wm(w.values().data(), geo.out_ch, patch);
        MatMap gwm(gw.values().data(), geo.out_ch, patch);
        for (std::size_t n = 0; n < geo.batch; ++n) {
          ConstMatMap gy(g.values().data() + n * geo.out_ch * hw, geo.out_ch, hw);
          im2col(x.values().data() + n * geo.in_ch * hw, geo, col.data());
          gwm.noalias() += gy * ConstMatMap(col.data(), patch, hw).transpose();
          MatMap(dcol.data(), patch, hw).noalias() = wm.transpose() * gy;
          col2im(dcol.data(), geo, gx.values().data() + n * geo.in_ch * hw);
        }
        grads.accumulate(nd.inputs[0], gx);
        grads.accumulate(nd.inputs[1], gw);
        if (nd.inputs.size() == 3) {
          Tensor gb(Shape{geo.out_ch});
          for (std::size_t n = 0; n < geo.batch; ++n) {
            for (std::size_t c = 0; c < geo.out_ch; ++c) {
              const double* row = g.values().data() + (n * geo.out_ch + c) * hw;
              double s = 0.0;
              for (std::size_t i = 0; i < hw; ++i) s += row[i];
              gb[c] += s;
            }
          }
          grads.accumulate(nd.inputs[2], gb);
        }
        break;
      }
      case Primitive::relu: {
        const Tensor& a = value(nd.inputs[0]);
        Tensor ga = g;
        for (std::size_t i = 0; i < ga.size(); ++i) {
          if (!(a[i] > 0.0)) ga[i] = 0.0;
        }
        grads.accumulate(nd.inputs[0], ga);
        break;
      }
      case Primitive::reshape:
        grads.accumulate(nd.inputs[0], g.reshaped(value(nd.inputs[0]).shape()));
        break;
      case Primitive::sum:
      case Primitive::mean: {
        const Tensor& a = value(nd.inputs[0]);
        double v = g.item();
        if (nd.kind == Primitive::mean) v /= static_cast<double>(a.size());
        grads.accumulate(nd.inputs[0], Tensor(a.shape(), v));
        break;
      }
      case Primitive::linear_map: {
        const LinearMap& map = *nd.attrs.map;
        const Tensor& a = value(nd.inputs[0]);
        const std::size_t batch = detail::map_batch(map, a.shape()).first;
        const std::size_t ni = map.input_size(), no = map.output_size();
        Tensor ga(a.shape());
        for (std::size_t n = 0; n < batch; ++n) {
          map.adjoint(g.values().subspan(n * no, no), ga.values().subspan(n * ni, ni));
        }
        grads.accumulate(nd.inputs[0], ga);
        break;
      }
    }
  }
  return grads;
}

}  // namespace rndecomp
