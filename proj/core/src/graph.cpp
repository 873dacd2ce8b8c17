#include "srfl/graph.hpp"

#include <algorithm>
#include <cmath>

#include "srfl/errors.hpp"
#include "srfl/random.hpp"

namespace srfl::nn {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput: return "Input";
    case LayerKind::kDense: return "Dense";
    case LayerKind::kConv2d: return "Conv2d";
    case LayerKind::kMaxPool2d: return "MaxPool2d";
    case LayerKind::kAdaptiveAvgPool: return "AdaptiveAvgPool";
    case LayerKind::kConcat: return "Concat";
    case LayerKind::kSlice: return "Slice";
    case LayerKind::kDropout: return "Dropout";
    case LayerKind::kRelu: return "ReLU";
    case LayerKind::kTanh: return "Tanh";
  }
  return "?";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out, InitScheme init) {
  LayerSpec s;
  s.kind = LayerKind::kDense;
  s.in_features = in;
  s.out_features = out;
  s.init = init;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                            std::size_t stride, std::size_t padding) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::max_pool2d(std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::kMaxPool2d;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::adaptive_avg_pool() {
  LayerSpec s;
  s.kind = LayerKind::kAdaptiveAvgPool;
  return s;
}

LayerSpec LayerSpec::concat() {
  LayerSpec s;
  s.kind = LayerKind::kConcat;
  return s;
}

LayerSpec LayerSpec::slice(std::size_t begin, std::size_t end) {
  LayerSpec s;
  s.kind = LayerKind::kSlice;
  s.begin = begin;
  s.end = end;
  return s;
}

LayerSpec LayerSpec::dropout(double p) {
  LayerSpec s;
  s.kind = LayerKind::kDropout;
  s.dropout_p = p;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = LayerKind::kRelu;
  return s;
}

LayerSpec LayerSpec::tanh() {
  LayerSpec s;
  s.kind = LayerKind::kTanh;
  return s;
}

std::string ModelGraph::describe(NodeId id) const {
  const auto& spec = nodes_[id].spec;
  std::string s = "layer " + std::to_string(id) + " (" + std::string(to_string(spec.kind));
  if (!spec.name.empty()) s += " '" + spec.name + "'";
  return s + ")";
}

ModelGraph::NodeId ModelGraph::add_input(Shape sample_shape, std::string name) {
  if (sample_shape.empty() || shape_size(sample_shape) == 0) {
    throw ShapeError("input shape must be non-empty");
  }
  Node n;
  n.spec.kind = LayerKind::kInput;
  n.spec.name = std::move(name);
  n.out_shape = std::move(sample_shape);
  nodes_.push_back(std::move(n));
  input_nodes_.push_back(nodes_.size() - 1);
  has_cache_ = false;
  return nodes_.size() - 1;
}

Shape ModelGraph::infer_shape(const LayerSpec& spec, const std::vector<NodeId>& inputs) const {
  const auto fail = [&](const std::string& why) -> ShapeError {
    std::string who = std::string(to_string(spec.kind));
    if (!spec.name.empty()) who += " '" + spec.name + "'";
    return ShapeError("layer " + std::to_string(nodes_.size()) + " (" + who + "): " + why);
  };
  for (auto id : inputs) {
    if (id >= nodes_.size()) throw fail("input node " + std::to_string(id) + " does not exist");
  }
  if (spec.kind == LayerKind::kConcat) {
    if (inputs.size() < 2) throw fail("concat needs at least two inputs");
    std::size_t total = 0;
    for (auto id : inputs) total += shape_size(nodes_[id].out_shape);
    return {total};
  }
  if (inputs.size() != 1) throw fail("expected exactly one input");
  const Shape& in = nodes_[inputs.front()].out_shape;
  switch (spec.kind) {
    case LayerKind::kDense:
      if (spec.in_features == 0 || spec.out_features == 0) throw fail("zero-width dense layer");
      if (shape_size(in) != spec.in_features) {
        throw fail("expected " + std::to_string(spec.in_features) + " input features, got " +
                   shape_string(in));
      }
      return {spec.out_features};
    case LayerKind::kConv2d: {
      if (in.size() != 3) throw fail("expected [C,H,W] input, got " + shape_string(in));
      if (in[0] != spec.in_channels) {
        throw fail("expected " + std::to_string(spec.in_channels) + " input channels, got " +
                   std::to_string(in[0]));
      }
      if (spec.kernel == 0 || spec.stride == 0 || spec.out_channels == 0) {
        throw fail("invalid convolution geometry");
      }
      if (in[1] + 2 * spec.padding < spec.kernel || in[2] + 2 * spec.padding < spec.kernel) {
        throw fail("kernel larger than padded input " + shape_string(in));
      }
      const std::size_t h = (in[1] + 2 * spec.padding - spec.kernel) / spec.stride + 1;
      const std::size_t w = (in[2] + 2 * spec.padding - spec.kernel) / spec.stride + 1;
      return {spec.out_channels, h, w};
    }
    case LayerKind::kMaxPool2d: {
      if (in.size() != 3) throw fail("expected [C,H,W] input, got " + shape_string(in));
      if (spec.kernel == 0 || spec.stride == 0) throw fail("invalid pooling geometry");
      if (in[1] < spec.kernel || in[2] < spec.kernel) {
        throw fail("input " + shape_string(in) + " smaller than pooling window");
      }
      return {in[0], (in[1] - spec.kernel) / spec.stride + 1,
              (in[2] - spec.kernel) / spec.stride + 1};
    }
    case LayerKind::kAdaptiveAvgPool:
      if (in.size() != 3) throw fail("expected [C,H,W] input, got " + shape_string(in));
      return {in[0]};
    case LayerKind::kSlice: {
      const std::size_t f = shape_size(in);
      if (spec.begin >= spec.end || spec.end > f) {
        throw fail("slice [" + std::to_string(spec.begin) + ", " + std::to_string(spec.end) +
                   ") outside " + std::to_string(f) + " features");
      }
      return {spec.end - spec.begin};
    }
    case LayerKind::kDropout:
      if (!(spec.dropout_p >= 0.0 && spec.dropout_p < 1.0)) {
        throw fail("dropout probability must lie in [0, 1)");
      }
      return in;
    case LayerKind::kRelu:
    case LayerKind::kTanh:
      return in;
    case LayerKind::kInput:
    case LayerKind::kConcat:
      break;
  }
  throw fail("unsupported layer");
}

ModelGraph::NodeId ModelGraph::add(LayerSpec spec, std::vector<NodeId> inputs) {
  if (spec.kind == LayerKind::kInput) throw ShapeError("use add_input for input nodes");
  Node n;
  n.out_shape = infer_shape(spec, inputs);
  n.spec = std::move(spec);
  n.inputs = std::move(inputs);
  const NodeId id = nodes_.size();
  if (n.spec.kind == LayerKind::kDense || n.spec.kind == LayerKind::kConv2d) {
    ParamBlock block;
    block.node = id;
    block.name = n.spec.name.empty() ? std::string(to_string(n.spec.kind)) + std::to_string(id)
                                     : n.spec.name;
    block.offset = params_.size();
    if (n.spec.kind == LayerKind::kDense) {
      block.weight_shape = {n.spec.out_features, n.spec.in_features};
      block.bias_size = n.spec.out_features;
    } else {
      block.weight_shape = {n.spec.out_channels, n.spec.in_channels, n.spec.kernel,
                            n.spec.kernel};
      block.bias_size = n.spec.out_channels;
    }
    params_.resize(params_.size() + block.size(), 0.0);
    n.param_block = static_cast<std::ptrdiff_t>(blocks_.size());
    blocks_.push_back(std::move(block));
  }
  nodes_.push_back(std::move(n));
  output_ = id;
  has_cache_ = false;
  return id;
}

void ModelGraph::set_output(NodeId node) {
  if (node >= nodes_.size()) throw ShapeError("output node does not exist");
  output_ = node;
}

const Shape& ModelGraph::input_shape(std::size_t i) const {
  return nodes_.at(input_nodes_.at(i)).out_shape;
}

const Tensor& ModelGraph::activation(NodeId node) const {
  if (!has_cache_) throw Error("no forward pass has been run");
  return activations_.at(node);
}

const Shape& ModelGraph::output_shape() const { return nodes_.at(output_).out_shape; }

void ModelGraph::initialize(std::uint64_t seed) {
  for (const auto& block : blocks_) {
    const auto& spec = nodes_[block.node].spec;
    const std::size_t fan_in = shape_size(block.weight_shape) / block.weight_shape[0];
    const std::size_t fan_out =
        spec.kind == LayerKind::kDense ? spec.out_features
                                       : spec.out_channels * spec.kernel * spec.kernel;
    const double bound = spec.init == InitScheme::kXavierUniform
                             ? std::sqrt(6.0 / static_cast<double>(fan_in + fan_out))
                             : std::sqrt(6.0 / static_cast<double>(fan_in));
    Rng rng(mix_seed(seed, 0x1417ULL, block.node));
    const std::size_t n_weights = shape_size(block.weight_shape);
    for (std::size_t i = 0; i < n_weights; ++i) {
      params_[block.offset + i] = rng.uniform(-bound, bound);
    }
    for (std::size_t i = 0; i < block.bias_size; ++i) params_[block.offset + n_weights + i] = 0.0;
  }
}

void ModelGraph::unflatten(std::span<const double> flat) {
  if (flat.size() != params_.size()) {
    throw ShapeError("parameter vector length " + std::to_string(flat.size()) +
                     " does not match model length " + std::to_string(params_.size()));
  }
  std::copy(flat.begin(), flat.end(), params_.begin());
}

namespace {

struct ConvGeometry {
  std::size_t c_in, h_in, w_in, c_out, h_out, w_out, k, stride, pad;
};

ConvGeometry conv_geometry(const LayerSpec& spec, const Shape& in, const Shape& out) {
  return {in[0], in[1], in[2], out[0], out[1], out[2], spec.kernel, spec.stride, spec.padding};
}

// Valid output range [lo, hi) along one axis for kernel offset `k_off`.
std::pair<std::size_t, std::size_t> valid_range(std::size_t k_off, std::size_t pad,
                                                std::size_t stride, std::size_t in_size,
                                                std::size_t out_size) {
  // input index = o * stride + k_off - pad must lie in [0, in_size)
  std::size_t lo = 0;
  if (k_off < pad) lo = (pad - k_off + stride - 1) / stride;
  std::size_t hi = out_size;
  // o * stride + k_off - pad <= in_size - 1
  if (in_size + pad < k_off + 1) {
    hi = 0;
  } else {
    hi = std::min(out_size, (in_size + pad - k_off - 1) / stride + 1);
  }
  return {lo, std::max(lo, hi)};
}

void conv_forward(const ConvGeometry& g, std::size_t batch, const double* x, const double* w,
                  const double* bias, double* y) {
  const std::size_t in_plane = g.h_in * g.w_in;
  const std::size_t out_plane = g.h_out * g.w_out;
  for (std::size_t n = 0; n < batch; ++n) {
    const double* xn = x + n * g.c_in * in_plane;
    double* yn = y + n * g.c_out * out_plane;
    for (std::size_t o = 0; o < g.c_out; ++o) {
      double* yo = yn + o * out_plane;
      std::fill(yo, yo + out_plane, bias[o]);
      for (std::size_t c = 0; c < g.c_in; ++c) {
        const double* xc = xn + c * in_plane;
        const double* wk = w + (o * g.c_in + c) * g.k * g.k;
        for (std::size_t ki = 0; ki < g.k; ++ki) {
          const auto [oy_lo, oy_hi] = valid_range(ki, g.pad, g.stride, g.h_in, g.h_out);
          for (std::size_t kj = 0; kj < g.k; ++kj) {
            const double wv = wk[ki * g.k + kj];
            const auto [ox_lo, ox_hi] = valid_range(kj, g.pad, g.stride, g.w_in, g.w_out);
            for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
              const std::size_t iy = oy * g.stride + ki - g.pad;
              const double* xrow = xc + iy * g.w_in;
              double* yrow = yo + oy * g.w_out;
              for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                yrow[ox] += wv * xrow[ox * g.stride + kj - g.pad];
              }
            }
          }
        }
      }
    }
  }
}

void conv_backward(const ConvGeometry& g, std::size_t batch, const double* x, const double* w,
                   const double* gy, double* gw, double* gb, double* gx) {
  const std::size_t in_plane = g.h_in * g.w_in;
  const std::size_t out_plane = g.h_out * g.w_out;
  for (std::size_t n = 0; n < batch; ++n) {
    const double* xn = x + n * g.c_in * in_plane;
    double* gxn = gx + n * g.c_in * in_plane;
    const double* gyn = gy + n * g.c_out * out_plane;
    for (std::size_t o = 0; o < g.c_out; ++o) {
      const double* go = gyn + o * out_plane;
      double bsum = 0.0;
      for (std::size_t i = 0; i < out_plane; ++i) bsum += go[i];
      gb[o] += bsum;
      for (std::size_t c = 0; c < g.c_in; ++c) {
        const double* xc = xn + c * in_plane;
        double* gxc = gxn + c * in_plane;
        const double* wk = w + (o * g.c_in + c) * g.k * g.k;
        double* gwk = gw + (o * g.c_in + c) * g.k * g.k;
        for (std::size_t ki = 0; ki < g.k; ++ki) {
          const auto [oy_lo, oy_hi] = valid_range(ki, g.pad, g.stride, g.h_in, g.h_out);
          for (std::size_t kj = 0; kj < g.k; ++kj) {
            const double wv = wk[ki * g.k + kj];
            const auto [ox_lo, ox_hi] = valid_range(kj, g.pad, g.stride, g.w_in, g.w_out);
            double acc = 0.0;
            for (std::size_t oy = oy_lo; oy < oy_hi; ++oy) {
              const std::size_t iy = oy * g.stride + ki - g.pad;
              const double* xrow = xc + iy * g.w_in;
              double* gxrow = gxc + iy * g.w_in;
              const double* grow = go + oy * g.w_out;
              for (std::size_t ox = ox_lo; ox < ox_hi; ++ox) {
                const std::size_t ix = ox * g.stride + kj - g.pad;
                acc += grow[ox] * xrow[ix];
                gxrow[ix] += grow[ox] * wv;
              }
            }
            gwk[ki * g.k + kj] += acc;
          }
        }
      }
    }
  }
}

}  // namespace

Tensor ModelGraph::forward(std::span<const Tensor> inputs) {
  if (nodes_.empty()) throw ShapeError("empty graph");
  if (inputs.size() != input_nodes_.size()) {
    throw ShapeError("graph expects " + std::to_string(input_nodes_.size()) +
                     " inputs, got " + std::to_string(inputs.size()));
  }
  const std::size_t batch = inputs.front().rank() > 0 ? inputs.front().dim(0) : 0;
  if (batch == 0) throw ShapeError("empty batch");

  activations_.assign(nodes_.size(), Tensor());
  dropout_masks_.assign(nodes_.size(), {});
  argmax_.assign(nodes_.size(), {});
  batch_ = batch;

  for (std::size_t i = 0; i < input_nodes_.size(); ++i) {
    const auto& t = inputs[i];
    const NodeId id = input_nodes_[i];
    Shape expected = nodes_[id].out_shape;
    expected.insert(expected.begin(), batch);
    if (t.rank() == 0 || t.dim(0) != batch || shape_size(t.shape()) != shape_size(expected)) {
      throw ShapeError(describe(id) + ": expected input " + shape_string(expected) + ", got " +
                       shape_string(t.shape()));
    }
    activations_[id] = Tensor(expected, t.values());
  }

  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const Node& node = nodes_[id];
    if (node.spec.kind == LayerKind::kInput) continue;
    Shape out_shape = node.out_shape;
    out_shape.insert(out_shape.begin(), batch);
    Tensor out(out_shape);
    const Tensor& x = activations_[node.inputs.front()];
    const auto& spec = node.spec;
    double* y = out.values().data();

    switch (spec.kind) {
      case LayerKind::kDense: {
        const auto& b = blocks_[static_cast<std::size_t>(node.param_block)];
        const double* w = params_.data() + b.offset;
        const double* bias = w + spec.in_features * spec.out_features;
        const double* xd = x.values().data();
        for (std::size_t n = 0; n < batch; ++n) {
          const double* xr = xd + n * spec.in_features;
          for (std::size_t o = 0; o < spec.out_features; ++o) {
            const double* wr = w + o * spec.in_features;
            double acc = bias[o];
            for (std::size_t i = 0; i < spec.in_features; ++i) acc += wr[i] * xr[i];
            y[n * spec.out_features + o] = acc;
          }
        }
        break;
      }
      case LayerKind::kConv2d: {
        const auto& b = blocks_[static_cast<std::size_t>(node.param_block)];
        const auto geo = conv_geometry(spec, nodes_[node.inputs.front()].out_shape, node.out_shape);
        const double* w = params_.data() + b.offset;
        conv_forward(geo, batch, x.values().data(), w, w + shape_size(b.weight_shape), y);
        break;
      }
      case LayerKind::kMaxPool2d: {
        const Shape& in = nodes_[node.inputs.front()].out_shape;
        const Shape& os = node.out_shape;
        auto& arg = argmax_[id];
        arg.resize(out.size());
        const double* xd = x.values().data();
        std::size_t idx = 0;
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < in[0]; ++c) {
            const std::size_t base = (n * in[0] + c) * in[1] * in[2];
            for (std::size_t oy = 0; oy < os[1]; ++oy) {
              for (std::size_t ox = 0; ox < os[2]; ++ox, ++idx) {
                std::size_t best = base + (oy * spec.stride) * in[2] + ox * spec.stride;
                for (std::size_t ki = 0; ki < spec.kernel; ++ki) {
                  for (std::size_t kj = 0; kj < spec.kernel; ++kj) {
                    const std::size_t at =
                        base + (oy * spec.stride + ki) * in[2] + ox * spec.stride + kj;
                    if (xd[at] > xd[best]) best = at;
                  }
                }
                arg[idx] = best;
                y[idx] = xd[best];
              }
            }
          }
        }
        break;
      }
      case LayerKind::kAdaptiveAvgPool: {
        const Shape& in = nodes_[node.inputs.front()].out_shape;
        const std::size_t plane = in[1] * in[2];
        const double* xd = x.values().data();
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < in[0]; ++c) {
            const double* p = xd + (n * in[0] + c) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += p[i];
            y[n * in[0] + c] = acc / static_cast<double>(plane);
          }
        }
        break;
      }
      case LayerKind::kConcat: {
        const std::size_t width = node.out_shape[0];
        std::size_t col = 0;
        for (auto in_id : node.inputs) {
          const std::size_t f = shape_size(nodes_[in_id].out_shape);
          const double* xd = activations_[in_id].values().data();
          for (std::size_t n = 0; n < batch; ++n) {
            std::copy(xd + n * f, xd + (n + 1) * f, y + n * width + col);
          }
          col += f;
        }
        break;
      }
      case LayerKind::kSlice: {
        const std::size_t f = shape_size(nodes_[node.inputs.front()].out_shape);
        const std::size_t width = spec.end - spec.begin;
        const double* xd = x.values().data();
        for (std::size_t n = 0; n < batch; ++n) {
          std::copy(xd + n * f + spec.begin, xd + n * f + spec.end, y + n * width);
        }
        break;
      }
      case LayerKind::kDropout: {
        if (mode_ == Mode::kEval || spec.dropout_p == 0.0) {
          std::copy(x.values().begin(), x.values().end(), out.values().begin());
          break;
        }
        Rng rng(mix_seed(dropout_seed_, 0xd50ULL, id));
        const double keep_scale = 1.0 / (1.0 - spec.dropout_p);
        auto& mask = dropout_masks_[id];
        mask.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          mask[i] = rng.bernoulli(spec.dropout_p) ? 0.0 : keep_scale;
          y[i] = x[i] * mask[i];
        }
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
        break;
      case LayerKind::kTanh:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
        break;
      case LayerKind::kInput:
        break;
    }
    activations_[id] = std::move(out);
  }
  has_cache_ = true;
  const Tensor& result = activations_[output_];
  result.check_finite("graph output");
  return result;
}

Gradients ModelGraph::backward(const Tensor& output_grad) const {
  if (!has_cache_) throw Error("backward called without a preceding forward pass");
  const std::size_t batch = batch_;
  if (output_grad.size() != activations_[output_].size()) {
    throw ShapeError("output gradient " + shape_string(output_grad.shape()) +
                     " does not match output " + shape_string(activations_[output_].shape()));
  }

  Gradients grads;
  grads.params.assign(params_.size(), 0.0);
  std::vector<Tensor> node_grads(nodes_.size());
  node_grads[output_] = Tensor(activations_[output_].shape(), output_grad.values());

  const auto grad_of = [&](NodeId id) -> Tensor& {
    if (node_grads[id].empty()) node_grads[id] = Tensor(activations_[id].shape(), 0.0);
    return node_grads[id];
  };

  for (NodeId id = output_ + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (node.spec.kind == LayerKind::kInput || node_grads[id].empty()) continue;
    const Tensor& gy = node_grads[id];
    const double* g = gy.values().data();
    const auto& spec = node.spec;

    switch (spec.kind) {
      case LayerKind::kDense: {
        const auto& b = blocks_[static_cast<std::size_t>(node.param_block)];
        const double* w = params_.data() + b.offset;
        double* gw = grads.params.data() + b.offset;
        double* gb = gw + spec.in_features * spec.out_features;
        const double* x = activations_[node.inputs.front()].values().data();
        double* gx = grad_of(node.inputs.front()).values().data();
        for (std::size_t n = 0; n < batch; ++n) {
          const double* xr = x + n * spec.in_features;
          double* gxr = gx + n * spec.in_features;
          for (std::size_t o = 0; o < spec.out_features; ++o) {
            const double go = g[n * spec.out_features + o];
            if (go == 0.0) continue;
            gb[o] += go;
            const double* wr = w + o * spec.in_features;
            double* gwr = gw + o * spec.in_features;
            for (std::size_t i = 0; i < spec.in_features; ++i) {
              gwr[i] += go * xr[i];
              gxr[i] += go * wr[i];
            }
          }
        }
        break;
      }
      case LayerKind::kConv2d: {
        const auto& b = blocks_[static_cast<std::size_t>(node.param_block)];
        const auto geo = conv_geometry(spec, nodes_[node.inputs.front()].out_shape, node.out_shape);
        const double* w = params_.data() + b.offset;
        double* gw = grads.params.data() + b.offset;
        conv_backward(geo, batch, activations_[node.inputs.front()].values().data(), w, g, gw,
                      gw + shape_size(b.weight_shape),
                      grad_of(node.inputs.front()).values().data());
        break;
      }
      case LayerKind::kMaxPool2d: {
        double* gx = grad_of(node.inputs.front()).values().data();
        const auto& arg = argmax_[id];
        for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += g[i];
        break;
      }
      case LayerKind::kAdaptiveAvgPool: {
        const Shape& in = nodes_[node.inputs.front()].out_shape;
        const std::size_t plane = in[1] * in[2];
        const double inv = 1.0 / static_cast<double>(plane);
        double* gx = grad_of(node.inputs.front()).values().data();
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t c = 0; c < in[0]; ++c) {
            const double v = g[n * in[0] + c] * inv;
            double* p = gx + (n * in[0] + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] += v;
          }
        }
        break;
      }
      case LayerKind::kConcat: {
        const std::size_t width = node.out_shape[0];
        std::size_t col = 0;
        for (auto in_id : node.inputs) {
          const std::size_t f = shape_size(nodes_[in_id].out_shape);
          double* gx = grad_of(in_id).values().data();
          for (std::size_t n = 0; n < batch; ++n) {
            for (std::size_t i = 0; i < f; ++i) gx[n * f + i] += g[n * width + col + i];
          }
          col += f;
        }
        break;
      }
      case LayerKind::kSlice: {
        const std::size_t f = shape_size(nodes_[node.inputs.front()].out_shape);
        const std::size_t width = spec.end - spec.begin;
        double* gx = grad_of(node.inputs.front()).values().data();
        for (std::size_t n = 0; n < batch; ++n) {
          for (std::size_t i = 0; i < width; ++i) gx[n * f + spec.begin + i] += g[n * width + i];
        }
        break;
      }
      case LayerKind::kDropout: {
        double* gx = grad_of(node.inputs.front()).values().data();
        const auto& mask = dropout_masks_[id];
        if (mask.empty()) {
          for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += g[i];
        } else {
          for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += g[i] * mask[i];
        }
        break;
      }
      case LayerKind::kRelu: {
        const double* x = activations_[node.inputs.front()].values().data();
        double* gx = grad_of(node.inputs.front()).values().data();
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += x[i] > 0.0 ? g[i] : 0.0;
        break;
      }
      case LayerKind::kTanh: {
        const double* y = activations_[id].values().data();
        double* gx = grad_of(node.inputs.front()).values().data();
        for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
        break;
      }
      case LayerKind::kInput:
        break;
    }
  }

  for (auto in_id : input_nodes_) {
    grads.inputs.push_back(node_grads[in_id].empty() ? Tensor(activations_[in_id].shape(), 0.0)
                                                     : std::move(node_grads[in_id]));
  }
  return grads;
}

}  // namespace srfl::nn
