#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srfl/tensor.hpp"

namespace srfl::nn {

enum class LayerKind {
  kInput,
  kDense,
  kConv2d,
  kMaxPool2d,
  kAdaptiveAvgPool,
  kConcat,
  kSlice,
  kDropout,
  kRelu,
  kTanh,
};

std::string_view to_string(LayerKind kind);

enum class InitScheme { kKaimingUniform, kXavierUniform };

struct LayerSpec {
  LayerKind kind = LayerKind::kInput;
  std::string name;
  // Dense
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  // Conv2d / MaxPool2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  // Slice over the flattened feature axis, [begin, end)
  std::size_t begin = 0;
  std::size_t end = 0;
  // Dropout
  double dropout_p = 0.0;
  InitScheme init = InitScheme::kKaimingUniform;

  static LayerSpec dense(std::size_t in, std::size_t out,
                         InitScheme init = InitScheme::kKaimingUniform);
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                          std::size_t stride = 1, std::size_t padding = 0);
  static LayerSpec max_pool2d(std::size_t kernel, std::size_t stride);
  static LayerSpec adaptive_avg_pool();
  static LayerSpec concat();
  static LayerSpec slice(std::size_t begin, std::size_t end);
  static LayerSpec dropout(double p);
  static LayerSpec relu();
  static LayerSpec tanh();

  LayerSpec& named(std::string n) {
    name = std::move(n);
    return *this;
  }
};

enum class Mode { kTrain, kEval };

// Contiguous run of parameters owned by one layer: weights then bias.
struct ParamBlock {
  std::size_t node = 0;
  std::string name;
  std::size_t offset = 0;
  Shape weight_shape;
  std::size_t bias_size = 0;

  std::size_t size() const { return shape_size(weight_shape) + bias_size; }
};

struct Gradients {
  std::vector<double> params;  // aligned with ModelGraph::parameters()
  std::vector<Tensor> inputs;  // one per graph input
};

// Layer DAG evaluated in insertion order (inputs must be added before their
// consumers). Parameters live in one flat vector; each parametrised layer owns
// a block of it. Tensors flowing through the graph are batch-major.
class ModelGraph {
 public:
  using NodeId = std::size_t;

  struct Node {
    LayerSpec spec;
    std::vector<NodeId> inputs;
    Shape out_shape;  // per sample, batch dimension excluded
    std::ptrdiff_t param_block = -1;
  };

  NodeId add_input(Shape sample_shape, std::string name = {});
  NodeId add(LayerSpec spec, std::vector<NodeId> inputs);
  NodeId add(LayerSpec spec, NodeId input) { return add(std::move(spec), std::vector{input}); }
  void set_output(NodeId node);

  // Seeded weight init; biases start at zero.
  void initialize(std::uint64_t seed);

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }
  void set_dropout_seed(std::uint64_t seed) noexcept { dropout_seed_ = seed; }

  Tensor forward(std::span<const Tensor> inputs);
  Tensor forward(const Tensor& input) { return forward(std::span<const Tensor>(&input, 1)); }
  // Gradient of a scalar loss given d(loss)/d(output); requires a prior forward.
  Gradients backward(const Tensor& output_grad) const;

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::vector<double> flatten() const { return params_; }
  void unflatten(std::span<const double> flat);

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  const std::vector<ParamBlock>& param_blocks() const noexcept { return blocks_; }
  const std::vector<NodeId>& input_nodes() const noexcept { return input_nodes_; }
  NodeId output_node() const noexcept { return output_; }
  const Shape& input_shape(std::size_t i = 0) const;
  // Cached output of a node from the last forward pass.
  const Tensor& activation(NodeId node) const;
  const Shape& output_shape() const;

 private:
  std::string describe(NodeId id) const;
  Shape infer_shape(const LayerSpec& spec, const std::vector<NodeId>& inputs) const;

  std::vector<Node> nodes_;
  std::vector<NodeId> input_nodes_;
  NodeId output_ = 0;
  std::vector<double> params_;
  std::vector<ParamBlock> blocks_;
  Mode mode_ = Mode::kEval;
  std::uint64_t dropout_seed_ = 0;

  // Forward cache.
  std::vector<Tensor> activations_;
  std::vector<std::vector<double>> dropout_masks_;
  std::vector<std::vector<std::size_t>> argmax_;
  std::size_t batch_ = 0;
  bool has_cache_ = false;
};

}  // namespace srfl::nn
