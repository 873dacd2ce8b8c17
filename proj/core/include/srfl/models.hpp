#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "srfl/dataset.hpp"
#include "srfl/graph.hpp"
#include "srfl/optim.hpp"

namespace srfl::models {

enum class Arch { kFederationS, kFedIpc, kWirelessAi, kCentralizedBaseline };

std::string_view to_string(Arch arch);
Arch arch_from_string(std::string_view name);

enum class Activation { kRelu, kTanh };

struct ModelConfig {
  Arch arch = Arch::kFederationS;
  // FedIPC and the centralized baseline: hidden widths of the MLP.
  std::vector<std::size_t> hidden_sizes;
  // FederationS: per-branch hidden widths and joint hidden widths.
  std::vector<std::size_t> branch_hidden = {32, 32};
  std::vector<std::size_t> joint_hidden = {64, 64};
  double dropout_p = 0.0;
  Activation activation = Activation::kRelu;
  int max_aps = 6;   // a
  int max_stas = 4;  // b
  // WirelessAI
  double cnn_channel_scale = 1.0 / 16.0;
  std::size_t cnn_out_dim = 17;
  std::size_t fcnn_out_dim = 6;
  data::GridOptions grid;
  std::uint64_t init_seed = 1;

  static ModelConfig defaults(Arch arch);
  void validate() const;
};

nn::ModelGraph build_federations(const ModelConfig& cfg);
nn::ModelGraph build_fedipc(const ModelConfig& cfg);
// Returns (cnn, fcnn). The CNN takes the grid image and the scaled tau.
std::pair<nn::ModelGraph, nn::ModelGraph> build_wirelessai(const ModelConfig& cfg);
nn::ModelGraph build_centralized_baseline(const ModelConfig& cfg);

// Number of inputs of the per-STA vector models (FederationS and baseline).
std::size_t row_input_width(int max_aps);
// Input width of the FedIPC multi-output model.
std::size_t fedipc_input_width(int max_aps, int max_stas);

// Model-ready samples. Every output entry maps back to the dataset row it
// predicts (-1 for padding slots).
struct SampleSet {
  std::vector<nn::Tensor> inputs;  // one per graph input, batch-major
  nn::Tensor target;
  nn::Tensor mask;
  nn::Tensor aux_target;  // WirelessAI CNN supervision
  nn::Tensor aux_mask;
  std::vector<std::int64_t> row_index;  // size = samples * outputs

  std::size_t size() const { return target.rank() ? target.dim(0) : 0; }
  std::size_t outputs() const { return target.rank() > 1 ? target.dim(1) : 0; }
  SampleSet subset(std::span<const std::size_t> indices) const;
  // Concatenates sample sets. Row indices stay local to their source context.
  static SampleSet concat(std::span<const SampleSet> parts);
};

// Common surface of the four architectures: flat parameters, gradients on a
// batch, and predictions in normalized label units.
class Model {
 public:
  virtual ~Model() = default;

  virtual const ModelConfig& config() const = 0;
  virtual std::size_t parameter_count() const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(std::span<const double> flat) = 0;
  virtual std::vector<nn::ParamBlock> param_layout() const = 0;

  // Builds samples from a normalized context.
  virtual SampleSet make_samples(const data::Context& normalized) const = 0;
  // Train-mode loss on a batch; writes the flat gradient into `grad`.
  virtual double loss_and_gradient(const SampleSet& batch, std::vector<double>& grad,
                                   std::uint64_t dropout_seed) = 0;
  // Eval-mode predictions, shape [n, outputs].
  virtual nn::Tensor predict(const SampleSet& batch) = 0;
  virtual std::unique_ptr<Model> clone() const = 0;
};

std::unique_ptr<Model> make_model(const ModelConfig& cfg);

// Mini-batch training over `epochs` passes; batch order is shuffled with
// `shuffle_seed`. Returns the mean batch loss of the last epoch.
double train_minibatch(Model& model, const SampleSet& samples, nn::OptimizerState& state,
                       std::size_t epochs, std::size_t batch_size, std::uint64_t shuffle_seed);

// Per-row predictions in normalized units, aligned with ctx.data.rows (0 for
// padding rows).
std::vector<double> predict_rows(Model& model, const data::Context& normalized);

// MAE in Mbps over unmasked outputs of `samples`.
double mae_mbps(Model& model, const SampleSet& samples, const data::NormMeta& meta);

// argmax over tau of the summed predicted throughput of existing STAs in the
// given variation; ties resolve to the smaller tau.
int best_threshold(std::span<const data::FeatureRow> rows, std::span<const double> predicted,
                   int variation_id = 0);
int predict_best_threshold(Model& model, const data::Context& normalized,
                           const data::NormMeta& meta, int variation_id = 0);

struct EpochRecord {
  int epoch = 0;
  double train_mae_mbps = 0.0;
  double val_mae_mbps = 0.0;
};

// Pooled (non-federated) training used by the centralized baseline.
std::vector<EpochRecord> train_centralized(Model& model, const SampleSet& train,
                                           const SampleSet& val, const data::NormMeta& meta,
                                           const nn::OptimizerConfig& opt, std::size_t epochs,
                                           std::size_t batch_size, std::uint64_t seed);

}  // namespace srfl::models
