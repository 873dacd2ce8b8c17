#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srfl/errors.hpp"
#include "srfl/models.hpp"
#include "srfl/optim.hpp"

namespace srfl::fed {

enum class Aggregation { kFedAvgUniform, kFedAvgWeighted, kFederationsAlpha };
enum class Participation { kSampled, kFull };
// How FederationS normalizes a context's sample count.
enum class StaNormalization { kPerContext, kGlobalConstant };

std::string_view to_string(Aggregation a);
Aggregation aggregation_from_string(std::string_view name);
std::string_view to_string(Participation p);
Participation participation_from_string(std::string_view name);

struct FedConfig {
  std::size_t rounds = 250;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 21;
  nn::OptimizerConfig optimizer;
  std::size_t clients_per_round = 500;
  Participation participation = Participation::kSampled;
  Aggregation aggregation = Aggregation::kFedAvgUniform;
  StaNormalization sta_normalization = StaNormalization::kPerContext;
  int global_n_sta = 4;
  std::size_t eval_every = 1;
  std::size_t patience = 0;  // 0 disables early stopping
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool record_timing = false;  // wall time in history breaks byte-identical reruns

  void validate(std::size_t n_train_clients) const;
};

struct ClientState {
  int context_id = 0;
  models::SampleSet samples;
  std::size_t n_samples = 0;  // unmasked rows of the context
  int n_stas = 0;
  nn::OptimizerState optimizer;
};

struct ClientUpdate {
  int context_id = 0;
  std::vector<double> params;
  double alpha = 1.0;
  std::size_t n_samples = 0;
  int n_stas = 0;
};

struct RoundRecord {
  int round = 0;
  double train_mae_mbps = 0.0;
  double val_mae_mbps = 0.0;
  bool evaluated = false;  // val MAE computed this round
  std::size_t n_clients = 0;
  double seconds = 0.0;
};

struct GlobalModel {
  std::vector<double> params;
  int round = 0;
  std::vector<RoundRecord> history;
};

struct FedResult {
  GlobalModel best;   // minimum validation MAE
  GlobalModel last;   // state when the loop ended
  bool stopped_early = false;
};

// Validation MAE became NaN or Inf. Carries the history up to that round.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::vector<RoundRecord> history)
      : NumericError(what), history_(std::move(history)) {}
  const std::vector<RoundRecord>& history() const noexcept { return history_; }

 private:
  std::vector<RoundRecord> history_;
};

// One client per context, with samples built by the model.
std::vector<ClientState> make_clients(const models::Model& model,
                                      std::span<const data::Context> normalized,
                                      const nn::OptimizerConfig& opt);

// Aggregation weight of a client before normalization.
double client_alpha(std::size_t n_samples, int n_stas, const FedConfig& cfg);

// Pulls w_t into `model`, runs local epochs, returns the updated parameters.
// `model` is scratch space owned by the calling worker.
ClientUpdate local_train(models::Model& model, ClientState& client, std::span<const double> w_t,
                         const FedConfig& cfg, int round);

// Uniform mean, or weighted by n_samples / sum(n_samples).
std::vector<double> fedavg_aggregate(std::span<const ClientUpdate> updates, Aggregation mode);
// alpha = n / s per update, normalized by the sum of alphas.
std::vector<double> federations_aggregate(std::span<const ClientUpdate> updates);
// Weighted by each update's `alpha`, normalized. Summation is in ascending
// context id order, so the result does not depend on arrival order.
std::vector<double> weighted_aggregate(std::span<const ClientUpdate> updates);

// Uniform sample without replacement, sorted ascending.
std::vector<int> sample_clients(std::span<const int> train_ids, std::size_t n,
                                std::uint64_t seed, int round);

using RoundCallback = std::function<void(const RoundRecord&)>;

FedResult run_federated(const models::Model& prototype, std::vector<ClientState>& clients,
                        const models::SampleSet& val, const data::NormMeta& meta,
                        const FedConfig& cfg, const RoundCallback& on_round = {});

void write_history_csv(const std::string& path, std::span<const RoundRecord> history,
                       std::string_view comment = {});

}  // namespace srfl::fed
