#include "srfl/federated.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>

#include "srfl/csv.hpp"
#include "srfl/random.hpp"

namespace srfl::fed {

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kFedAvgUniform: return "fedavg_uniform";
    case Aggregation::kFedAvgWeighted: return "fedavg_weighted";
    case Aggregation::kFederationsAlpha: return "federations_alpha";
  }
  return "?";
}

Aggregation aggregation_from_string(std::string_view name) {
  if (name == "fedavg_uniform") return Aggregation::kFedAvgUniform;
  if (name == "fedavg_weighted") return Aggregation::kFedAvgWeighted;
  if (name == "federations_alpha") return Aggregation::kFederationsAlpha;
  throw ConfigError("unknown aggregation '" + std::string(name) + "'");
}

std::string_view to_string(Participation p) {
  return p == Participation::kFull ? "full" : "sampled";
}

Participation participation_from_string(std::string_view name) {
  if (name == "full") return Participation::kFull;
  if (name == "sampled") return Participation::kSampled;
  throw ConfigError("unknown participation '" + std::string(name) + "'");
}

void FedConfig::validate(std::size_t n_train_clients) const {
  if (rounds == 0) throw ConfigError("rounds must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (eval_every == 0) throw ConfigError("eval_every must be positive");
  if (patience % eval_every != 0) {
    throw ConfigError("patience (" + std::to_string(patience) +
                      ") must be a multiple of eval_every (" + std::to_string(eval_every) + ")");
  }
  if (n_train_clients == 0) throw ConfigError("no training clients");
  if (participation == Participation::kSampled &&
      (clients_per_round == 0 || clients_per_round > n_train_clients)) {
    throw ConfigError("clients per round must lie in [1, " + std::to_string(n_train_clients) +
                      "], got " + std::to_string(clients_per_round));
  }
  if (sta_normalization == StaNormalization::kGlobalConstant && global_n_sta <= 0) {
    throw ConfigError("global STA count must be positive");
  }
  if (!(optimizer.learning_rate > 0.0) || !std::isfinite(optimizer.learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
}

std::vector<ClientState> make_clients(const models::Model& model,
                                      std::span<const data::Context> normalized,
                                      const nn::OptimizerConfig& opt) {
  std::vector<ClientState> clients;
  clients.reserve(normalized.size());
  for (const auto& ctx : normalized) {
    ClientState c;
    c.context_id = ctx.data.context_id;
    c.samples = model.make_samples(ctx);
    c.n_samples = ctx.data.n_samples();
    c.n_stas = ctx.data.n_stas;
    c.optimizer = nn::OptimizerState(opt);
    clients.push_back(std::move(c));
  }
  std::sort(clients.begin(), clients.end(),
            [](const ClientState& a, const ClientState& b) { return a.context_id < b.context_id; });
  return clients;
}

double client_alpha(std::size_t n_samples, int n_stas, const FedConfig& cfg) {
  const auto n = static_cast<double>(n_samples);
  switch (cfg.aggregation) {
    case Aggregation::kFedAvgUniform: return 1.0;
    case Aggregation::kFedAvgWeighted: return n;
    case Aggregation::kFederationsAlpha: {
      const int s = cfg.sta_normalization == StaNormalization::kGlobalConstant ? cfg.global_n_sta
                                                                              : n_stas;
      if (s <= 0) throw ConfigError("context has no STAs");
      return n / static_cast<double>(s);
    }
  }
  return 1.0;
}

ClientUpdate local_train(models::Model& model, ClientState& client, std::span<const double> w_t,
                         const FedConfig& cfg, int round) {
  model.set_parameters(w_t);
  models::train_minibatch(model, client.samples, client.optimizer, cfg.local_epochs,
                          cfg.batch_size,
                          mix_seed(cfg.seed, 0x10ca1ULL, static_cast<std::uint64_t>(round),
                                   static_cast<std::uint64_t>(client.context_id)));
  ClientUpdate u;
  u.context_id = client.context_id;
  u.params = model.parameters();
  u.n_samples = client.n_samples;
  u.n_stas = client.n_stas;
  u.alpha = client_alpha(client.n_samples, client.n_stas, cfg);
  return u;
}

std::vector<double> weighted_aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ConfigError("aggregation needs at least one update");
  std::vector<const ClientUpdate*> order;
  for (const auto& u : updates) {
    if (u.params.size() != updates.front().params.size()) {
      throw ShapeError("update from context " + std::to_string(u.context_id) + " has " +
                       std::to_string(u.params.size()) + " parameters, expected " +
                       std::to_string(updates.front().params.size()));
    }
    if (!(u.alpha >= 0.0)) throw ConfigError("aggregation weight must be non-negative");
    order.push_back(&u);
  }
  std::stable_sort(order.begin(), order.end(), [](const ClientUpdate* a, const ClientUpdate* b) {
    return a->context_id < b->context_id;
  });
  double total = 0.0;
  for (const auto* u : order) total += u->alpha;
  if (!(total > 0.0)) throw ConfigError("sum of aggregation weights is zero");

  // Accumulate offsets from the first update: identical updates come back
  // exactly, and a single update is returned unchanged.
  const std::vector<double>& base = order.front()->params;
  std::vector<double> out = base;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double w = order[k]->alpha / total;
    const auto& p = order[k]->params;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * (p[i] - base[i]);
  }
  return out;
}

std::vector<double> fedavg_aggregate(std::span<const ClientUpdate> updates, Aggregation mode) {
  std::vector<ClientUpdate> weighted(updates.begin(), updates.end());
  for (auto& u : weighted) {
    u.alpha = mode == Aggregation::kFedAvgWeighted ? static_cast<double>(u.n_samples) : 1.0;
  }
  return weighted_aggregate(weighted);
}

std::vector<double> federations_aggregate(std::span<const ClientUpdate> updates) {
  std::vector<ClientUpdate> weighted(updates.begin(), updates.end());
  for (auto& u : weighted) {
    if (u.n_stas <= 0) throw ConfigError("context " + std::to_string(u.context_id) + " has no STAs");
    u.alpha = static_cast<double>(u.n_samples) / static_cast<double>(u.n_stas);
  }
  return weighted_aggregate(weighted);
}

std::vector<int> sample_clients(std::span<const int> train_ids, std::size_t n,
                                std::uint64_t seed, int round) {
  if (n == 0 || n > train_ids.size()) {
    throw ConfigError("cannot sample " + std::to_string(n) + " clients from " +
                      std::to_string(train_ids.size()));
  }
  std::vector<int> ids(train_ids.begin(), train_ids.end());
  std::sort(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, 0x5a3bULL, static_cast<std::uint64_t>(round)));
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(ids.size() - 1)));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(n);
  std::sort(ids.begin(), ids.end());
  return ids;
}

namespace {

// Trains the selected clients, at most `workers` at a time. Each worker owns a
// model clone; results land in fixed slots so scheduling cannot reorder them.
std::vector<ClientUpdate> train_round(const models::Model& prototype,
                                      std::vector<ClientState*>& selected,
                                      std::span<const double> w_t, const FedConfig& cfg,
                                      int round) {
  std::vector<ClientUpdate> updates(selected.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, selected.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    auto model = prototype.clone();
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= selected.size()) return;
      try {
        updates[i] = local_train(*model, *selected[i], w_t, cfg, round);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next.store(selected.size());
        return;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return updates;
}

double pooled_mae(models::Model& model, std::span<ClientState* const> clients,
                  const data::NormMeta& meta) {
  double sum = 0.0;
  double count = 0.0;
  for (const auto* c : clients) {
    if (c->samples.size() == 0) continue;
    const nn::Tensor pred = model.predict(c->samples);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (c->samples.mask[i] == 0.0) continue;
      sum += std::abs(meta.denormalize_label(pred[i]) -
                      meta.denormalize_label(c->samples.target[i]));
      count += 1.0;
    }
  }
  return count == 0.0 ? 0.0 : sum / count;
}

}  // namespace

FedResult run_federated(const models::Model& prototype, std::vector<ClientState>& clients,
                        const models::SampleSet& val, const data::NormMeta& meta,
                        const FedConfig& cfg, const RoundCallback& on_round) {
  cfg.validate(clients.size());
  std::vector<int> ids;
  for (const auto& c : clients) ids.push_back(c.context_id);
  std::vector<int> sorted_ids = ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  if (std::adjacent_find(sorted_ids.begin(), sorted_ids.end()) != sorted_ids.end()) {
    throw ConfigError("duplicate client context ids");
  }

  auto eval_model = prototype.clone();
  FedResult result;
  GlobalModel& global = result.last;
  global.params = prototype.parameters();
  global.round = 0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t t = 1; t <= cfg.rounds; ++t) {
    const auto started = std::chrono::steady_clock::now();
    const int round = static_cast<int>(t);
    std::vector<int> chosen = cfg.participation == Participation::kFull
                                  ? sorted_ids
                                  : sample_clients(ids, cfg.clients_per_round, cfg.seed, round);
    std::vector<ClientState*> selected;
    for (auto& c : clients) {
      if (!std::binary_search(chosen.begin(), chosen.end(), c.context_id)) continue;
      if (c.samples.size() == 0) {
        std::cerr << "warning: context " << c.context_id << " has no samples; skipped\n";
        continue;
      }
      selected.push_back(&c);
    }

    if (!selected.empty()) {
      const auto updates = train_round(prototype, selected, global.params, cfg, round);
      global.params = weighted_aggregate(updates);
    }
    global.round = round;

    RoundRecord rec;
    rec.round = round;
    rec.n_clients = selected.size();
    eval_model->set_parameters(global.params);
    rec.train_mae_mbps = pooled_mae(*eval_model, selected, meta);
    const bool evaluate = t % cfg.eval_every == 0 || t == cfg.rounds;
    if (evaluate) {
      rec.evaluated = true;
      rec.val_mae_mbps = models::mae_mbps(*eval_model, val, meta);
    }
    if (cfg.record_timing) {
      rec.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    global.history.push_back(rec);
    if (on_round) on_round(rec);

    if (evaluate) {
      if (!std::isfinite(rec.val_mae_mbps)) {
        throw DivergenceError("validation MAE is not finite at round " + std::to_string(round),
                              global.history);
      }
      if (rec.val_mae_mbps < best_val) {
        best_val = rec.val_mae_mbps;
        since_best = 0;
        result.best.params = global.params;
        result.best.round = round;
      } else {
        since_best += cfg.eval_every;
      }
      if (cfg.patience > 0 && since_best >= cfg.patience && t < cfg.rounds) {
        result.stopped_early = true;
        break;
      }
    }
  }
  result.best.history = global.history;
  return result;
}

void write_history_csv(const std::string& path, std::span<const RoundRecord> history,
                       std::string_view comment) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  if (!comment.empty()) out << '#' << comment << '\n';
  out << "round,train_mae_mbps,val_mae_mbps,n_clients,seconds\n";
  for (const auto& r : history) {
    out << r.round << ',' << csv::format_double(r.train_mae_mbps) << ','
        << (r.evaluated ? csv::format_double(r.val_mae_mbps) : std::string()) << ','
        << r.n_clients << ',' << csv::format_double(r.seconds) << '\n';
  }
  if (!out) throw Error("failed writing " + path);
}

}  // namespace srfl::fed
