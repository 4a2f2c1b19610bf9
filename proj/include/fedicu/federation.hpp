#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fedicu/early_stop.hpp"
#include "fedicu/errors.hpp"
#include "fedicu/log.hpp"
#include "fedicu/params.hpp"

// Federated-averaging coordinator. The client boundary exchanges parameter
// sets and scalar validation losses only; this header has no dependency on
// sample or dataset types, which is what keeps raw data on the client side.

namespace fedicu {

// A participant holding its own training and validation shard. The
// coordinator never sees the data behind this interface.
class FederatedClient {
  public:
    virtual ~FederatedClient() = default;
    virtual std::uint64_t id() const = 0;
    virtual std::size_t train_size() const = 0;
    // One local training pass starting from a copy of the received global
    // parameters; must leave `global_params` untouched.
    virtual ParameterSet run_local_pass(const ParameterSet& global_params, int round,
                                        double learning_rate) = 0;
    // Weighted BCE of the given model on the client's validation shard.
    virtual double validation_loss(const ParameterSet& global_params) = 0;
};

struct FederationConfig {
    int max_rounds = 100;
    double learning_rate = 0.01;
    bool fixed_lr = true;  // constant lr across rounds by default
    double decay_factor = 0.5;
    int decay_every = 5;
    int patience = 30;
    bool size_weighted_loss = false;  // n_k-weighted mean instead of plain mean

    void validate() const {
        if (max_rounds < 1) throw ConfigError("max rounds must be >= 1");
        if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
        if (decay_factor <= 0.0 || decay_factor > 1.0)
            throw ConfigError("decay factor must be in (0,1]");
        if (decay_every < 1) throw ConfigError("decay interval must be >= 1");
        if (patience < 1 || patience > max_rounds)
            throw ConfigError("patience must be in [1, max rounds]");
    }
};

struct RoundRecord {
    int round = 0;  // 0-based
    double lr = 0.0;
    std::vector<double> client_val_losses;  // ascending client id order
    double avg_val_loss = 0.0;
    std::uint64_t params_checksum = 0;
};

struct FederationOutcome {
    ParameterSet best_params;
    int best_round = -1;
    double best_avg_val_loss = 0.0;
    std::vector<RoundRecord> history;
    bool stopped_early = false;
    ParameterSet final_params;  // aggregate after the last executed round
};

// Size-weighted average of same-spec parameter sets, every entry (trainable
// and running statistic) alike. Computed in delta form,
//   w = w_0 + sum_k (n_k/n) * (w_k - w_0),
// so identical inputs reproduce w_0 bitwise, then clamped to the coordinate
// envelope so each output lies within [min_k, max_k] exactly.
inline ParameterSet fedavg_aggregate(const std::vector<const ParameterSet*>& client_params,
                                     const std::vector<std::size_t>& client_sizes) {
    if (client_params.empty() || client_params.size() != client_sizes.size())
        throw ContractError("aggregate: need matching parameter sets and sizes");
    double total = 0.0;
    for (std::size_t n : client_sizes) total += static_cast<double>(n);
    if (total <= 0.0) throw ContractError("aggregate: total client size must be positive");
    const ParameterSet& first = *client_params.front();
    for (const ParameterSet* p : client_params) {
        if (!first.same_spec(*p)) throw ContractError("aggregate: parameter spec mismatch");
    }

    ParameterSet out = first;
    if (client_params.size() == 1) return out;
    for (std::size_t e = 0; e < out.size(); ++e) {
        double* acc = out.entry(e).values.data.data();
        const std::size_t count = out.entry(e).values.numel();
        const double* base = first.entry(e).values.data.data();
        for (std::size_t k = 1; k < client_params.size(); ++k) {
            const double alpha = static_cast<double>(client_sizes[k]) / total;
            const double* wk = client_params[k]->entry(e).values.data.data();
            for (std::size_t i = 0; i < count; ++i) acc[i] += alpha * (wk[i] - base[i]);
        }
        for (std::size_t i = 0; i < count; ++i) {
            double lo = base[i], hi = base[i];
            for (std::size_t k = 1; k < client_params.size(); ++k) {
                const double w = client_params[k]->entry(e).values.data[i];
                lo = std::min(lo, w);
                hi = std::max(hi, w);
            }
            acc[i] = std::clamp(acc[i], lo, hi);
        }
    }
    return out;
}

inline double federation_lr(const FederationConfig& config, int round) {
    if (config.fixed_lr) return config.learning_rate;
    return config.learning_rate *
           std::pow(config.decay_factor, static_cast<double>(round / config.decay_every));
}

// One federation run: per round, broadcast the global parameters, collect
// every client's local pass, aggregate by n_k/n, then let every client score
// the aggregated model on its own validation shard. The averaged validation
// loss drives early stopping; the best round's aggregate is restored.
inline FederationOutcome run_federation(ParameterSet initial_params,
                                        const std::vector<FederatedClient*>& clients,
                                        const FederationConfig& config) {
    config.validate();
    if (clients.empty()) throw ConfigError("federation needs at least one client");
    for (FederatedClient* c : clients) {
        if (c == nullptr) throw ContractError("federation: null client");
        if (c->train_size() == 0) throw ConfigError("federation: client with empty shard");
    }
    // Ascending id gives a fixed aggregation order (deterministic summation).
    std::vector<FederatedClient*> ordered = clients;
    std::sort(ordered.begin(), ordered.end(),
              [](const FederatedClient* a, const FederatedClient* b) { return a->id() < b->id(); });
    for (std::size_t i = 1; i < ordered.size(); ++i) {
        if (ordered[i]->id() == ordered[i - 1]->id())
            throw ContractError("federation: duplicate client id");
    }

    std::vector<std::size_t> sizes(ordered.size());
    double total_size = 0.0;
    for (std::size_t k = 0; k < ordered.size(); ++k) {
        sizes[k] = ordered[k]->train_size();
        total_size += static_cast<double>(sizes[k]);
    }

    ParameterSet global = std::move(initial_params);
    EarlyStopper stopper(config.patience);
    FederationOutcome out;
    for (int round = 0; round < config.max_rounds; ++round) {
        const double lr = federation_lr(config, round);
        std::vector<ParameterSet> locals;
        locals.reserve(ordered.size());
        for (FederatedClient* c : ordered) locals.push_back(c->run_local_pass(global, round, lr));
        std::vector<const ParameterSet*> views;
        views.reserve(locals.size());
        for (const ParameterSet& p : locals) views.push_back(&p);
        global = fedavg_aggregate(views, sizes);

        RoundRecord rec;
        rec.round = round;
        rec.lr = lr;
        double loss_acc = 0.0;
        for (std::size_t k = 0; k < ordered.size(); ++k) {
            const double loss = ordered[k]->validation_loss(global);
            if (!std::isfinite(loss))
                throw NumericError("round " + std::to_string(round) +
                                   ": non-finite validation loss from client " +
                                   std::to_string(ordered[k]->id()));
            rec.client_val_losses.push_back(loss);
            loss_acc += config.size_weighted_loss
                            ? loss * static_cast<double>(sizes[k]) / total_size
                            : loss / static_cast<double>(ordered.size());
        }
        rec.avg_val_loss = loss_acc;
        rec.params_checksum = checksum(global);
        out.history.push_back(rec);

        const bool stop = stopper.observe(loss_acc);
        if (stopper.last_improved()) {
            out.best_params = global;
            out.best_round = round;
            out.best_avg_val_loss = loss_acc;
        }
        log_debug("round " + std::to_string(round) + ": avg val loss " +
                  std::to_string(loss_acc));
        if (stop) {
            out.stopped_early = true;
            break;
        }
    }
    out.final_params = std::move(global);
    return out;
}

}  // namespace fedicu
