#pragma once

#include <cstdint>
#include <utility>

#include "fedicu/federation.hpp"
#include "fedicu/trainer.hpp"

// In-process federated client: holds its preprocessed train/validation
// shards, its own class weights, and a persistent Adam state that survives
// across rounds (moments are never averaged or reset).

namespace fedicu {

class SimulatedClient final : public FederatedClient {
  public:
    SimulatedClient(std::uint64_t id, const ArchitectureSpec& spec, Dataset train_shard,
                    Dataset val_shard, std::size_t batch_size, int local_epochs,
                    std::uint64_t seed)
        : id_(id),
          spec_(spec),
          train_(std::move(train_shard)),
          val_(std::move(val_shard)),
          batch_size_(batch_size),
          local_epochs_(local_epochs),
          seed_(seed) {
        if (train_.size() == 0) throw ConfigError("client train shard is empty");
        if (val_.size() == 0) throw ConfigError("client validation shard is empty");
        if (batch_size_ < 1) throw ConfigError("client batch size must be >= 1");
        if (local_epochs_ < 1) throw ConfigError("client local epochs must be >= 1");
        weights_ = compute_class_weights(train_.labels);
    }

    std::uint64_t id() const override { return id_; }
    std::size_t train_size() const override { return train_.size(); }

    ParameterSet run_local_pass(const ParameterSet& global_params, int round,
                                double learning_rate) override {
        if (!opt_ready_) {
            opt_ = AdamState::init(global_params);
            opt_ready_ = true;
        }
        const std::uint64_t epoch_base =
            static_cast<std::uint64_t>(round) * static_cast<std::uint64_t>(local_epochs_);
        return local_pass(spec_, global_params, opt_, train_, weights_, batch_size_,
                          learning_rate, local_epochs_, seed_, id_, epoch_base);
    }

    double validation_loss(const ParameterSet& global_params) override {
        return evaluate_loss(spec_, global_params, val_, weights_);
    }

    const Dataset& train_data() const { return train_; }
    const Dataset& val_data() const { return val_; }
    const ClassWeights& class_weights() const { return weights_; }

  private:
    std::uint64_t id_;
    ArchitectureSpec spec_;
    Dataset train_, val_;
    std::size_t batch_size_;
    int local_epochs_;
    std::uint64_t seed_;
    ClassWeights weights_{};
    AdamState opt_;
    bool opt_ready_ = false;
};

// Splits a shared batch budget across k clients: floor(base/k), at least 1.
inline std::size_t client_batch_size(std::size_t base_batch, std::size_t k) {
    if (k == 0) throw ConfigError("client count must be >= 1");
    return std::max<std::size_t>(1, base_batch / k);
}

}  // namespace fedicu
