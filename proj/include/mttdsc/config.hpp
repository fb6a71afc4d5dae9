#pragma once

#include <cstddef>
#include <cstdint>

#include "mttdsc/errors.hpp"

namespace mttdsc {

// Published training defaults: hidden size 64, recurrent and pre-head dropout
// 0.2, Adam(0.001, 0.9, 0.999), mini-batch 64.
struct TrainConfig {
  std::size_t hidden_dim = 64;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch = 64;
  double recurrent_dropout = 0.2;
  double head_dropout = 0.2;
  double alpha = 1.0;  // main-loss weight in the joint objective
  std::size_t epochs = 10;
  std::size_t pretrain_epochs = 1;
  std::size_t ensemble_size = 5;
  std::uint64_t seed = 0;
  // aux batches per main batch per epoch; 0 = proportional to dataset
  // sizes, capped at 8
  std::size_t aux_batch_ratio = 0;

  void validate() const {
    if (hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
    if (batch == 0) throw ConfigError("batch must be positive");
    if (ensemble_size == 0) throw ConfigError("ensemble_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
    if (!rate_ok(beta1) || !rate_ok(beta2)) {
      throw ConfigError("beta1/beta2 must be in [0,1)");
    }
    if (!rate_ok(recurrent_dropout) || !rate_ok(head_dropout)) {
      throw ConfigError("dropout rates must be in [0,1)");
    }
    if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace mttdsc
