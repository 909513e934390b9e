// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "glowcast/data/windowing.hpp"
#include "glowcast/model/checkpoint.hpp"
#include "glowcast/model/seq2seq.hpp"

namespace glowcast {

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;
  double base_lr = 0.01;
  double lr_decay = 0.1;
  std::vector<std::size_t> milestones{50, 100};
  double curriculum_tau = 2000.0;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;  // shuffling and scheduled-sampling draws

  void validate() const;
};

/// tau / (tau + exp(step / tau)): starts near 1 and decays towards 0.
double teacher_forcing_probability(std::size_t global_step, double tau);

/// base_lr times lr_decay for every milestone at or below `epoch` (0-based).
double learning_rate_at(const TrainConfig& config, std::size_t epoch);

/// Adam with bias correction; state is one pair of moment buffers per tensor.
class Adam {
 public:
  Adam(std::vector<Tensor> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Scales every gradient so their joint L2 norm is at most `max_norm`;
/// returns the norm before scaling.
double clip_gradients(std::span<const Tensor> params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;  // mean minibatch MAE, normalized units
  double val_mae = 0.0;     // free-running, normalized units
  double teacher_prob = 0.0;  // at the last step of the epoch
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam on MAE with scheduled sampling, milestone decay, global
/// norm clipping and early stopping on validation MAE (training loss when
/// there are no validation windows). Leaves `model` holding the best
/// parameters. A non-finite loss throws NumericError naming the first op
/// that produced a non-finite value.
TrainResult train(Seq2SeqModel& model, const ForecastBatch& train_set, const ForecastBatch& val_set,
                  const TrainConfig& config, const NormStats& stats,
                  const EpochCallback& on_epoch = {});

/// Mean |prediction - target| over all windows, normalized units, no teacher.
double evaluate_mae(const Seq2SeqModel& model, const ForecastBatch& windows,
                    std::size_t chunk = 64);

}  // namespace glowcast
