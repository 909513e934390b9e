// SPDX-License-Identifier: Apache-2.0
#include "glowcast/model/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "glowcast/error.hpp"
#include "glowcast/numerics/ops.hpp"
#include "glowcast/numerics/tape.hpp"

namespace glowcast {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("train config: " + what);
}

[[noreturn]] void report_non_finite(double loss, std::size_t epoch, std::size_t step) {
  std::string where = "no recorded op";
  if (const auto bad = Tape::current().first_non_finite())
    where = "op #" + std::to_string(bad->position) + " '" + bad->op + "' with shape " +
            shape_string(bad->shape);
  Tape::current().clear();
  throw NumericError("training loss became " + std::to_string(loss) + " at epoch " +
                     std::to_string(epoch) + ", step " + std::to_string(step) +
                     "; first non-finite value produced by " + where);
}

void check_parameters(const Seq2SeqModel& model) {
  for (const Tensor& p : model.parameters())
    for (double v : p.values())
      if (!std::isfinite(v)) throw NumericError("parameter '" + p.name() + "' became non-finite");
}

}  // namespace

void TrainConfig::validate() const {
  require(batch_size >= 1, "batch size must be at least 1");
  require(max_epochs >= 1, "max epochs must be at least 1");
  require(patience < max_epochs, "patience must be smaller than max epochs");
  require(base_lr >= 0.0 && std::isfinite(base_lr), "learning rate must be non-negative");
  require(lr_decay > 0.0 && lr_decay < 1.0, "learning-rate decay must lie in (0, 1)");
  require(curriculum_tau > 0.0, "curriculum constant must be positive");
  require(std::isfinite(clip_norm), "clip norm must be finite");
}

double teacher_forcing_probability(std::size_t global_step, double tau) {
  // Capped exponent keeps the value strictly positive for any step count.
  const double x = std::min(static_cast<double>(global_step) / tau, 700.0);
  return tau / (tau + std::exp(x));
}

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  double lr = config.base_lr;
  for (std::size_t m : config.milestones)
    if (epoch >= m) lr *= config.lr_decay;
  return lr;
}

Adam::Adam(std::vector<Tensor> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    const auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

double clip_gradients(std::span<const Tensor> params, double max_norm) {
  double sq = 0.0;
  for (const Tensor& p : params)
    for (double g : p.grad()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (const Tensor& p : params)
      if (p.has_grad())
        for (double& g : p.grad_buffer()) g *= factor;
  }
  return norm;
}

double evaluate_mae(const Seq2SeqModel& model, const ForecastBatch& windows, std::size_t chunk) {
  if (windows.empty()) throw ContractError("evaluate_mae: no windows");
  const std::vector<double> pred = predict_windows(model, windows, chunk);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += std::fabs(pred[i] - windows.target[i]);
  return total / static_cast<double>(pred.size());
}

TrainResult train(Seq2SeqModel& model, const ForecastBatch& train_set, const ForecastBatch& val_set,
                  const TrainConfig& config, const NormStats& stats, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ContractError("train: no training windows");
  const auto& mc = model.config;
  if (train_set.stations != mc.stations || train_set.history_len != mc.history_len ||
      train_set.horizon != mc.horizon)
    throw DimensionError("train: windows do not match the model configuration");

  const std::vector<Tensor> params = model.parameters();
  Adam adam(params);
  std::mt19937_64 rng(config.seed ^ 0xA5A5'5A5A'C3C3'3C3CULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  double best = INFINITY;
  std::size_t since_best = 0, global_step = 0;
  const bool has_val = !val_set.empty();

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0, prob = 0.0;
    std::size_t batches = 0;

    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t last = std::min(order.size(), first + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + first, last - first);
      const StepFrames frames = gather_frames(train_set, idx);
      prob = teacher_forcing_probability(global_step, config.curriculum_tau);

      for (const Tensor& p : params) Tensor(p).zero_grad();
      const Tensor pred = forward(model, frames.history, frames.target, prob, &rng);
      const Tensor loss = ops::mae_loss(pred, ops::stack(frames.target));
      if (!std::isfinite(loss.item())) report_non_finite(loss.item(), epoch, global_step);
      backward(loss);
      clip_gradients(params, config.clip_norm);
      adam.step(lr);

      loss_sum += loss.item();
      ++batches;
      ++global_step;
    }
    check_parameters(model);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    rec.val_mae = has_val ? evaluate_mae(model, val_set) : rec.train_loss;
    rec.teacher_prob = prob;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (rec.val_mae < best) {
      best = rec.val_mae;
      since_best = 0;
      result.best = snapshot(model, stats, epoch, best);
    } else if (++since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (result.best.tensors.empty())
    throw NumericError("train: validation MAE was never finite");
  load_into(result.best, model);
  return result;
}

}  // namespace glowcast
