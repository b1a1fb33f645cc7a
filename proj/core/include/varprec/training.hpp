#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "varprec/optimizer.hpp"
#include "varprec/rng.hpp"
#include "varprec/tensor.hpp"

namespace varprec::training {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 0;  // 0 = full batch
  double lr = 1e-3;
  int patience = 0;  // 0 disables early stopping
  nd::AdamOptions adam;
};

struct TrainHistory {
  std::vector<double> objective;   // per-epoch mean batch loss
  std::vector<double> val_metric;  // per-epoch validation metric (higher is better)
  int best_epoch = -1;
  int epochs_run = 0;
};

struct DivergedError : std::runtime_error {
  int epoch;
  std::int64_t step;
  DivergedError(int epoch_, std::int64_t step_)
      : std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch_) +
                           ", optimizer step " + std::to_string(step_)),
        epoch(epoch_),
        step(step_) {}
};

// builds the loss graph for a training-row subset; `fit` runs backward + Adam
using StepFn = std::function<nd::Tensor(std::span<const std::int64_t> rows, Rng& rng)>;
// validation metric, higher is better; empty function disables validation
using ValFn = std::function<double(Rng& rng)>;

// Minibatch loop with optional patience-based early stopping on the validation
// metric. Ties keep the earlier parameters; on stop (or exhaustion) the
// best-validation snapshot is restored whenever validation ran.
TrainHistory fit(nd::ParamStore& params, std::int64_t n_train, const TrainConfig& cfg,
                 const StepFn& step, const ValFn& validate, Rng& rng);

}  // namespace varprec::training
