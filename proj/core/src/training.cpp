#include "varprec/training.hpp"

#include <cmath>
#include <optional>

namespace varprec::training {

TrainHistory fit(nd::ParamStore& params, std::int64_t n_train, const TrainConfig& cfg,
                 const StepFn& step, const ValFn& validate, Rng& rng) {
  if (n_train < 1) throw std::invalid_argument("fit: empty training set");
  if (cfg.epochs < 1) throw std::invalid_argument("fit: epoch count must be >= 1");

  TrainHistory history;
  std::vector<std::int64_t> order(static_cast<std::size_t>(n_train));
  for (std::int64_t i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = i;
  const std::int64_t bs = cfg.batch_size > 0 ? cfg.batch_size : n_train;

  double best_metric = -std::numeric_limits<double>::infinity();
  std::optional<nd::ParamStore::Snapshot> best_snapshot;
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::int64_t start = 0; start < n_train; start += bs) {
      const std::int64_t len = std::min(bs, n_train - start);
      nd::Tensor loss = step({order.data() + start, static_cast<std::size_t>(len)}, rng);
      const double v = loss.value();
      if (!std::isfinite(v)) throw DivergedError(epoch, params.step_count());
      nd::backward(loss);
      nd::adam_step(params, cfg.lr, cfg.adam);
      epoch_loss += v;
      ++batches;
    }
    history.objective.push_back(epoch_loss / batches);
    history.epochs_run = epoch + 1;

    if (validate) {
      const double metric = validate(rng);
      history.val_metric.push_back(metric);
      if (metric > best_metric) {  // strict: ties keep the earlier parameters
        best_metric = metric;
        best_snapshot = params.snapshot();
        history.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
      if (cfg.patience > 0 && since_best >= cfg.patience) break;
    }
  }

  if (best_snapshot) params.restore(*best_snapshot);
  return history;
}

}  // namespace varprec::training
