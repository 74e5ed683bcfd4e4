#include "pcvox/training.hpp"

#include <algorithm>
#include <cmath>

namespace pcvox::nn {

namespace {

double epoch_lr(const TrainSchedule& sched, int epoch) {
  return sched.lr * std::pow(sched.lr_decay, double(epoch / sched.lr_decay_every));
}

std::vector<size_t> epoch_order(size_t n, uint64_t seed, int epoch) {
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed + uint64_t(epoch) * 0x9E3779B97F4A7C15ull);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

template <typename StepFn, typename SnapshotFn>
TrainOutcome run_epochs(const std::vector<VoxelCloud>& train, const TrainSchedule& sched,
                        Adam& opt, StepFn step, SnapshotFn snapshot) {
  TrainOutcome outcome;
  outcome.checkpoint = snapshot();
  for (int epoch = 0; epoch < sched.epochs; ++epoch) {
    opt.set_lr(epoch_lr(sched, epoch));
    std::vector<size_t> order = epoch_order(train.size(), sched.shuffle_seed, epoch);
    double epoch_loss = 0;
    try {
      for (size_t begin = 0; begin < order.size(); begin += size_t(sched.batch_size)) {
        size_t end = std::min(order.size(), begin + size_t(sched.batch_size));
        std::vector<VoxelCloud> batch;
        batch.reserve(end - begin);
        for (size_t i = begin; i < end; ++i) batch.push_back(train[order[i]]);
        epoch_loss += step(batch);
      }
    } catch (const TrainingDiverged&) {
      outcome.diverged = true;
      return outcome;
    }
    outcome.log.push_back({epoch, epoch_loss, opt.lr()});
    outcome.checkpoint = snapshot();
  }
  return outcome;
}

}  // namespace

TrainOutcome train_surrogate(SurrogateModel& model, const std::vector<VoxelCloud>& train,
                             const TrainSchedule& sched) {
  Adam opt(model.parameters(), {.lr = sched.lr});
  return run_epochs(
      train, sched, opt, [&](const std::vector<VoxelCloud>& batch) {
        return model.pretrain_step(batch, opt);
      },
      [&] { return model.to_checkpoint(); });
}

TrainOutcome train_voxnet(VoxNetModel& model, const SurrogateModel& frozen_surrogate,
                          const std::vector<VoxelCloud>& train, double lambda,
                          const TrainSchedule& sched) {
  Adam opt(model.parameters(), {.lr = sched.lr});
  return run_epochs(
      train, sched, opt, [&](const std::vector<VoxelCloud>& batch) {
        return joint_train_step(model, frozen_surrogate, batch, lambda, opt).loss;
      },
      [&] { return model.to_checkpoint(); });
}

}  // namespace pcvox::nn
