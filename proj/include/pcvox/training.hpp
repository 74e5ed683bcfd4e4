#pragma once

#include "pcvox/voxnet.hpp"

namespace pcvox::nn {

struct TrainSchedule {
  int epochs = 10;
  int batch_size = 8;
  double lr = 1e-4;
  double lr_decay = 0.5;
  int lr_decay_every = 5;  // epochs
  uint64_t shuffle_seed = 7;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0;
  double lr = 0;
};

struct TrainOutcome {
  Checkpoint checkpoint;  // last completed epoch (divergence keeps the last good one)
  std::vector<EpochLog> log;
  bool diverged = false;
};

TrainOutcome train_surrogate(SurrogateModel& model, const std::vector<VoxelCloud>& train,
                             const TrainSchedule& sched);

TrainOutcome train_voxnet(VoxNetModel& model, const SurrogateModel& frozen_surrogate,
                          const std::vector<VoxelCloud>& train, double lambda,
                          const TrainSchedule& sched);

}  // namespace pcvox::nn
