#pragma once

#include "pcvox/surrogate.hpp"

namespace pcvox::nn {

struct VoxNetConfig {
  int channels = 32;
  int extraction_blocks = 2;
  uint64_t seed = 2;
};

// Where the resolution-increasing transposed convolution sits. The deployed
// model is back-loaded (feature extraction runs at parent resolution, the
// transposed convolution comes last); the mid-network variant exists for
// the FLOPs comparison only.
enum class UpsamplePlacement { BackLoaded, MidNetwork };

// Candidate children of the downsampled cloud with their classification
// probabilities and STE-rounded occupancy decisions.
struct ClassifiedChildren {
  std::vector<Vec3i> candidates;  // exactly the 8-children dilation, Morton order
  std::vector<Vec3i> parents;     // downsampled coords, Morton order
  int depth = 0;                  // resolution of candidates
  NodePtr probs;                  // candidates x 1, in (0,1)
  NodePtr bits;                   // candidates x 1, hard {0,1} via ste_round
};

// Per-layer resolution trace of one forward pass, for structural checks.
struct LayerTrace {
  std::vector<std::pair<std::string, int>> steps;  // (layer, output resolution bits)
};

struct VoxelizeResult {
  VoxelCloud cloud;
  bool fallback = false;  // all candidates classified unoccupied
};

struct EditStats {
  size_t added = 0;
  size_t removed = 0;
  size_t pruned_parents = 0;  // parents losing every child
};

// Compression-oriented preprocessor: downsample by 2, extract features at
// parent resolution, upsample with a single trailing transposed
// convolution, then classify each candidate child as occupied iff its
// probability is >= 0.5.
class VoxNetModel {
public:
  explicit VoxNetModel(VoxNetConfig cfg);

  ClassifiedChildren classify(Tape& t, const VoxelCloud& scaled, bool training,
                              UpsamplePlacement placement = UpsamplePlacement::BackLoaded,
                              LayerTrace* trace = nullptr) const;

  VoxelizeResult voxelize(const PointCloud& pc, double scale, int depth) const;
  VoxelizeResult voxelize(const VoxelCloud& scaled) const;

  std::vector<NodePtr> parameters() const;
  Checkpoint to_checkpoint() const;
  void load_checkpoint(const Checkpoint& cp);
  static VoxNetModel from_checkpoint(const Checkpoint& cp);
  uint64_t checkpoint_hash() const { return to_checkpoint().hash(); }

  const VoxNetConfig& config() const { return cfg_; }
  ParamRegistry& registry() { return reg_; }
  // Test hook for the degenerate-output path.
  void set_head_bias(double v) { head_.bias()->value.setConstant(v); }

private:
  VoxNetConfig cfg_;
  ParamRegistry reg_;
  ConvBlock down_;
  std::vector<ConvBlock> extraction_;
  Conv up_;
  Conv head_;
};

// BCE between the scaled cloud's occupancy of each candidate and its
// classification probability, summed over the candidate set (nats).
NodePtr distortion_loss(Tape& t, const ClassifiedChildren& classified, const VoxelCloud& scaled);

struct JointStepStats {
  double loss = 0;
  double distortion = 0;
  double rate_nats = 0;
  size_t output_points = 0;
  size_t degenerate_clouds = 0;
};

// One optimization step of L = D + lambda * R over a batch: D is the
// distortion BCE against each scaled cloud, R the frozen surrogate's
// estimate on the STE-rounded output octree. Rate gradients reach the
// classifier through the STE identity backward, both via the coded-bit
// targets and via the decided-sibling feature channels.
JointStepStats joint_train_step(VoxNetModel& voxnet, const SurrogateModel& frozen_surrogate,
                                const std::vector<VoxelCloud>& batch, double lambda, Adam& opt);

EditStats prune_region_report(const VoxelCloud& before, const VoxelCloud& after);

struct UpsampleFlops {
  long back_loaded = 0;
  long mid_network = 0;
};

// FLOPs of both placements on one input, from the tape ledger.
UpsampleFlops compare_upsample_flops(const VoxNetModel& model, const VoxelCloud& scaled);

}  // namespace pcvox::nn
