#pragma once

#include "pcvox/bitstream.hpp"
#include "pcvox/checkpoint.hpp"
#include "pcvox/layers.hpp"
#include "pcvox/octree_codec.hpp"
#include "pcvox/optim.hpp"

namespace pcvox::nn {

struct SurrogateConfig {
  int channels = 32;
  int extraction_blocks = 2;
  bool extraction_inception = true;
  int aggregation_blocks = 2;
  // Octree levels coded with the context scheme instead of the network
  // (too few nodes near the root to justify inference).
  int coarse_levels = 2;
  uint64_t seed = 1;
};

// Per-parent occupancy probabilities for the eight child slots, each
// conditioned on the slots decided before it.
struct ChildProbs {
  Matrix probs;  // parents x 8, clamped into (0,1)
};

// Node featurization for one octree level: a constant-1 channel plus the
// occupancy byte of the node's parent from the coarser level, as 8 binary
// channels.
inline constexpr int kLevelInputChannels = 9;
SparseTensor make_level_input(const std::vector<Vec3i>& nodes, int level_bits,
                              const std::vector<Vec3i>& coarser_coords,
                              const std::vector<uint8_t>& coarser_occupancy);

// Differentiable stand-in for the octree coder: an autoregressive
// occupancy-probability model over parent nodes, usable as a frozen rate
// estimator in joint training and standalone as a lossless codec.
class SurrogateModel {
public:
  explicit SurrogateModel(SurrogateConfig cfg);

  // Hidden features f_N per parent coordinate from the extraction stack.
  SparseTensor parent_features(Tape& t, const SparseTensor& level_input, bool training) const;

  // One aggregation pass: occupancy probability of child slot i for every
  // parent, given the decided earlier-slot bits (-1 marks undecided).
  NodePtr predict_step(Tape& t, const SparseTensor& f_n, const NodePtr& decided,
                       bool training) const;

  // Eight causal passes with teacher forcing; decided slots are taken from
  // target_bits (parents x 8, values 0/1). Undecided slots are injected as
  // -1. Gradients reach the parameters (unless frozen) and the targets.
  // Returns the summed BCE in nats.
  NodePtr level_coding_loss(Tape& t, const SparseTensor& level_input, const NodePtr& target_bits,
                            bool training) const;

  // All eight conditional probabilities under teacher forcing (eval mode).
  ChildProbs predict_child_probs(const SparseTensor& level_input,
                                 const Matrix& target_bits) const;

  // Pretraining objective: summed BCE over every child slot of every
  // network-coded level of every cloud in the batch. Applies one Adam step
  // and returns the loss value.
  double pretrain_step(const std::vector<VoxelCloud>& batch, Adam& opt);

  // Estimated coding cost in bits: BCE/ln2 over network-coded levels plus
  // one bit per child slot of the bootstrap levels.
  double estimate_rate_bits(const VoxelCloud& vc) const;

  std::vector<NodePtr> parameters() const;
  void set_frozen(bool frozen);

  Checkpoint to_checkpoint() const;
  void load_checkpoint(const Checkpoint& cp);
  static SurrogateModel from_checkpoint(const Checkpoint& cp);
  uint64_t checkpoint_hash() const { return to_checkpoint().hash(); }

  const SurrogateConfig& config() const { return cfg_; }
  ParamRegistry& registry() { return reg_; }
  int bootstrap_levels(int depth) const { return std::min(cfg_.coarse_levels, depth); }

private:
  SurrogateConfig cfg_;
  ParamRegistry reg_;
  std::vector<ConvBlock> extraction_;
  InceptionResNet inception_;
  std::vector<ConvBlock> aggregation_;
  Conv head_;
};

struct SurrogateCodingStats {
  double estimated_bits = 0;
  // Fixed-point probabilities in coding order, for replay comparisons.
  std::vector<uint16_t> prob_trace;
  bool trace_probs = false;
};

// Lossless geometry codec driven by the surrogate probabilities, quantized
// to 16-bit fixed point before coding on both sides. Bootstrap levels use
// the context scheme. The checkpoint hash rides in the header and decode
// refuses a mismatched model.
Bitstream surrogate_encode(const SurrogateModel& model, const VoxelCloud& vc, float scale = 1.0f,
                           SurrogateCodingStats* stats = nullptr);
VoxelCloud surrogate_decode(const SurrogateModel& model, const Bitstream& bs,
                            SurrogateCodingStats* stats = nullptr);

}  // namespace pcvox::nn
