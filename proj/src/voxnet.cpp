#include "pcvox/voxnet.hpp"

#include <cmath>

namespace pcvox::nn {

VoxNetModel::VoxNetModel(VoxNetConfig cfg) : cfg_(cfg) {
  if (cfg_.channels < 2) throw ConfigError("voxnet: channels must be >= 2");
  if (cfg_.extraction_blocks < 1) throw ConfigError("voxnet: extraction_blocks must be >= 1");
  std::mt19937_64 rng(cfg_.seed);
  const int c = cfg_.channels;
  down_ = ConvBlock(reg_, "down", 2, 2, 1, c, rng);
  for (int i = 0; i < cfg_.extraction_blocks; ++i)
    extraction_.push_back(ConvBlock(reg_, "fe.block" + std::to_string(i), 3, 1, c, c, rng));
  up_ = Conv(reg_, "up", 2, 2, c, c, rng);
  head_ = Conv(reg_, "head", 1, 1, c, 1, rng);
}

ClassifiedChildren VoxNetModel::classify(Tape& t, const VoxelCloud& scaled, bool training,
                                         UpsamplePlacement placement, LayerTrace* trace) const {
  scaled.validate();
  if (scaled.depth < 2) throw ContractViolation("voxnet: depth must be >= 2");

  SparseTensor x;
  x.depth = scaled.depth;
  x.coords = scaled.coords;
  x.features = make_constant(Matrix::Ones(Eigen::Index(scaled.size()), 1));

  auto log_step = [&](const char* name, const SparseTensor& st) {
    if (trace) trace->steps.push_back({name, st.depth});
  };

  x = down_.forward(t, x, training);
  log_step("down", x);
  ClassifiedChildren out;
  out.parents = x.coords;

  if (placement == UpsamplePlacement::BackLoaded) {
    for (size_t i = 0; i < extraction_.size(); ++i) {
      x = extraction_[i].forward(t, x, training);
      log_step("extract", x);
    }
    x = up_.forward_transposed(t, x);
    log_step("up", x);
  } else {
    // Reference variant: the transposed convolution sits between the
    // extraction blocks (ahead of them when only one exists), so later
    // blocks run on the dilated tensor.
    size_t mid = extraction_.size() / 2;
    for (size_t i = 0; i < mid; ++i) {
      x = extraction_[i].forward(t, x, training);
      log_step("extract", x);
    }
    x = up_.forward_transposed(t, x);
    log_step("up", x);
    for (size_t i = mid; i < extraction_.size(); ++i) {
      x = extraction_[i].forward(t, x, training);
      log_step("extract", x);
    }
  }

  x = head_.forward(t, x);
  log_step("head", x);
  out.candidates = x.coords;
  out.depth = x.depth;
  out.probs = sigmoid(t, x.features);
  out.bits = ste_round(t, out.probs);
  return out;
}

VoxelizeResult VoxNetModel::voxelize(const VoxelCloud& scaled) const {
  Tape t;
  ClassifiedChildren cls = classify(t, scaled, false);
  VoxelizeResult res;
  res.cloud.depth = scaled.depth;
  for (size_t i = 0; i < cls.candidates.size(); ++i)
    if (cls.bits->value(Eigen::Index(i), 0) >= 0.5) res.cloud.coords.push_back(cls.candidates[i]);
  if (res.cloud.coords.empty()) {
    res.cloud = scaled;
    res.fallback = true;
  }
  return res;
}

VoxelizeResult VoxNetModel::voxelize(const PointCloud& pc, double scale, int depth) const {
  return voxelize(quantize(pc, scale, depth));
}

std::vector<NodePtr> VoxNetModel::parameters() const {
  std::vector<NodePtr> out;
  for (const auto& [name, node] : reg_.params) out.push_back(node);
  return out;
}

Checkpoint VoxNetModel::to_checkpoint() const {
  Checkpoint cp = Checkpoint::from_registry(reg_);
  Matrix meta(1, 2);
  meta << double(cfg_.channels), double(cfg_.extraction_blocks);
  cp.set("meta/arch", meta);
  return cp;
}

void VoxNetModel::load_checkpoint(const Checkpoint& cp) {
  const Matrix& meta = cp.require("meta/arch", 1, 2);
  if (int(meta(0, 0)) != cfg_.channels || int(meta(0, 1)) != cfg_.extraction_blocks)
    throw IntegrityError("voxnet checkpoint architecture mismatch");
  cp.into_registry(reg_);
}

VoxNetModel VoxNetModel::from_checkpoint(const Checkpoint& cp) {
  const Matrix& meta = cp.require("meta/arch", 1, 2);
  VoxNetConfig cfg;
  cfg.channels = int(meta(0, 0));
  cfg.extraction_blocks = int(meta(0, 1));
  VoxNetModel model(cfg);
  model.load_checkpoint(cp);
  return model;
}

NodePtr distortion_loss(Tape& t, const ClassifiedChildren& classified, const VoxelCloud& scaled) {
  CoordMap member(scaled.coords, scaled.depth);
  Matrix targets(Eigen::Index(classified.candidates.size()), 1);
  for (size_t i = 0; i < classified.candidates.size(); ++i)
    targets(Eigen::Index(i), 0) = member.row(classified.candidates[i]) >= 0 ? 1.0 : 0.0;
  return bce_sum(t, make_constant(std::move(targets)), classified.probs);
}

namespace {

// Rate of the STE-rounded output octree under the frozen surrogate. The
// finest level's target bits stay tape-connected; coarser levels enter as
// constants (their occupancy depends on the candidate set only through
// discrete membership).
NodePtr output_rate_nats(Tape& t, const SurrogateModel& surrogate,
                         const ClassifiedChildren& cls, const VoxelCloud& output) {
  OctreeLevels tree = build_octree(output);
  const int depth = output.depth;
  const int boot = surrogate.bootstrap_levels(depth);

  double const_nats = 0;
  for (int l = 0; l < boot; ++l)
    const_nats += 8.0 * double(tree.levels[l].coords.size()) * std::log(2.0);
  for (int l = boot; l < depth - 1; ++l) {
    SparseTensor input = make_level_input(tree.levels[l].coords, l, tree.levels[l - 1].coords,
                                          tree.levels[l - 1].occupancy);
    Matrix target(Eigen::Index(tree.levels[l].occupancy.size()), 8);
    for (size_t j = 0; j < tree.levels[l].occupancy.size(); ++j)
      for (int b = 0; b < 8; ++b)
        target(Eigen::Index(j), b) = double((tree.levels[l].occupancy[j] >> b) & 1);
    ChildProbs probs = surrogate.predict_child_probs(input, target);
    for (Eigen::Index r = 0; r < target.rows(); ++r)
      for (int b = 0; b < 8; ++b) const_nats += bce(target(r, b), probs.probs(r, b));
  }

  NodePtr total = make_scalar(const_nats, false);
  if (depth - 1 >= boot) {
    const int l = depth - 1;
    const OctreeLevel& level = tree.levels[l];
    // Surviving parents are a subset of the classifier's parents; slot k of
    // parent j is candidate row (voxnet parent row)*8 + k.
    CoordMap voxnet_parents(cls.parents, l);
    auto rows = std::make_shared<std::vector<int>>();
    rows->reserve(level.coords.size() * 8);
    for (const Vec3i& p : level.coords) {
      int r = voxnet_parents.row(p);
      if (r < 0) throw IntegrityError("output parent missing from candidate dilation");
      for (int k = 0; k < 8; ++k) rows->push_back(r * 8 + k);
    }
    NodePtr target_bits =
        reshape(t, gather_rows(t, cls.bits, rows), int(level.coords.size()), 8);
    SparseTensor input = make_level_input(level.coords, l, tree.levels[l - 1].coords,
                                          tree.levels[l - 1].occupancy);
    NodePtr finest = surrogate.level_coding_loss(t, input, target_bits, false);
    total = add(t, total, finest);
  }
  return total;
}

}  // namespace

JointStepStats joint_train_step(VoxNetModel& voxnet, const SurrogateModel& frozen_surrogate,
                                const std::vector<VoxelCloud>& batch, double lambda, Adam& opt) {
  if (lambda < 0) throw ContractViolation("joint_train_step: lambda must be >= 0");
  for (const NodePtr& p : frozen_surrogate.parameters())
    if (p->needs_grad)
      throw ContractViolation("joint_train_step: surrogate must be frozen (set_frozen)");
  Tape t;
  JointStepStats stats;
  NodePtr total;
  for (const VoxelCloud& scaled : batch) {
    ClassifiedChildren cls = voxnet.classify(t, scaled, true);
    NodePtr d = distortion_loss(t, cls, scaled);
    stats.distortion += d->value(0, 0);
    NodePtr item = d;

    VoxelCloud output;
    output.depth = scaled.depth;
    for (size_t i = 0; i < cls.candidates.size(); ++i)
      if (cls.bits->value(Eigen::Index(i), 0) >= 0.5) output.coords.push_back(cls.candidates[i]);
    stats.output_points += output.coords.size();
    if (output.coords.empty()) {
      ++stats.degenerate_clouds;
    } else if (lambda > 0) {
      NodePtr r = output_rate_nats(t, frozen_surrogate, cls, output);
      stats.rate_nats += r->value(0, 0);
      item = add(t, item, scale(t, r, lambda));
    }
    total = total ? add(t, total, item) : item;
  }
  if (!total) return stats;
  stats.loss = total->value(0, 0);
  if (!std::isfinite(stats.loss)) throw TrainingDiverged("joint_train_step: non-finite loss");
  t.backward(total);
  opt.step();
  return stats;
}

EditStats prune_region_report(const VoxelCloud& before, const VoxelCloud& after) {
  if (before.depth != after.depth)
    throw ContractViolation("prune_region_report: depth mismatch");
  EditStats stats;
  CoordMap in_before(before.coords, before.depth);
  CoordMap in_after(after.coords, after.depth);
  for (const Vec3i& c : after.coords)
    if (in_before.row(c) < 0) ++stats.added;
  for (const Vec3i& c : before.coords)
    if (in_after.row(c) < 0) ++stats.removed;

  std::vector<Vec3i> before_parents, after_parents;
  std::vector<uint8_t> occ;
  group_parents(before.coords, before_parents, occ);
  group_parents(after.coords, after_parents, occ);
  CoordMap after_parent_map(after_parents, after.depth - 1);
  for (const Vec3i& p : before_parents)
    if (after_parent_map.row(p) < 0) ++stats.pruned_parents;
  return stats;
}

UpsampleFlops compare_upsample_flops(const VoxNetModel& model, const VoxelCloud& scaled) {
  UpsampleFlops out;
  {
    Tape t;
    model.classify(t, scaled, false, UpsamplePlacement::BackLoaded);
    out.back_loaded = t.flops();
  }
  {
    Tape t;
    model.classify(t, scaled, false, UpsamplePlacement::MidNetwork);
    out.mid_network = t.flops();
  }
  return out;
}

}  // namespace pcvox::nn
