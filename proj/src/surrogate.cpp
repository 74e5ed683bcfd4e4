#include "pcvox/surrogate.hpp"

#include <cmath>

namespace pcvox::nn {

SparseTensor make_level_input(const std::vector<Vec3i>& nodes, int level_bits,
                              const std::vector<Vec3i>& coarser_coords,
                              const std::vector<uint8_t>& coarser_occupancy) {
  if (level_bits < 1) throw ContractViolation("make_level_input: level must be >= 1");
  CoordMap coarser(coarser_coords, level_bits - 1);
  Matrix feats = Matrix::Zero(Eigen::Index(nodes.size()), kLevelInputChannels);
  for (size_t i = 0; i < nodes.size(); ++i) {
    feats(Eigen::Index(i), 0) = 1.0;
    int row = coarser.row(nodes[i] >> 1);
    if (row < 0) throw IntegrityError("make_level_input: node without parent");
    uint8_t occ = coarser_occupancy[row];
    for (int b = 0; b < 8; ++b) feats(Eigen::Index(i), 1 + b) = double((occ >> b) & 1);
  }
  SparseTensor st;
  st.depth = level_bits;
  st.coords = nodes;
  st.features = make_constant(std::move(feats));
  return st;
}

SurrogateModel::SurrogateModel(SurrogateConfig cfg) : cfg_(cfg) {
  if (cfg_.channels < 2 || cfg_.channels % 2 != 0)
    throw ConfigError("surrogate: channels must be even and >= 2");
  if (cfg_.extraction_blocks < 1 || cfg_.aggregation_blocks < 1)
    throw ConfigError("surrogate: block counts must be >= 1");
  if (cfg_.coarse_levels < 1 || cfg_.coarse_levels > 8)
    throw ConfigError("surrogate: coarse_levels must be in 1..8");
  std::mt19937_64 rng(cfg_.seed);
  const int c = cfg_.channels;
  for (int i = 0; i < cfg_.extraction_blocks; ++i)
    extraction_.push_back(ConvBlock(reg_, "fe.block" + std::to_string(i), 3, 1,
                                    i == 0 ? kLevelInputChannels : c, c, rng));
  if (cfg_.extraction_inception) inception_ = InceptionResNet(reg_, "fe.irn", c, rng);
  for (int i = 0; i < cfg_.aggregation_blocks; ++i)
    aggregation_.push_back(
        ConvBlock(reg_, "agg.block" + std::to_string(i), 3, 1, i == 0 ? c + 8 : c, c, rng));
  head_ = Conv(reg_, "agg.head", 1, 1, c, 1, rng);
}

namespace {
std::shared_ptr<const GatherPlan> stride1_plan(const std::vector<Vec3i>& coords, int depth) {
  std::vector<Vec3i> out_coords;
  int out_depth;
  return std::make_shared<const GatherPlan>(
      build_conv_plan(coords, depth, 3, 1, out_coords, out_depth));
}
}  // namespace

SparseTensor SurrogateModel::parent_features(Tape& t, const SparseTensor& level_input,
                                             bool training) const {
  auto plan = stride1_plan(level_input.coords, level_input.depth);
  SparseTensor x = level_input;
  for (const ConvBlock& block : extraction_) x = block.forward(t, x, training, plan);
  if (cfg_.extraction_inception) x = inception_.forward(t, x, training, plan);
  return x;
}

NodePtr SurrogateModel::predict_step(Tape& t, const SparseTensor& f_n, const NodePtr& decided,
                                     bool training) const {
  if (decided->value.rows() != Eigen::Index(f_n.size()) || decided->value.cols() != 8)
    throw ContractViolation("predict_step: decided bits must be parents x 8");
  auto plan = stride1_plan(f_n.coords, f_n.depth);
  SparseTensor x = f_n;
  x.features = concat_cols(t, f_n.features, decided);
  for (const ConvBlock& block : aggregation_) x = block.forward(t, x, training, plan);
  x = head_.forward(t, x);
  return sigmoid(t, x.features);
}

NodePtr SurrogateModel::level_coding_loss(Tape& t, const SparseTensor& level_input,
                                          const NodePtr& target_bits, bool training) const {
  const Eigen::Index n = Eigen::Index(level_input.size());
  if (target_bits->value.rows() != n || target_bits->value.cols() != 8)
    throw ContractViolation("level_coding_loss: target_bits must be parents x 8");
  SparseTensor f_n = parent_features(t, level_input, training);
  NodePtr total;
  for (int i = 0; i < 8; ++i) {
    NodePtr decided;
    NodePtr undecided = make_constant(Matrix::Constant(n, 8 - i, -1.0));
    if (i == 0)
      decided = undecided;
    else
      decided = concat_cols(t, slice_cols(t, target_bits, 0, i), undecided);
    NodePtr p_i = predict_step(t, f_n, decided, training);
    NodePtr loss_i = bce_sum(t, slice_cols(t, target_bits, i, 1), p_i);
    total = total ? add(t, total, loss_i) : loss_i;
  }
  return total;
}

ChildProbs SurrogateModel::predict_child_probs(const SparseTensor& level_input,
                                               const Matrix& target_bits) const {
  Tape t;
  const Eigen::Index n = Eigen::Index(level_input.size());
  SparseTensor f_n = parent_features(t, level_input, false);
  ChildProbs out;
  out.probs.resize(n, 8);
  for (int i = 0; i < 8; ++i) {
    Matrix decided = Matrix::Constant(n, 8, -1.0);
    decided.leftCols(i) = target_bits.leftCols(i);
    NodePtr p_i = predict_step(t, f_n, make_constant(std::move(decided)), false);
    out.probs.col(i) = p_i->value.col(0);
  }
  out.probs = out.probs.cwiseMax(kBceClamp).cwiseMin(1.0 - kBceClamp);
  return out;
}

namespace {

Matrix bytes_to_bits(const std::vector<uint8_t>& occ) {
  Matrix bits(Eigen::Index(occ.size()), 8);
  for (size_t i = 0; i < occ.size(); ++i)
    for (int b = 0; b < 8; ++b) bits(Eigen::Index(i), b) = double((occ[i] >> b) & 1);
  return bits;
}

}  // namespace

double SurrogateModel::pretrain_step(const std::vector<VoxelCloud>& batch, Adam& opt) {
  Tape t;
  NodePtr total;
  for (const VoxelCloud& vc : batch) {
    OctreeLevels tree = build_octree(vc);
    int start = bootstrap_levels(vc.depth);
    for (int l = start; l < vc.depth; ++l) {
      SparseTensor input = make_level_input(tree.levels[l].coords, l, tree.levels[l - 1].coords,
                                            tree.levels[l - 1].occupancy);
      NodePtr target = make_constant(bytes_to_bits(tree.levels[l].occupancy));
      NodePtr loss = level_coding_loss(t, input, target, true);
      total = total ? add(t, total, loss) : loss;
    }
  }
  if (!total) return 0.0;
  double value = total->value(0, 0);
  if (!std::isfinite(value)) throw TrainingDiverged("pretrain_step: non-finite loss");
  t.backward(total);
  opt.step();
  return value;
}

double SurrogateModel::estimate_rate_bits(const VoxelCloud& vc) const {
  OctreeLevels tree = build_octree(vc);
  int start = bootstrap_levels(vc.depth);
  double boot_bits = 0;
  for (int l = 0; l < start; ++l) boot_bits += 8.0 * double(tree.levels[l].coords.size());
  double nats = 0;
  for (int l = start; l < vc.depth; ++l) {
    SparseTensor input = make_level_input(tree.levels[l].coords, l, tree.levels[l - 1].coords,
                                          tree.levels[l - 1].occupancy);
    Matrix targets = bytes_to_bits(tree.levels[l].occupancy);
    ChildProbs probs = predict_child_probs(input, targets);
    for (Eigen::Index r = 0; r < targets.rows(); ++r)
      for (int i = 0; i < 8; ++i) nats += bce(targets(r, i), probs.probs(r, i));
  }
  return boot_bits + nats / std::log(2.0);
}

std::vector<NodePtr> SurrogateModel::parameters() const {
  std::vector<NodePtr> out;
  for (const auto& [name, node] : reg_.params) out.push_back(node);
  return out;
}

void SurrogateModel::set_frozen(bool frozen) {
  for (const auto& [name, node] : reg_.params) node->needs_grad = !frozen;
}

Checkpoint SurrogateModel::to_checkpoint() const {
  Checkpoint cp = Checkpoint::from_registry(reg_);
  Matrix meta(1, 5);
  meta << double(cfg_.channels), double(cfg_.extraction_blocks),
      double(cfg_.extraction_inception ? 1 : 0), double(cfg_.aggregation_blocks),
      double(cfg_.coarse_levels);
  cp.set("meta/arch", meta);
  return cp;
}

void SurrogateModel::load_checkpoint(const Checkpoint& cp) {
  const Matrix& meta = cp.require("meta/arch", 1, 5);
  if (int(meta(0, 0)) != cfg_.channels || int(meta(0, 1)) != cfg_.extraction_blocks ||
      (meta(0, 2) != 0) != cfg_.extraction_inception ||
      int(meta(0, 3)) != cfg_.aggregation_blocks || int(meta(0, 4)) != cfg_.coarse_levels)
    throw IntegrityError("surrogate checkpoint architecture mismatch");
  cp.into_registry(reg_);
}

SurrogateModel SurrogateModel::from_checkpoint(const Checkpoint& cp) {
  const Matrix& meta = cp.require("meta/arch", 1, 5);
  SurrogateConfig cfg;
  cfg.channels = int(meta(0, 0));
  cfg.extraction_blocks = int(meta(0, 1));
  cfg.extraction_inception = meta(0, 2) != 0;
  cfg.aggregation_blocks = int(meta(0, 3));
  cfg.coarse_levels = int(meta(0, 4));
  SurrogateModel model(cfg);
  model.load_checkpoint(cp);
  return model;
}

namespace {

// Context-scheme coding of the bootstrap levels, mirroring the baseline
// codec: root byte under a dedicated model, deeper bootstrap levels under
// neighbour-pattern contexts.
template <bool Encoding>
void code_bootstrap_levels(int n_levels, OctreeLevels& tree, RangeEncoder* enc, RangeDecoder* dec,
                           std::vector<Vec3i>& parents) {
  ContextTable ctx;
  AdaptiveBinModel root_model;
  parents = {{0, 0, 0}};
  for (int l = 0; l < n_levels; ++l) {
    std::vector<uint8_t> bytes(parents.size(), 0);
    for (size_t j = 0; j < parents.size(); ++j) {
      uint8_t occ = Encoding ? tree.levels[l].occupancy[j] : 0;
      uint8_t decoded = 0;
      for (int i = 0; i < 8; ++i) {
        AdaptiveBinModel* model = &root_model;
        if (l > 0) {
          NeighbourPattern pat = compute_neighbour_pattern(parents, l, parents[j], i, decoded);
          model = &ctx.models[context_index(pat)];
        }
        int bit;
        if constexpr (Encoding) {
          bit = (occ >> i) & 1;
          enc->encode_bit(*model, bit);
        } else {
          bit = dec->decode_bit(*model);
        }
        if (bit) decoded |= uint8_t(1u << i);
      }
      if (!Encoding && decoded == 0)
        throw IntegrityError("surrogate decode: empty occupancy byte in bootstrap level");
      bytes[j] = decoded;
    }
    if (!Encoding) {
      tree.levels[l].coords = parents;
      tree.levels[l].occupancy = bytes;
    }
    std::vector<Vec3i> children;
    for (size_t j = 0; j < parents.size(); ++j)
      for (int i = 0; i < 8; ++i)
        if (bytes[j] & (1u << i)) children.push_back(child_coord(parents[j], i));
    parents = std::move(children);
  }
}

}  // namespace

Bitstream surrogate_encode(const SurrogateModel& model, const VoxelCloud& vc, float scale,
                           SurrogateCodingStats* stats) {
  OctreeLevels tree = build_octree(vc);
  const int boot = model.bootstrap_levels(vc.depth);

  RangeEncoder enc;
  std::vector<Vec3i> parents;
  code_bootstrap_levels<true>(boot, tree, &enc, nullptr, parents);

  for (int l = boot; l < vc.depth; ++l) {
    const OctreeLevel& level = tree.levels[l];
    const Eigen::Index n = Eigen::Index(level.coords.size());
    Tape t;
    SparseTensor input = make_level_input(level.coords, l, tree.levels[l - 1].coords,
                                          tree.levels[l - 1].occupancy);
    SparseTensor f_n = model.parent_features(t, input, false);
    Matrix decided = Matrix::Constant(n, 8, -1.0);
    for (int i = 0; i < 8; ++i) {
      NodePtr p_i = model.predict_step(t, f_n, make_constant(decided), false);
      for (Eigen::Index j = 0; j < n; ++j) {
        uint16_t q = quantize_probability(p_i->value(j, 0));
        int bit = (level.occupancy[j] >> i) & 1;
        enc.encode_bit(q, bit);
        decided(j, i) = double(bit);
        if (stats) {
          stats->estimated_bits += estimate_bits(double(q) / 65536.0, bit);
          if (stats->trace_probs) stats->prob_trace.push_back(q);
        }
      }
    }
  }

  Bitstream bs;
  bs.header.codec_id = kCodecSurrogate;
  bs.header.depth = uint8_t(vc.depth);
  bs.header.scale = scale;
  bs.header.point_count = vc.coords.size();
  bs.header.checkpoint_hash = model.checkpoint_hash();
  bs.header.coarse_levels = uint8_t(boot);
  bs.payload = enc.finish();
  return bs;
}

VoxelCloud surrogate_decode(const SurrogateModel& model, const Bitstream& bs,
                            SurrogateCodingStats* stats) {
  if (bs.header.codec_id != kCodecSurrogate)
    throw IntegrityError("surrogate_decode: wrong codec id");
  if (bs.header.checkpoint_hash != model.checkpoint_hash())
    throw IntegrityError("surrogate_decode: checkpoint hash mismatch");
  const int depth = bs.header.depth;
  if (depth < 1 || depth > 16) throw IntegrityError("surrogate_decode: invalid depth");
  const int boot = bs.header.coarse_levels;
  if (boot != model.bootstrap_levels(depth))
    throw IntegrityError("surrogate_decode: bootstrap level count mismatch");

  OctreeLevels tree;
  tree.depth = depth;
  tree.levels.resize(depth);
  RangeDecoder dec(bs.payload);
  std::vector<Vec3i> parents;
  code_bootstrap_levels<false>(boot, tree, nullptr, &dec, parents);

  for (int l = boot; l < depth; ++l) {
    const Eigen::Index n = Eigen::Index(parents.size());
    Tape t;
    SparseTensor input = make_level_input(parents, l, tree.levels[l - 1].coords,
                                          tree.levels[l - 1].occupancy);
    SparseTensor f_n = model.parent_features(t, input, false);
    Matrix decided = Matrix::Constant(n, 8, -1.0);
    std::vector<uint8_t> bytes(parents.size(), 0);
    for (int i = 0; i < 8; ++i) {
      NodePtr p_i = model.predict_step(t, f_n, make_constant(decided), false);
      for (Eigen::Index j = 0; j < n; ++j) {
        uint16_t q = quantize_probability(p_i->value(j, 0));
        int bit = dec.decode_bit(q);
        decided(j, i) = double(bit);
        if (bit) bytes[size_t(j)] |= uint8_t(1u << i);
        if (stats) {
          stats->estimated_bits += estimate_bits(double(q) / 65536.0, bit);
          if (stats->trace_probs) stats->prob_trace.push_back(q);
        }
      }
    }
    for (uint8_t b : bytes)
      if (b == 0) throw IntegrityError("surrogate decode produced an empty occupancy byte");
    tree.levels[l].coords = parents;
    tree.levels[l].occupancy = bytes;
    std::vector<Vec3i> children;
    for (size_t j = 0; j < parents.size(); ++j)
      for (int i = 0; i < 8; ++i)
        if (bytes[j] & (1u << i)) children.push_back(child_coord(parents[j], i));
    parents = std::move(children);
  }

  VoxelCloud vc = flatten_octree(tree);
  if (vc.coords.size() != bs.header.point_count)
    throw IntegrityError("surrogate_decode: decoded point count does not match header");
  return vc;
}

}  // namespace pcvox::nn
