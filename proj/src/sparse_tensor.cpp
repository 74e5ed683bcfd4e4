#include "pcvox/sparse_tensor.hpp"

namespace pcvox::nn {

void SparseTensor::validate() const {
  if (!features) throw ContractViolation("SparseTensor: features missing");
  if (size_t(features->value.rows()) != coords.size())
    throw ContractViolation("SparseTensor: feature rows do not match coordinate count");
  uint64_t prev = 0;
  for (size_t i = 0; i < coords.size(); ++i) {
    uint64_t code = morton_code(coords[i], depth);
    if (i > 0 && code <= prev)
      throw ContractViolation("SparseTensor: coords must be Morton-sorted and unique");
    prev = code;
  }
  if (!features->value.allFinite()) throw ContractViolation("SparseTensor: non-finite features");
}

CoordMap::CoordMap(const std::vector<Vec3i>& coords, int depth)
    : depth_(depth), lim_(int32_t(1) << depth) {
  map_.reserve(coords.size() * 2);
  for (size_t i = 0; i < coords.size(); ++i) map_.emplace(morton_code(coords[i], depth), int(i));
}

int CoordMap::row(const Vec3i& c) const {
  if (c.x < 0 || c.y < 0 || c.z < 0 || c.x >= lim_ || c.y >= lim_ || c.z >= lim_) return -1;
  auto it = map_.find(morton_code(c, depth_));
  return it == map_.end() ? -1 : it->second;
}

std::vector<Vec3i> kernel_offsets(int kernel) {
  std::vector<Vec3i> offsets;
  int lo, hi;
  switch (kernel) {
    case 1: lo = 0, hi = 0; break;
    case 2: lo = 0, hi = 1; break;
    case 3: lo = -1, hi = 1; break;
    default: throw ContractViolation("kernel size must be 1, 2 or 3");
  }
  for (int dx = lo; dx <= hi; ++dx)
    for (int dy = lo; dy <= hi; ++dy)
      for (int dz = lo; dz <= hi; ++dz) offsets.push_back({dx, dy, dz});
  return offsets;
}

GatherPlan build_conv_plan(const std::vector<Vec3i>& in_coords, int depth, int kernel, int stride,
                           std::vector<Vec3i>& out_coords, int& out_depth) {
  if (stride != 1 && stride != 2) throw ContractViolation("stride must be 1 or 2");
  if (stride == 2 && kernel != 2)
    throw ContractViolation("stride-2 convolution requires kernel size 2");
  const std::vector<Vec3i> offsets = kernel_offsets(kernel);
  GatherPlan plan;
  plan.n_active_in = long(in_coords.size());
  plan.pairs.resize(offsets.size());

  if (stride == 1) {
    out_coords = in_coords;
    out_depth = depth;
    CoordMap map(in_coords, depth);
    for (int o = 0; o < int(in_coords.size()); ++o)
      for (size_t k = 0; k < offsets.size(); ++k) {
        int in_row = map.row(in_coords[o] + offsets[k]);
        if (in_row >= 0) plan.pairs[k].push_back({in_row, o});
      }
  } else {
    // Children map to unique parents; offset index = child index.
    out_coords.clear();
    out_depth = depth - 1;
    for (int i = 0; i < int(in_coords.size()); ++i) {
      Vec3i parent = in_coords[i] >> 1;
      if (out_coords.empty() || !(out_coords.back() == parent)) out_coords.push_back(parent);
      plan.pairs[child_index(in_coords[i])].push_back({i, int(out_coords.size()) - 1});
    }
  }
  plan.n_out = int(out_coords.size());
  return plan;
}

GatherPlan build_transposed_plan(const std::vector<Vec3i>& parents, int parent_depth,
                                 std::vector<Vec3i>& children, int& child_depth) {
  GatherPlan plan;
  plan.n_active_in = long(parents.size());
  plan.pairs.resize(8);
  children.clear();
  children.reserve(parents.size() * 8);
  child_depth = parent_depth + 1;
  for (int p = 0; p < int(parents.size()); ++p)
    for (int idx = 0; idx < 8; ++idx) {
      plan.pairs[idx].push_back({p, int(children.size())});
      children.push_back(child_coord(parents[p], idx));
    }
  plan.n_out = int(children.size());
  return plan;
}

NodePtr apply_conv_plan(Tape& t, const NodePtr& features, const NodePtr& weight,
                        const NodePtr& bias, std::shared_ptr<const GatherPlan> plan, int c_in,
                        int c_out) {
  const int n_offsets = int(plan->pairs.size());
  if (features->value.cols() != c_in) throw ContractViolation("sparse conv: channel mismatch");
  if (weight->value.rows() != n_offsets * c_in || weight->value.cols() != c_out)
    throw ContractViolation("sparse conv: weight shape mismatch");
  if (bias->value.rows() != 1 || bias->value.cols() != c_out)
    throw ContractViolation("sparse conv: bias shape mismatch");

  Matrix out = Matrix::Zero(plan->n_out, c_out);
  out.rowwise() += bias->value.row(0);
  for (int k = 0; k < n_offsets; ++k) {
    const auto& pairs = plan->pairs[k];
    if (pairs.empty()) continue;
    Matrix gathered(pairs.size(), c_in);
    for (size_t i = 0; i < pairs.size(); ++i)
      gathered.row(Eigen::Index(i)) = features->value.row(pairs[i].first);
    Matrix partial = gathered * weight->value.middleRows(k * c_in, c_in);
    for (size_t i = 0; i < pairs.size(); ++i)
      out.row(pairs[i].second) += partial.row(Eigen::Index(i));
  }
  t.add_conv_flops(plan->n_active_in, c_in, c_out);

  NodePtr result = make_node(std::move(out));
  t.record([features, weight, bias, plan, result, c_in, c_out] {
    if (!result->has_grad()) return;
    const Matrix& gout = result->grad;
    if (bias->needs_grad) bias->accumulate(gout.colwise().sum());
    Matrix gw, gin;
    if (weight->needs_grad) gw = Matrix::Zero(weight->value.rows(), weight->value.cols());
    if (features->needs_grad) gin = Matrix::Zero(features->value.rows(), c_in);
    for (int k = 0; k < int(plan->pairs.size()); ++k) {
      const auto& pairs = plan->pairs[k];
      if (pairs.empty()) continue;
      Matrix gout_gathered(pairs.size(), c_out);
      for (size_t i = 0; i < pairs.size(); ++i)
        gout_gathered.row(Eigen::Index(i)) = gout.row(pairs[i].second);
      if (weight->needs_grad) {
        Matrix gathered(pairs.size(), c_in);
        for (size_t i = 0; i < pairs.size(); ++i)
          gathered.row(Eigen::Index(i)) = features->value.row(pairs[i].first);
        gw.middleRows(k * c_in, c_in) += gathered.transpose() * gout_gathered;
      }
      if (features->needs_grad) {
        Matrix gin_part = gout_gathered * weight->value.middleRows(k * c_in, c_in).transpose();
        for (size_t i = 0; i < pairs.size(); ++i)
          gin.row(pairs[i].first) += gin_part.row(Eigen::Index(i));
      }
    }
    if (weight->needs_grad) weight->accumulate(gw);
    if (features->needs_grad) features->accumulate(gin);
  });
  return result;
}

}  // namespace pcvox::nn
