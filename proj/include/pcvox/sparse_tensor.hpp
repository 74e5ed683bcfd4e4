#pragma once

#include <memory>
#include <unordered_map>
#include <vector>

#include "pcvox/autodiff.hpp"
#include "pcvox/geometry.hpp"

namespace pcvox::nn {

// Voxel coordinates at some resolution, each carrying a feature row.
// coords are Morton-sorted and unique; features has one row per coord.
struct SparseTensor {
  int depth = 0;
  std::vector<Vec3i> coords;
  NodePtr features;

  int channels() const { return features ? int(features->value.cols()) : 0; }
  size_t size() const { return coords.size(); }
  void validate() const;
};

// Morton-code keyed coordinate -> row lookup.
class CoordMap {
public:
  CoordMap(const std::vector<Vec3i>& coords, int depth);
  // -1 when absent or out of the [0, 2^depth) box.
  int row(const Vec3i& c) const;

private:
  std::unordered_map<uint64_t, int> map_;
  int depth_;
  int32_t lim_;
};

// Row routing for one sparse convolution: per kernel offset, the
// (input row, output row) pairs that multiply against that offset's
// weight block. Offsets are enumerated x-major; for kernel size 2 with
// stride 2 the offset index equals the octree child index.
struct GatherPlan {
  int n_out = 0;
  long n_active_in = 0;
  std::vector<std::vector<std::pair<int, int>>> pairs;  // [offset] -> (in,out)
};

std::vector<Vec3i> kernel_offsets(int kernel);

// stride 1: output coords = input coords. stride 2 (kernel 2): output
// coords = unique parents, inputs gathered from their children.
GatherPlan build_conv_plan(const std::vector<Vec3i>& in_coords, int depth, int kernel, int stride,
                           std::vector<Vec3i>& out_coords, int& out_depth);

// Generative transposed convolution (kernel 2, stride 2): every parent
// emits all 8 children, Morton-ordered; child sets of distinct parents are
// disjoint.
GatherPlan build_transposed_plan(const std::vector<Vec3i>& parents, int parent_depth,
                                 std::vector<Vec3i>& children, int& child_depth);

// Applies gathered GEMMs per offset; weight is (#offsets * c_in) x c_out,
// bias 1 x c_out. Adds 2 * N_a * C_i * C_o to the tape's FLOPs ledger.
NodePtr apply_conv_plan(Tape& t, const NodePtr& features, const NodePtr& weight,
                        const NodePtr& bias, std::shared_ptr<const GatherPlan> plan, int c_in,
                        int c_out);

}  // namespace pcvox::nn
