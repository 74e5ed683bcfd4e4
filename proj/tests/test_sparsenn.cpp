#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "doctest.h"
#include "pcvox/checkpoint.hpp"
#include "pcvox/layers.hpp"
#include "pcvox/optim.hpp"

using namespace pcvox;
using namespace pcvox::nn;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

std::vector<Vec3i> random_coords(int depth, int count, std::mt19937_64& rng) {
  std::uniform_int_distribution<int32_t> d(0, (1 << depth) - 1);
  std::vector<Vec3i> coords;
  for (int i = 0; i < count; ++i) coords.push_back({d(rng), d(rng), d(rng)});
  morton_sort_unique(coords, depth);
  return coords;
}

// Central finite differences against the analytic gradients of `params`,
// starting at h = 1e-3 per the gradient contract. A probe that misses the
// tolerance is re-run at smaller h: truncation error and ReLU-kink
// crossings vanish under refinement, genuine gradient bugs do not.
void check_gradients(const std::function<NodePtr(Tape&)>& build,
                     const std::vector<NodePtr>& params, double tol = 1e-4) {
  for (const NodePtr& p : params) p->grad.resize(0, 0);
  Tape t;
  NodePtr loss = build(t);
  t.backward(loss);
  std::vector<Matrix> analytic;
  for (const NodePtr& p : params)
    analytic.push_back(p->has_grad() ? p->grad : Matrix::Zero(p->value.rows(), p->value.cols()));

  for (size_t pi = 0; pi < params.size(); ++pi) {
    Node& p = *params[pi];
    for (Eigen::Index r = 0; r < p.value.rows(); ++r)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
        double got = analytic[pi](r, c);
        double rel = 0;
        for (double h : {1e-3, 1e-4, 1e-5}) {
          double saved = p.value(r, c);
          p.value(r, c) = saved + h;
          Tape tp;
          double lp = build(tp)->value(0, 0);
          p.value(r, c) = saved - h;
          Tape tm;
          double lm = build(tm)->value(0, 0);
          p.value(r, c) = saved;
          double fd = (lp - lm) / (2 * h);
          double denom = std::max({std::abs(fd), std::abs(got), 1e-6});
          rel = std::abs(fd - got) / denom;
          if (std::abs(fd) < 1e-9 && std::abs(got) < 1e-9) rel = 0;
          if (rel < tol) break;
        }
        REQUIRE(rel < tol);
      }
    p.zero_grad();
  }
}

}  // namespace

TEST_CASE("elementwise op values") {
  Tape t;
  Matrix v(1, 3);
  v << -1.0, 0.0, 2.0;
  NodePtr x = make_node(v);
  NodePtr r = relu(t, x);
  CHECK(r->value(0, 0) == 0.0);
  CHECK(r->value(0, 2) == 2.0);
  NodePtr s = sigmoid(t, make_node(Matrix::Zero(1, 1)));
  CHECK(s->value(0, 0) == doctest::Approx(0.5));
}

TEST_CASE("ste_round forward boundary") {
  Tape t;
  Matrix v(1, 4);
  v << 0.5, 0.49, 0.51, 0.0;
  NodePtr out = ste_round(t, make_node(v));
  CHECK(out->value(0, 0) == 1.0);  // boundary is inclusive
  CHECK(out->value(0, 1) == 0.0);
  CHECK(out->value(0, 2) == 1.0);
  CHECK(out->value(0, 3) == 0.0);
}

TEST_CASE("ste_round backward is the identity on incoming gradients") {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    NodePtr x = make_node(random_matrix(5, 3, rng, 0.05, 0.95));
    NodePtr w = make_node(random_matrix(3, 2, rng));

    // dL/dx must equal dL/ds evaluated at s = ste(x), where s is treated
    // as a free input (identity Jacobian through the rounding).
    Tape t;
    NodePtr s = ste_round(t, x);
    NodePtr loss = sum_all(t, sigmoid(t, matmul(t, s, w)));
    t.backward(loss);
    Matrix got = x->grad;

    NodePtr s_free = make_node(Matrix((x->value.array() >= 0.5).cast<double>()));
    auto loss_of_s = [&](Tape& tt) {
      return sum_all(tt, sigmoid(tt, matmul(tt, s_free, w)));
    };
    check_gradients(loss_of_s, {s_free});
    Tape t2;
    NodePtr l2 = loss_of_s(t2);
    t2.backward(l2);
    for (Eigen::Index r = 0; r < got.rows(); ++r)
      for (Eigen::Index c = 0; c < got.cols(); ++c)
        REQUIRE(got(r, c) == doctest::Approx(s_free->grad(r, c)).epsilon(1e-12));
    x->zero_grad();
    w->zero_grad();
    s_free->zero_grad();
  }
}

TEST_CASE("bce values and gradient") {
  CHECK(bce(1.0, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(bce(0.0, 0.9) == doctest::Approx(-std::log(0.1)).epsilon(1e-9));
  CHECK(bce(0.0, 0.9) == doctest::Approx(2.302585).epsilon(1e-5));

  Tape t;
  NodePtr p = make_node(Matrix::Constant(1, 1, 0.5));
  NodePtr b = make_constant(Matrix::Constant(1, 1, 1.0));
  NodePtr loss = bce_sum(t, b, p);
  t.backward(loss);
  CHECK(p->grad(0, 0) == doctest::Approx(-2.0).epsilon(1e-9));

  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    NodePtr probs = make_node(random_matrix(4, 2, rng, 0.05, 0.95));
    NodePtr targets = make_node(random_matrix(4, 2, rng, 0.0, 1.0));
    check_gradients([&](Tape& tt) { return bce_sum(tt, targets, probs); }, {probs, targets});
  }
}

TEST_CASE("elementwise and structural gradients match finite differences") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    NodePtr a = make_node(random_matrix(4, 3, rng, 0.1, 2.0));
    NodePtr b = make_node(random_matrix(4, 3, rng, 0.1, 2.0));
    NodePtr w = make_node(random_matrix(6, 2, rng));
    NodePtr bias = make_node(random_matrix(1, 2, rng));
    auto rows = std::make_shared<std::vector<int>>(std::vector<int>{2, 0, 3, 1, 2});
    auto build = [&](Tape& t) {
      NodePtr cat = concat_cols(t, relu(t, mul(t, a, b)), sigmoid(t, b));  // 4x6
      NodePtr g = gather_rows(t, cat, rows);                        // 5x6
      NodePtr mm = add_row_bias(t, matmul(t, g, w), bias);          // 5x2
      NodePtr sl = slice_cols(t, reshape(t, mm, 2, 5), 1, 3);       // 2x3
      return sum_all(t, sigmoid(t, scale(t, add(t, sl, slice_cols(t, reshape(t, mm, 2, 5), 0, 3)),
                                         0.7)));
    };
    check_gradients(build, {a, b, w, bias});
  }
}

TEST_CASE("sparse conv matches dense conv on a full grid") {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 3; ++rep) {
    const int n = 4, cin = 2, cout = 3;
    std::vector<Vec3i> coords;
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) coords.push_back({x, y, z});
    morton_sort_unique(coords, 2);
    ParamRegistry reg;
    Conv conv(reg, "c", 3, 1, cin, cout, rng);
    SparseTensor in{2, coords, make_node(random_matrix(int(coords.size()), cin, rng))};
    Tape t;
    SparseTensor out = conv.forward(t, in);

    // Dense oracle: zero padding outside the grid; offsets x-major.
    CoordMap map(coords, 2);
    std::vector<Vec3i> offsets = kernel_offsets(3);
    for (size_t o = 0; o < coords.size(); ++o)
      for (int co = 0; co < cout; ++co) {
        double want = conv.bias()->value(0, co);
        for (size_t k = 0; k < offsets.size(); ++k) {
          int row = map.row(coords[o] + offsets[k]);
          if (row < 0) continue;
          for (int ci = 0; ci < cin; ++ci)
            want += in.features->value(row, ci) *
                    conv.weight()->value(Eigen::Index(k) * cin + ci, co);
        }
        REQUIRE(out.features->value(Eigen::Index(o), co) == doctest::Approx(want).epsilon(1e-12));
      }
  }
}

TEST_CASE("identity-center kernel reproduces single-voxel features") {
  std::mt19937_64 rng(17);
  ParamRegistry reg;
  Conv conv(reg, "c", 3, 1, 3, 3, rng);
  conv.weight()->value.setZero();
  conv.bias()->value.setZero();
  // Center offset (0,0,0) is index 13 in x-major order.
  for (int c = 0; c < 3; ++c) conv.weight()->value(13 * 3 + c, c) = 1.0;
  SparseTensor in{4, {{5, 9, 2}}, make_node(random_matrix(1, 3, rng))};
  Tape t;
  SparseTensor out = conv.forward(t, in);
  CHECK(out.coords == in.coords);
  for (int c = 0; c < 3; ++c)
    CHECK(out.features->value(0, c) == doctest::Approx(in.features->value(0, c)));
}

TEST_CASE("stride-2 conv merges children into parents") {
  std::mt19937_64 rng(19);
  ParamRegistry reg;
  Conv conv(reg, "c", 2, 2, 2, 4, rng);
  std::vector<Vec3i> cube;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) cube.push_back({x, y, z});
  morton_sort_unique(cube, 1);
  SparseTensor in{1, cube, make_node(random_matrix(8, 2, rng))};
  Tape t;
  SparseTensor out = conv.forward(t, in);
  REQUIRE(out.coords.size() == 1);
  CHECK(out.coords[0] == Vec3i{0, 0, 0});
  CHECK(out.depth == 0);
}

TEST_CASE("transposed conv dilates each parent into 8 disjoint children") {
  std::mt19937_64 rng(23);
  ParamRegistry reg;
  Conv up(reg, "up", 2, 2, 3, 2, rng);
  SparseTensor one{3, {{4, 2, 7}}, make_node(random_matrix(1, 3, rng))};
  Tape t;
  SparseTensor children = up.forward_transposed(t, one);
  REQUIRE(children.coords.size() == 8);
  CHECK(children.depth == 4);
  for (int i = 0; i < 8; ++i) CHECK(children.coords[i] == child_coord({4, 2, 7}, i));

  std::vector<Vec3i> parents = random_coords(4, 40, rng);
  SparseTensor many{4, parents, make_node(random_matrix(int(parents.size()), 3, rng))};
  Tape t2;
  SparseTensor out = up.forward_transposed(t2, many);
  CHECK(out.coords.size() == parents.size() * 8);
  std::set<uint64_t> unique_children;
  for (const Vec3i& c : out.coords) unique_children.insert(morton_code(c, 5));
  CHECK(unique_children.size() == out.coords.size());
}

TEST_CASE("conv gradients match finite differences") {
  std::mt19937_64 rng(29);
  for (int rep = 0; rep < 20; ++rep) {
    ParamRegistry reg;
    int cin = 2, cout = 2;
    Conv conv(reg, "c", 3, 1, cin, cout, rng);
    std::vector<Vec3i> coords = random_coords(3, 6 + int(rng() % 6), rng);
    NodePtr feats = make_node(random_matrix(int(coords.size()), cin, rng));
    auto build = [&](Tape& t) {
      SparseTensor in{3, coords, feats};
      SparseTensor out = conv.forward(t, in);
      return sum_all(t, sigmoid(t, out.features));
    };
    check_gradients(build, {feats, conv.weight(), conv.bias()});
  }
}

TEST_CASE("transposed conv gradients match finite differences") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    ParamRegistry reg;
    Conv up(reg, "up", 2, 2, 2, 2, rng);
    std::vector<Vec3i> coords = random_coords(3, 4 + int(rng() % 4), rng);
    NodePtr feats = make_node(random_matrix(int(coords.size()), 2, rng));
    auto build = [&](Tape& t) {
      SparseTensor in{3, coords, feats};
      SparseTensor out = up.forward_transposed(t, in);
      return sum_all(t, sigmoid(t, out.features));
    };
    check_gradients(build, {feats, up.weight(), up.bias()});
  }
}

TEST_CASE("batch norm statistics and gradients") {
  std::mt19937_64 rng(37);
  ParamRegistry reg;
  BatchNorm bn(reg, "bn", 3);
  NodePtr x = make_node(random_matrix(64, 3, rng, -3.0, 5.0));
  Tape t;
  NodePtr y = bn.forward(t, x, true);  // gamma=1, beta=0 at init: pre-affine output
  for (int c = 0; c < 3; ++c) {
    double mean = y->value.col(c).mean();
    double var = (y->value.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(var - 1.0) < 1e-4);
  }

  for (int rep = 0; rep < 20; ++rep) {
    ParamRegistry reg2;
    BatchNorm bn2(reg2, "bn", 2);
    {
      Tape warmup;  // one training pass moves the running buffers off init
      bn2.forward(warmup, make_node(random_matrix(8, 2, rng)), true);
    }
    NodePtr xin = make_node(random_matrix(7, 2, rng));
    NodePtr gamma = reg2.params[0].second, beta = reg2.params[1].second;
    gamma->value = random_matrix(1, 2, rng, 0.5, 2.0);
    beta->value = random_matrix(1, 2, rng);
    bool training = rep % 2 == 0;
    auto build = [&](Tape& t2) {
      return sum_all(t2, sigmoid(t2, bn2.forward(t2, xin, training)));
    };
    if (training) {
      // Batch statistics drift the running buffers; gradients are checked
      // against the batch-stat path, which is evaluation-order invariant.
      check_gradients(build, {xin, gamma, beta});
    } else {
      check_gradients(build, {xin, gamma, beta});
    }
  }
}

TEST_CASE("inception residual block gradients") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 5; ++rep) {
    ParamRegistry reg;
    InceptionResNet irn(reg, "irn", 4, rng);
    std::vector<Vec3i> coords = random_coords(3, 6, rng);
    NodePtr feats = make_node(random_matrix(int(coords.size()), 4, rng));
    auto build = [&](Tape& t) {
      SparseTensor in{3, coords, feats};
      SparseTensor out = irn.forward(t, in, true);
      return sum_all(t, sigmoid(t, out.features));
    };
    std::vector<NodePtr> params = {feats};
    for (const auto& [name, p] : reg.params) params.push_back(p);
    check_gradients(build, params);
  }
}

TEST_CASE("two-layer network end-to-end gradient check") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 3; ++rep) {
    ParamRegistry reg;
    ConvBlock b1(reg, "b1", 3, 1, 2, 3, rng);
    Conv b2(reg, "b2", 1, 1, 3, 1, rng);
    std::vector<Vec3i> coords = random_coords(3, 8, rng);
    NodePtr feats = make_node(random_matrix(int(coords.size()), 2, rng));
    Matrix targets = random_matrix(int(coords.size()), 1, rng, 0.0, 1.0);
    auto build = [&](Tape& t) {
      SparseTensor in{3, coords, feats};
      SparseTensor h = b1.forward(t, in, true);
      SparseTensor logits = b2.forward(t, h);
      return bce_sum(t, make_constant(targets), sigmoid(t, logits.features));
    };
    std::vector<NodePtr> params = {feats};
    for (const auto& [name, p] : reg.params) params.push_back(p);
    check_gradients(build, params);
  }
}

TEST_CASE("adam converges on a quadratic and ignores zero gradients") {
  NodePtr p = make_node(Matrix::Zero(1, 4));
  Matrix target(1, 4);
  target << 1.0, -2.0, 0.5, 3.0;
  Adam opt({p}, {.lr = 0.1});
  for (int i = 0; i < 200; ++i) {
    Tape t;
    NodePtr diff = add(t, p, make_constant(-target));
    NodePtr loss = sum_all(t, mul(t, diff, diff));
    t.backward(loss);
    opt.step();
  }
  for (int c = 0; c < 4; ++c) CHECK(p->value(0, c) == doctest::Approx(target(0, c)).epsilon(1e-2));

  NodePtr q = make_node(Matrix::Constant(1, 3, 1.5));
  Adam opt2({q}, {.lr = 0.1});
  opt2.step();  // no accumulated gradient
  for (int c = 0; c < 3; ++c) CHECK(q->value(0, c) == 1.5);

  NodePtr r = make_node(Matrix::Constant(1, 1, 1.0));
  Adam opt3({r}, {});
  r->accumulate(Matrix::Constant(1, 1, std::nan("")));
  CHECK_THROWS_AS(opt3.step(), TrainingDiverged);
}

TEST_CASE("flops ledger follows the conv size formula") {
  CHECK(conv_flops(1000, 32, 64) == 4096000);
  std::mt19937_64 rng(47);
  ParamRegistry reg;
  Conv c1(reg, "c1", 3, 1, 4, 4, rng);
  Conv c2(reg, "c2", 3, 1, 4, 4, rng);
  std::vector<Vec3i> coords = random_coords(4, 100, rng);
  SparseTensor in{4, coords, make_node(random_matrix(int(coords.size()), 4, rng))};

  Tape t1;
  c1.forward(t1, in);
  long single = t1.flops();
  CHECK(single == conv_flops(long(coords.size()), 4, 4));

  Tape t2;
  SparseTensor mid = c1.forward(t2, in);
  c2.forward(t2, mid);
  CHECK(t2.flops() == 2 * single);  // stride 1 keeps N_a constant
  CHECK(count_flops(t2) == t2.flops());

  // Linear in the number of active coordinates.
  if (coords.size() % 2) coords.pop_back();
  long n_even = long(coords.size());
  SparseTensor in_even{4, coords, make_node(random_matrix(int(n_even), 4, rng))};
  Tape t_even;
  c1.forward(t_even, in_even);
  std::vector<Vec3i> half(coords.begin(), coords.begin() + n_even / 2);
  SparseTensor in_half{4, half, make_node(random_matrix(int(n_even / 2), 4, rng))};
  Tape t3;
  c1.forward(t3, in_half);
  CHECK(t3.flops() * 2 == t_even.flops());
}

TEST_CASE("checkpoint round trip and hashing") {
  std::mt19937_64 rng(53);
  ParamRegistry reg;
  ConvBlock block(reg, "b", 3, 1, 2, 4, rng);
  Checkpoint cp = Checkpoint::from_registry(reg);
  std::vector<uint8_t> bytes = cp.serialize();
  Checkpoint back = Checkpoint::deserialize(bytes);
  CHECK(back.tensors.size() == cp.tensors.size());
  CHECK(back.hash() == cp.hash());

  // float32 storage: one round trip settles the values bit-exactly
  Checkpoint twice = Checkpoint::deserialize(back.serialize());
  CHECK(twice.serialize() == back.serialize());

  bytes[7] ^= 0xFF;
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes), IntegrityError);

  const char* path = "test_sparsenn_ckpt.pvnn";
  cp.save(path);
  Checkpoint loaded = Checkpoint::load(path);
  CHECK(loaded.hash() == cp.hash());
  std::remove(path);
}
