// Acceptance suite: one line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "pcvox/dataset.hpp"
#include "pcvox/report.hpp"
#include "pcvox/training.hpp"

using namespace pcvox;
using namespace pcvox::nn;
namespace fs = std::filesystem;

namespace {

struct Criterion {
  int id;
  const char* title;
  std::function<bool(std::string&)> run;
};

VoxelCloud random_cloud(int depth, int count, std::mt19937_64& rng) {
  std::uniform_int_distribution<int32_t> d(0, (1 << depth) - 1);
  VoxelCloud vc;
  vc.depth = depth;
  for (int i = 0; i < count; ++i) vc.coords.push_back({d(rng), d(rng), d(rng)});
  morton_sort_unique(vc.coords, depth);
  return vc;
}

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

std::vector<Vec3i> random_coords(int depth, int count, std::mt19937_64& rng) {
  return random_cloud(depth, count, rng).coords;
}

DatasetSpec surfaces_spec(int depth, int spheres, int tori, int quadrics, int boxes,
                          double size_lo, double size_hi, double density = 3.0) {
  DatasetSpec spec;
  spec.depth = depth;
  spec.shapes = {{ShapeFamily::Sphere, spheres, density, size_lo, size_hi},
                 {ShapeFamily::Torus, tori, density, size_lo, size_hi},
                 {ShapeFamily::Superquadric, quadrics, density, size_lo, size_hi},
                 {ShapeFamily::BoxUnion, boxes, density, size_lo * 0.7, size_hi * 0.7}};
  return spec;
}

// ---------- criterion 1 ----------
bool octree_lossless(std::string& detail) {
  std::mt19937_64 rng(1001);
  for (int rep = 0; rep < 1000; ++rep) {
    int depth = 2 + int(rng() % 5);
    int count = 1 + int(rng() % 500);
    VoxelCloud vc = random_cloud(depth, count, rng);
    VoxelCloud back = octree_decode(octree_encode(vc));
    if (!(back.coords == vc.coords)) {
      detail = "fuzz round-trip failure at rep " + std::to_string(rep);
      return false;
    }
  }
  std::vector<VoxelCloud> surfaces = synth_dataset(surfaces_spec(8, 5, 5, 5, 5, 10, 24), 77);
  double bpp_sum = 0;
  for (size_t i = 0; i < surfaces.size(); ++i) {
    Bitstream bs = octree_encode(surfaces[i]);
    VoxelCloud back = octree_decode(bs);
    if (!(back.coords == surfaces[i].coords)) {
      detail = "surface round-trip failure at cloud " + std::to_string(i);
      return false;
    }
    bpp_sum += bits_per_point(bs, surfaces[i].coords.size());
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "1000 fuzz + %zu surfaces bit-exact, mean surface bpp %.3f",
                surfaces.size(), bpp_sum / double(surfaces.size()));
  detail = buf;
  return true;
}

// ---------- criterion 2 ----------
bool surrogate_lossless(std::string& detail) {
  SurrogateConfig cfg;
  cfg.channels = 8;
  cfg.extraction_blocks = 1;
  cfg.extraction_inception = false;
  cfg.aggregation_blocks = 1;
  cfg.seed = 2002;
  SurrogateModel model(cfg);

  std::mt19937_64 rng(2002);
  for (int rep = 0; rep < 200; ++rep) {
    int depth = 2 + int(rng() % 5);
    VoxelCloud vc = random_cloud(depth, 1 + int(rng() % 400), rng);
    Bitstream bs = surrogate_encode(model, vc);
    VoxelCloud back = surrogate_decode(model, bs);
    if (!(back.coords == vc.coords)) {
      detail = "fuzz round-trip failure at rep " + std::to_string(rep);
      return false;
    }
  }
  VoxelCloud vc = random_cloud(5, 200, rng);
  Bitstream bs = surrogate_encode(model, vc);
  Bitstream tampered = bs;
  tampered.header.checkpoint_hash ^= 0xF00D;
  try {
    surrogate_decode(model, tampered);
    detail = "tampered checkpoint hash was not rejected";
    return false;
  } catch (const IntegrityError&) {
  }
  detail = "200 fuzz clouds bit-exact; corrupted checkpoint hash rejected before decode";
  return true;
}

// ---------- criterion 3 ----------
struct FdCheck {
  std::string op;
  std::function<void(std::mt19937_64&)> instance;  // throws on failure
};

void fd_compare(const std::function<NodePtr(Tape&)>& build, const std::vector<NodePtr>& params,
                const char* what) {
  for (const NodePtr& p : params) p->zero_grad();
  Tape t;
  NodePtr loss = build(t);
  t.backward(loss);
  std::vector<Matrix> analytic;
  for (const NodePtr& p : params)
    analytic.push_back(p->has_grad() ? p->grad : Matrix::Zero(p->value.rows(), p->value.cols()));
  // h starts at 1e-3; probes blocked by truncation error or a ReLU kink
  // are refined, which genuine gradient bugs do not survive.
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
          rel = std::abs(fd - got) / std::max({std::abs(fd), std::abs(got), 1e-6});
          if (std::abs(fd) < 1e-9 && std::abs(got) < 1e-9) rel = 0;
          if (rel < 1e-4) break;
        }
        if (rel >= 1e-4)
          throw std::runtime_error(std::string(what) + ": rel err " + std::to_string(rel));
      }
    p.zero_grad();
  }
}

bool gradient_correctness(std::string& detail) {
  std::mt19937_64 rng(3003);
  int total = 0;
  auto run20 = [&](const char* what, const std::function<void(std::mt19937_64&)>& one) {
    for (int i = 0; i < 20; ++i) one(rng);
    total += 20;
  };

  try {
    run20("relu+sigmoid+scale+add+mul", [&](std::mt19937_64& g) {
      NodePtr a = make_node(random_matrix(3, 4, g, 0.1, 2.0));
      NodePtr b = make_node(random_matrix(3, 4, g, 0.1, 2.0));
      fd_compare(
          [&](Tape& t) {
            return sum_all(t, sigmoid(t, scale(t, add(t, relu(t, a), mul(t, a, b)), 0.6)));
          },
          {a, b}, "elementwise");
    });
    run20("concat+slice+reshape+gather", [&](std::mt19937_64& g) {
      NodePtr a = make_node(random_matrix(4, 2, g));
      NodePtr b = make_node(random_matrix(4, 2, g));
      auto rows = std::make_shared<std::vector<int>>(std::vector<int>{3, 1, 1, 0});
      fd_compare(
          [&](Tape& t) {
            NodePtr cat = concat_cols(t, a, b);
            NodePtr gathered = gather_rows(t, cat, rows);
            NodePtr shaped = reshape(t, gathered, 2, 8);
            return sum_all(t, sigmoid(t, slice_cols(t, shaped, 2, 5)));
          },
          {a, b}, "structural");
    });
    run20("matmul+bias+bce", [&](std::mt19937_64& g) {
      NodePtr x = make_node(random_matrix(5, 3, g));
      NodePtr w = make_node(random_matrix(3, 2, g));
      NodePtr bias = make_node(random_matrix(1, 2, g));
      NodePtr targets = make_node(random_matrix(5, 2, g, 0.0, 1.0));
      fd_compare(
          [&](Tape& t) {
            NodePtr p = sigmoid(t, add_row_bias(t, matmul(t, x, w), bias));
            return bce_sum(t, targets, p);
          },
          {x, w, bias, targets}, "dense path");
    });
    run20("sparse conv stride 1", [&](std::mt19937_64& g) {
      ParamRegistry reg;
      Conv conv(reg, "c", 3, 1, 2, 2, g);
      std::vector<Vec3i> coords = random_coords(3, 5 + int(g() % 5), g);
      NodePtr feats = make_node(random_matrix(int(coords.size()), 2, g));
      fd_compare(
          [&](Tape& t) {
            SparseTensor in{3, coords, feats};
            return sum_all(t, sigmoid(t, conv.forward(t, in).features));
          },
          {feats, conv.weight(), conv.bias()}, "conv s1");
    });
    run20("sparse conv stride 2", [&](std::mt19937_64& g) {
      ParamRegistry reg;
      Conv conv(reg, "c", 2, 2, 2, 2, g);
      std::vector<Vec3i> coords = random_coords(3, 6 + int(g() % 6), g);
      NodePtr feats = make_node(random_matrix(int(coords.size()), 2, g));
      fd_compare(
          [&](Tape& t) {
            SparseTensor in{3, coords, feats};
            return sum_all(t, sigmoid(t, conv.forward(t, in).features));
          },
          {feats, conv.weight(), conv.bias()}, "conv s2");
    });
    run20("transposed conv", [&](std::mt19937_64& g) {
      ParamRegistry reg;
      Conv up(reg, "u", 2, 2, 2, 2, g);
      std::vector<Vec3i> coords = random_coords(3, 4 + int(g() % 4), g);
      NodePtr feats = make_node(random_matrix(int(coords.size()), 2, g));
      fd_compare(
          [&](Tape& t) {
            SparseTensor in{3, coords, feats};
            return sum_all(t, sigmoid(t, up.forward_transposed(t, in).features));
          },
          {feats, up.weight(), up.bias()}, "transposed");
    });
    run20("batch norm train+eval", [&](std::mt19937_64& g) {
      ParamRegistry reg;
      BatchNorm bn(reg, "bn", 2);
      NodePtr x = make_node(random_matrix(6, 2, g));
      {
        Tape warm;
        bn.forward(warm, make_node(random_matrix(8, 2, g)), true);
      }
      NodePtr gamma = reg.params[0].second, beta = reg.params[1].second;
      gamma->value = random_matrix(1, 2, g, 0.5, 2.0);
      beta->value = random_matrix(1, 2, g);
      bool training = g() & 1;
      fd_compare(
          [&](Tape& t) { return sum_all(t, sigmoid(t, bn.forward(t, x, training))); },
          {x, gamma, beta}, "batch norm");
    });
    run20("inception residual", [&](std::mt19937_64& g) {
      ParamRegistry reg;
      InceptionResNet irn(reg, "irn", 4, g);
      std::vector<Vec3i> coords = random_coords(3, 5, g);
      NodePtr feats = make_node(random_matrix(int(coords.size()), 4, g));
      std::vector<NodePtr> params = {feats};
      for (const auto& [name, p] : reg.params) params.push_back(p);
      fd_compare(
          [&](Tape& t) {
            SparseTensor in{3, coords, feats};
            return sum_all(t, sigmoid(t, irn.forward(t, in, true).features));
          },
          params, "inception");
    });
    // STERound: identity backward through a composite loss.
    run20("ste identity", [&](std::mt19937_64& g) {
      NodePtr x = make_node(random_matrix(4, 3, g, 0.05, 0.95));
      NodePtr w = make_node(random_matrix(3, 2, g));
      Tape t;
      NodePtr loss = sum_all(t, sigmoid(t, matmul(t, ste_round(t, x), w)));
      t.backward(loss);
      Matrix got = x->grad;
      NodePtr s = make_node(Matrix((x->value.array() >= 0.5).cast<double>()));
      Tape t2;
      NodePtr l2 = sum_all(t2, sigmoid(t2, matmul(t2, s, w)));
      t2.backward(l2);
      if ((got - s->grad).cwiseAbs().maxCoeff() > 1e-12)
        throw std::runtime_error("ste backward is not the identity");
      x->zero_grad();
      w->zero_grad();
    });
  } catch (const std::exception& e) {
    detail = e.what();
    return false;
  }
  detail = std::to_string(total) + " randomized instances, all within 1e-4 of central FD";
  return true;
}

// ---------- criteria 4 and 5 share trained models ----------
struct TrainedModels {
  std::unique_ptr<SurrogateModel> surrogate;
  std::unique_ptr<VoxNetModel> voxnet_lo, voxnet_hi;
  std::vector<VoxelCloud> train_clouds, heldout_clouds;
  double lambda_lo = 0.5, lambda_hi = 4.0;
};

TrainedModels g_models;

bool surrogate_entropy_gain(std::string& detail) {
  // 200 training clouds and 20 held out, all 8-bit geometry.
  std::vector<VoxelCloud> all = synth_dataset(surfaces_spec(8, 55, 55, 55, 55, 8, 18), 4004);
  g_models.train_clouds.assign(all.begin(), all.begin() + 200);
  g_models.heldout_clouds.assign(all.begin() + 200, all.end());

  SurrogateConfig cfg;
  cfg.channels = 16;
  cfg.extraction_blocks = 2;
  cfg.extraction_inception = false;
  cfg.aggregation_blocks = 2;
  cfg.coarse_levels = 2;
  cfg.seed = 4004;
  g_models.surrogate = std::make_unique<SurrogateModel>(cfg);

  TrainSchedule sched;  // Adam, batch 8, lr 1e-4 halving every 5 epochs
  sched.epochs = 10;
  sched.batch_size = 8;
  sched.lr = 1e-4;
  sched.lr_decay = 0.5;
  sched.lr_decay_every = 5;
  TrainOutcome outcome = train_surrogate(*g_models.surrogate, g_models.train_clouds, sched);
  if (outcome.diverged) {
    detail = "surrogate training diverged";
    return false;
  }

  double sur_bits = 0, cf_bits = 0, oct_bits = 0, points = 0;
  for (size_t i = 0; i < 20 && i < g_models.heldout_clouds.size(); ++i) {
    const VoxelCloud& vc = g_models.heldout_clouds[i];
    Bitstream sbs = surrogate_encode(*g_models.surrogate, vc);
    if (!(surrogate_decode(*g_models.surrogate, sbs).coords == vc.coords)) {
      detail = "held-out surrogate round trip failed";
      return false;
    }
    sur_bits += double(sbs.payload_bits());
    cf_bits += double(contextfree_encode_payload(vc).size() * 8);
    oct_bits += double(octree_encode(vc).payload_bits());
    points += double(vc.coords.size());
  }
  double sur_bpp = sur_bits / points, cf_bpp = cf_bits / points, oct_bpp = oct_bits / points;
  double gain_vs_cf = (cf_bpp - sur_bpp) / cf_bpp * 100.0;
  double vs_oct = (sur_bpp - oct_bpp) / oct_bpp * 100.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "surrogate %.3f bpp vs context-free %.3f bpp (-%.1f%%); octree codec %.3f bpp "
                "(surrogate %+.1f%% vs octree)",
                sur_bpp, cf_bpp, gain_vs_cf, oct_bpp, vs_oct);
  detail = buf;
  return gain_vs_cf >= 5.0;
}

bool joint_rd_gain(std::string& detail) {
  if (!g_models.surrogate) {
    detail = "criterion 4 must run first";
    return false;
  }
  g_models.surrogate->set_frozen(true);

  std::vector<VoxelCloud> train(g_models.train_clouds.begin(),
                                g_models.train_clouds.begin() + 96);
  TrainSchedule sched;
  sched.epochs = 8;
  sched.batch_size = 8;
  sched.lr = 1e-4;
  sched.lr_decay = 0.5;
  sched.lr_decay_every = 5;

  VoxNetConfig vcfg;
  vcfg.channels = 16;
  vcfg.extraction_blocks = 2;
  vcfg.seed = 5005;
  g_models.voxnet_lo = std::make_unique<VoxNetModel>(vcfg);
  TrainOutcome lo =
      train_voxnet(*g_models.voxnet_lo, *g_models.surrogate, train, g_models.lambda_lo, sched);
  vcfg.seed = 5006;
  g_models.voxnet_hi = std::make_unique<VoxNetModel>(vcfg);
  TrainOutcome hi =
      train_voxnet(*g_models.voxnet_hi, *g_models.surrogate, train, g_models.lambda_hi, sched);
  if (lo.diverged || hi.diverged) {
    detail = "voxnet training diverged";
    return false;
  }

  SweepConfig sweep;
  sweep.depth = 8;
  sweep.peak = 255.0;
  sweep.compute_d2 = false;
  double bd_sum = 0;
  int bd_count = 0;
  size_t pts_lo = 0, pts_hi = 0;
  for (size_t i = 0; i < 10 && i < g_models.heldout_clouds.size(); ++i) {
    PointCloud original = dequantize(g_models.heldout_clouds[i], 1.0);
    RDCurve plain = rd_sweep_plain(original, sweep);
    std::vector<RDPoint> grid;
    for (const VoxNetModel* m : {g_models.voxnet_lo.get(), g_models.voxnet_hi.get()})
      for (double s : sweep.scales) grid.push_back(rd_point_voxnet(original, *m, s, sweep));
    RDCurve voxnet_curve = pareto_front(grid);
    if (plain.samples.size() >= 4 && voxnet_curve.samples.size() >= 4) {
      bd_sum += bd_rate(plain, voxnet_curve);
      ++bd_count;
    }
    pts_lo += g_models.voxnet_lo->voxelize(g_models.heldout_clouds[i]).cloud.coords.size();
    pts_hi += g_models.voxnet_hi->voxelize(g_models.heldout_clouds[i]).cloud.coords.size();
  }
  if (bd_count == 0) {
    detail = "no valid BD comparisons";
    return false;
  }
  double mean_bd = bd_sum / double(bd_count);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "mean BD-rate %.2f%% over %d held-out clouds; output points lambda=%.1f: %zu vs "
                "lambda=%.1f: %zu",
                mean_bd, bd_count, g_models.lambda_lo, pts_lo, g_models.lambda_hi, pts_hi);
  detail = buf;
  return mean_bd < 0.0 && pts_hi < pts_lo;
}

// ---------- criterion 6 ----------
bool flops_ablation(std::string& detail) {
  std::mt19937_64 rng(6006);
  struct Cfg {
    int n, ci, co;
  };
  Cfg cases[10] = {{1000, 32, 64}, {1, 1, 1},    {17, 3, 5},   {256, 8, 8},   {999, 16, 1},
                   {50, 64, 32},   {4096, 4, 4}, {33, 9, 27},  {128, 2, 128}, {2000, 16, 16}};
  for (const Cfg& c : cases) {
    ParamRegistry reg;
    Conv conv(reg, "c", 3, 1, c.ci, c.co, rng);
    int depth = 1;
    while ((1 << (3 * depth)) < c.n) ++depth;
    std::vector<Vec3i> coords;
    for (int i = 0; i < c.n; ++i) coords.push_back(morton_decode(uint64_t(i), depth));
    SparseTensor in{depth, coords, make_constant(random_matrix(c.n, c.ci, rng))};
    Tape t;
    conv.forward(t, in);
    long want = 2L * c.n * c.ci * c.co;
    if (t.flops() != want) {
      detail = "formula mismatch: got " + std::to_string(t.flops()) + " want " +
               std::to_string(want);
      return false;
    }
  }

  VoxNetModel model{VoxNetConfig{}};  // default architecture, C=32
  std::vector<VoxelCloud> clouds = synth_dataset(surfaces_spec(7, 1, 0, 0, 0, 26, 26, 4.0), 66);
  VoxelCloud big = clouds[0];
  std::vector<Vec3i> parents;
  std::vector<uint8_t> occ;
  group_parents(big.coords, parents, occ);
  if (parents.size() < 1000) {
    detail = "test cloud has fewer than 1000 parents";
    return false;
  }
  UpsampleFlops f = compare_upsample_flops(model, big);
  double reduction = double(f.mid_network - f.back_loaded) / double(f.mid_network) * 100.0;
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "10 layer configs exact; back-loaded %.2f%% fewer FLOPs than mid-network "
                "(%ld vs %ld) on %zu parents",
                reduction, f.back_loaded, f.mid_network, parents.size());
  detail = buf;
  return reduction > 50.0;
}

// ---------- criterion 7 ----------
bool metric_oracles(std::string& detail) {
  std::mt19937_64 rng(7007);
  auto center_of = [](const Vec3i& v) { return Vec3d{double(v.x), double(v.y), double(v.z)}; };
  auto sq = [](double v) { return v * v; };
  auto sqdist = [&](const Vec3d& a, const Vec3d& b) {
    return sq(a.x - b.x) + sq(a.y - b.y) + sq(a.z - b.z);
  };

  for (int rep = 0; rep < 5; ++rep) {
    VoxelCloud a = random_cloud(7, 100 + int(rng() % 400), rng);
    VoxelCloud b = random_cloud(7, 100 + int(rng() % 400), rng);
    DistortionReport fast = d1_psnr(a, b);

    auto directed = [&](const VoxelCloud& from, const VoxelCloud& to) {
      double sum = 0;
      for (const Vec3i& p : from.coords) {
        double best = 1e300;
        for (const Vec3i& q : to.coords) best = std::min(best, sqdist(center_of(p), center_of(q)));
        sum += best;
      }
      return sum / double(from.coords.size());
    };
    double mab = directed(a, b), mba = directed(b, a);
    if (std::abs(fast.mse_ab - mab) > 1e-9 || std::abs(fast.mse_ba - mba) > 1e-9 ||
        std::abs(fast.chamfer - (mab + mba)) > 1e-9) {
      detail = "d1/chamfer oracle mismatch";
      return false;
    }
    NormalEstimate est = estimate_normals(b, 9);
    double got_d2 = d2_psnr(a, b, est.normals);
    double sum_ab = 0;
    for (const Vec3i& p : a.coords) {
      size_t jbest = 0;
      double bd = 1e300;
      for (size_t j = 0; j < b.coords.size(); ++j) {
        double d = sqdist(center_of(p), center_of(b.coords[j]));
        if (d < bd) {
          bd = d;
          jbest = j;
        }
      }
      Vec3d off = center_of(p) - center_of(b.coords[jbest]);
      sum_ab += sq(off.dot(est.normals[jbest]));
    }
    double sum_ba = 0;
    for (size_t i = 0; i < b.coords.size(); ++i) {
      size_t jbest = 0;
      double bd = 1e300;
      for (size_t j = 0; j < a.coords.size(); ++j) {
        double d = sqdist(center_of(b.coords[i]), center_of(a.coords[j]));
        if (d < bd) {
          bd = d;
          jbest = j;
        }
      }
      Vec3d off = center_of(b.coords[i]) - center_of(a.coords[jbest]);
      sum_ba += sq(off.dot(est.normals[i]));
    }
    double m2 = std::max(sum_ab / double(a.coords.size()), sum_ba / double(b.coords.size()));
    double want_d2 = std::min(10.0 * std::log10(3.0 * 127.0 * 127.0 / m2), kPsnrCap);
    if (std::abs(got_d2 - want_d2) > 1e-9) {
      detail = "d2 oracle mismatch";
      return false;
    }
  }

  VoxelCloud x, y;
  x.depth = y.depth = 10;
  x.coords = {{0, 0, 0}};
  y.coords = {{1, 0, 0}};
  double psnr = d1_psnr(x, y).d1_psnr;
  if (std::abs(psnr - 64.97) > 0.01) {
    detail = "point-pair PSNR " + std::to_string(psnr) + " not within 64.97 +/- 0.01";
    return false;
  }

  RDCurve ref;
  ref.samples = {{0.2, 60, -1, 1.0, 1}, {0.4, 66, -1, 0.5, 1}, {0.8, 71, -1, 0.25, 1},
                 {1.6, 75, -1, 0.125, 1}};
  RDCurve twice = ref, half = ref;
  for (RDPoint& p : twice.samples) p.bpp *= 2;
  for (RDPoint& p : half.samples) p.bpp *= 0.5;
  if (std::abs(bd_rate(ref, ref)) > 1e-6 || std::abs(bd_rate(ref, twice) - 100.0) > 1e-6 ||
      std::abs(bd_rate(ref, half) + 50.0) > 1e-6) {
    detail = "bd-rate identity/2x/0.5x mismatch";
    return false;
  }
  detail = "d1/d2/chamfer at 1e-9 vs brute force; 64.97 dB pair; bd 0/+100/-50 exact";
  return true;
}

// ---------- criterion 8 ----------
struct PipelineArtifacts {
  std::vector<uint8_t> surrogate_ckpt, voxnet_ckpt;
  std::vector<uint8_t> oct_stream, sur_stream;
  std::string report_rd, report_bd;
};

PipelineArtifacts run_mini_pipeline(const std::string& dir) {
  PipelineArtifacts art;
  std::vector<VoxelCloud> data = synth_dataset(surfaces_spec(6, 3, 3, 1, 1, 6, 10), 88);
  std::vector<VoxelCloud> train(data.begin(), data.begin() + 6);
  std::vector<VoxelCloud> eval(data.begin() + 6, data.end());

  SurrogateConfig scfg;
  scfg.channels = 8;
  scfg.extraction_blocks = 1;
  scfg.extraction_inception = false;
  scfg.aggregation_blocks = 1;
  scfg.seed = 88;
  SurrogateModel surrogate(scfg);
  TrainSchedule sched;
  sched.epochs = 2;
  sched.batch_size = 4;
  sched.lr = 1e-3;
  train_surrogate(surrogate, train, sched);
  art.surrogate_ckpt = surrogate.to_checkpoint().serialize();

  surrogate.set_frozen(true);
  VoxNetConfig vcfg;
  vcfg.channels = 8;
  vcfg.extraction_blocks = 1;
  vcfg.seed = 89;
  VoxNetModel voxnet(vcfg);
  train_voxnet(voxnet, surrogate, train, 1.0, sched);
  art.voxnet_ckpt = voxnet.to_checkpoint().serialize();

  art.oct_stream = octree_encode(eval[0]).serialize();
  art.sur_stream = surrogate_encode(surrogate, eval[0]).serialize();

  ReportBundle bundle;
  SweepConfig sweep;
  sweep.depth = 6;
  sweep.peak = 63.0;
  sweep.compute_d2 = false;
  PointCloud original = dequantize(eval[0], 1.0);
  for (const RDPoint& p : rd_sweep_plain(original, sweep).samples)
    bundle.rd_points.push_back({"eval0", "quantize+octree", p});
  write_report(dir, bundle);
  std::ifstream rd(dir + "/rd_points.csv", std::ios::binary);
  art.report_rd.assign((std::istreambuf_iterator<char>(rd)), std::istreambuf_iterator<char>());
  std::ifstream bd(dir + "/bdrate.csv", std::ios::binary);
  art.report_bd.assign((std::istreambuf_iterator<char>(bd)), std::istreambuf_iterator<char>());
  return art;
}

bool determinism(std::string& detail) {
  PipelineArtifacts a = run_mini_pipeline("acc_determinism_1");
  PipelineArtifacts b = run_mini_pipeline("acc_determinism_2");
  fs::remove_all("acc_determinism_1");
  fs::remove_all("acc_determinism_2");
  if (a.surrogate_ckpt != b.surrogate_ckpt) {
    detail = "surrogate checkpoints differ";
    return false;
  }
  if (a.voxnet_ckpt != b.voxnet_ckpt) {
    detail = "voxnet checkpoints differ";
    return false;
  }
  if (a.oct_stream != b.oct_stream || a.sur_stream != b.sur_stream) {
    detail = "bitstreams differ";
    return false;
  }
  if (a.report_rd != b.report_rd || a.report_bd != b.report_bd) {
    detail = "report files differ";
    return false;
  }
  detail = "checkpoints, bitstreams and reports byte-identical across reruns";
  return true;
}

}  // namespace

int main() {
  std::vector<Criterion> criteria = {
      {1, "octree codec lossless integrity", octree_lossless},
      {2, "surrogate codec lossless integrity", surrogate_lossless},
      {3, "gradient correctness", gradient_correctness},
      {4, "surrogate entropy gain", surrogate_entropy_gain},
      {5, "joint-training RD gain", joint_rd_gain},
      {6, "FLOPs ablation", flops_ablation},
      {7, "metric oracles", metric_oracles},
      {8, "pipeline determinism", determinism},
  };

  bool all_ok = true;
  for (const Criterion& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %d: %s (%.1fs) - %s\n", ok ? "PASS" : "FAIL", c.id, c.title,
                secs, detail.c_str());
    std::fflush(stdout);
    all_ok = all_ok && ok;
  }
  return all_ok ? 0 : 1;
}
