#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "pcvox/config.hpp"
#include "pcvox/dataset.hpp"
#include "pcvox/report.hpp"
#include "pcvox/training.hpp"

using namespace pcvox;

TEST_CASE("config parsing and overrides") {
  Config cfg = Config::parse(
      "# comment\n"
      "depth = 8\n"
      "scales = 1,0.5,0.25,0.125\n"
      "name = spheres\n"
      "rotate = true\n"
      "depth = 9\n");
  CHECK(cfg.get_int("depth", 0) == 9);  // later assignment wins
  CHECK(cfg.get_str("name", "") == "spheres");
  CHECK(cfg.get_bool("rotate", false));
  CHECK(cfg.get_doubles("scales", {}).size() == 4);
  CHECK(cfg.get_int("missing", 42) == 42);

  cfg.set("depth", "5");
  CHECK(cfg.get_int("depth", 0) == 5);

  CHECK_THROWS_AS(Config::parse("not_a_pair\n"), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("name", 0), ConfigError);
}

TEST_CASE("synthetic dataset determinism and families") {
  DatasetSpec spec;
  spec.depth = 8;
  spec.shapes = {{ShapeFamily::Sphere, 2, 3.0, 10, 14},
                 {ShapeFamily::Torus, 2, 3.0, 12, 16},
                 {ShapeFamily::Superquadric, 1, 3.0, 10, 14},
                 {ShapeFamily::BoxUnion, 1, 3.0, 8, 12}};
  std::vector<VoxelCloud> a = synth_dataset(spec, 99);
  std::vector<VoxelCloud> b = synth_dataset(spec, 99);
  REQUIRE(a.size() == 6);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].coords == b[i].coords);
    CHECK(a[i].coords.size() >= 100);
    a[i].validate();
  }
  std::vector<VoxelCloud> c = synth_dataset(spec, 100);
  CHECK(c[0].coords != a[0].coords);
}

TEST_CASE("sphere sampling covers nearly all analytic surface voxels") {
  const int depth = 8;
  const double radius = 20.0;
  DatasetSpec spec;
  spec.depth = depth;
  spec.rotate = false;  // centered spheres are rotation invariant anyway
  spec.shapes = {{ShapeFamily::Sphere, 1, 32.0, radius, radius}};
  VoxelCloud cloud = synth_dataset(spec, 7)[0];

  const Vec3d center{128, 128, 128};
  std::vector<Vec3i> ideal = sphere_surface_voxels(center, radius, depth);
  nn::CoordMap have(cloud.coords, depth);
  size_t hit = 0;
  for (const Vec3i& v : ideal)
    if (have.row(v) >= 0) ++hit;
  CHECK(double(hit) / double(ideal.size()) >= 0.90);
}

TEST_CASE("torus samples stay within half a voxel of the surface") {
  const int depth = 8;
  DatasetSpec spec;
  spec.depth = depth;
  spec.rotate = false;
  spec.shapes = {{ShapeFamily::Torus, 1, 4.0, 20, 20}};
  VoxelCloud cloud = synth_dataset(spec, 31)[0];

  // Quantization moves a surface sample by at most half the cube diagonal.
  const Vec3d center{128, 128, 128};
  const double tol = std::sqrt(3.0) / 2 + 1e-6;
  for (const Vec3i& v : cloud.coords)
    CHECK(torus_distance({double(v.x), double(v.y), double(v.z)}, center, 20, 20 * 0.35) <= tol);
}

TEST_CASE("bd-rate identity and scaling") {
  RDCurve ref;
  ref.samples = {{0.2, 60, -1, 1.0, 100},
                 {0.4, 66, -1, 0.5, 100},
                 {0.8, 71, -1, 0.25, 100},
                 {1.6, 75, -1, 0.125, 100}};
  RDCurve same = ref;
  CHECK(bd_rate(ref, same) == doctest::Approx(0.0).epsilon(1e-9));

  RDCurve twice = ref;
  for (RDPoint& p : twice.samples) p.bpp *= 2.0;
  CHECK(bd_rate(ref, twice) == doctest::Approx(100.0).epsilon(1e-6));

  RDCurve half = ref;
  for (RDPoint& p : half.samples) p.bpp *= 0.5;
  CHECK(bd_rate(ref, half) == doctest::Approx(-50.0).epsilon(1e-6));

  RDCurve low;
  low.samples = {{0.1, 20, -1, 1, 1}, {0.2, 25, -1, 1, 1}, {0.3, 30, -1, 1, 1},
                 {0.4, 35, -1, 1, 1}};
  CHECK_THROWS_AS(bd_rate(ref, low), ContractViolation);

  RDCurve short_curve;
  short_curve.samples = {{0.2, 60, -1, 1, 1}, {0.4, 66, -1, 1, 1}, {0.8, 71, -1, 1, 1}};
  CHECK_THROWS_AS(bd_rate(ref, short_curve), ContractViolation);
}

TEST_CASE("pareto front drops dominated points") {
  std::vector<RDPoint> pts = {
      {1.0, 60, -1, 1, 1}, {0.9, 61, -1, 1, 1},  // dominates the first
      {1.5, 65, -1, 1, 1}, {2.0, 64, -1, 1, 1},  // dominated by the previous
      {0.5, 50, -1, 1, 1}};
  RDCurve curve = pareto_front(pts);
  REQUIRE(curve.samples.size() == 3);
  CHECK(curve.samples[0].bpp == 0.5);
  CHECK(curve.samples[1].bpp == 0.9);
  CHECK(curve.samples[2].bpp == 1.5);
  for (size_t i = 1; i < curve.samples.size(); ++i) {
    CHECK(curve.samples[i].bpp > curve.samples[i - 1].bpp);
    CHECK(curve.samples[i].psnr > curve.samples[i - 1].psnr);
  }
}

TEST_CASE("plain rd sweep is monotone on a synthetic sphere") {
  DatasetSpec sspec;
  sspec.depth = 8;
  sspec.rotate = false;
  sspec.shapes = {{ShapeFamily::Sphere, 1, 4.0, 16, 16}};
  VoxelCloud vox = synth_dataset(sspec, 3)[0];
  PointCloud original = dequantize(vox, 1.0);

  SweepConfig cfg;
  cfg.compute_d2 = true;
  RDCurve curve = rd_sweep_plain(original, cfg);
  curve.validate();
  REQUIRE(curve.samples.size() == 4);
  for (size_t i = 1; i < curve.samples.size(); ++i)
    CHECK(curve.samples[i].psnr >= curve.samples[i - 1].psnr);
  for (const RDPoint& p : curve.samples) CHECK(p.d2 > 0);
}

TEST_CASE("surrogate training loop is deterministic under a fixed seed") {
  DatasetSpec spec;
  spec.depth = 6;
  spec.shapes = {{ShapeFamily::Sphere, 4, 2.0, 6, 10}};
  std::vector<VoxelCloud> data = synth_dataset(spec, 5);

  nn::TrainSchedule sched;
  sched.epochs = 2;
  sched.batch_size = 2;
  sched.lr = 1e-3;

  nn::SurrogateConfig scfg;
  scfg.channels = 8;
  scfg.extraction_blocks = 1;
  scfg.extraction_inception = false;
  scfg.aggregation_blocks = 1;

  nn::SurrogateModel m1(scfg);
  nn::TrainOutcome o1 = train_surrogate(m1, data, sched);
  nn::SurrogateModel m2(scfg);
  nn::TrainOutcome o2 = train_surrogate(m2, data, sched);

  REQUIRE(o1.log.size() == 2);
  CHECK(!o1.diverged);
  CHECK(o1.checkpoint.serialize() == o2.checkpoint.serialize());
  CHECK(o1.log[0].loss == o2.log[0].loss);
  CHECK(o1.log[1].loss < o1.log[0].loss);
}

TEST_CASE("report files are deterministic and self-consistent") {
  ReportBundle bundle;
  bundle.rd_points = {
      {"sphere_0", "quantize+octree", {0.8, 66.0, 60.0, 0.5, 900}},
      {"sphere_0", "quantize+octree", {0.4, 61.0, 55.0, 0.25, 500}},
      {"sphere_0", "voxnet+octree", {0.7, 66.0, 60.0, 0.5, 880}},
      {"torus_1", "quantize+octree", {1.1, 64.0, 58.0, 1.0, 1200}},
  };
  bundle.bd_rates = {{"sphere_0", "quantize+octree", "voxnet+octree", -7.5}};
  bundle.flops = {{"voxnet_back_loaded", 123456}, {"voxnet_mid_network", 654321}};
  bundle.notes = {"scale grid is a stand-in for unknown encoder presets"};

  const std::string dir1 = "test_report_out1";
  const std::string dir2 = "test_report_out2";
  write_report(dir1, bundle);
  write_report(dir2, bundle);

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  for (const char* f : {"/rd_points.csv", "/bdrate.csv", "/flops.csv", "/summary.txt"}) {
    std::string c1 = slurp(dir1 + f), c2 = slurp(dir2 + f);
    CHECK(!c1.empty());
    CHECK(c1 == c2);
  }
  std::string rd = slurp(dir1 + "/rd_points.csv");
  CHECK(rd.find("sphere_0") != std::string::npos);
  CHECK(rd.find("coded_points") != std::string::npos);
  // Rows are sorted by (cloud, chain, bpp): the 0.4 bpp row precedes 0.8.
  CHECK(rd.find("0.400000") < rd.find("0.800000"));

  ReportBundle empty;
  write_report(dir1, empty);
  std::string header_only = slurp(dir1 + "/rd_points.csv");
  CHECK(header_only == "cloud,chain,scale,bpp,d1_psnr,d2_psnr,coded_points\n");

  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("csv escaping") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
}
