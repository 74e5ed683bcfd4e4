#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pcvox/dataset.hpp"
#include "pcvox/ply_io.hpp"
#include "pcvox/report.hpp"
#include "pcvox/training.hpp"

namespace py = pybind11;
using namespace pcvox;

namespace {

using IntArray = py::array_t<int32_t, py::array::c_style | py::array::forcecast>;
using RealArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

VoxelCloud voxels_from(const IntArray& coords, int depth) {
  auto buf = coords.unchecked<2>();
  if (buf.shape(1) != 3) throw ContractViolation("coords must have shape (N, 3)");
  VoxelCloud vc;
  vc.depth = depth;
  vc.coords.reserve(size_t(buf.shape(0)));
  for (py::ssize_t i = 0; i < buf.shape(0); ++i)
    vc.coords.push_back({buf(i, 0), buf(i, 1), buf(i, 2)});
  morton_sort_unique(vc.coords, depth);
  return vc;
}

IntArray voxels_to(const VoxelCloud& vc) {
  IntArray out({py::ssize_t(vc.coords.size()), py::ssize_t(3)});
  auto buf = out.mutable_unchecked<2>();
  for (size_t i = 0; i < vc.coords.size(); ++i) {
    buf(py::ssize_t(i), 0) = vc.coords[i].x;
    buf(py::ssize_t(i), 1) = vc.coords[i].y;
    buf(py::ssize_t(i), 2) = vc.coords[i].z;
  }
  return out;
}

PointCloud points_from(const RealArray& pts) {
  auto buf = pts.unchecked<2>();
  if (buf.shape(1) != 3) throw ContractViolation("points must have shape (N, 3)");
  PointCloud pc;
  pc.points.reserve(size_t(buf.shape(0)));
  for (py::ssize_t i = 0; i < buf.shape(0); ++i)
    pc.points.push_back({buf(i, 0), buf(i, 1), buf(i, 2)});
  return pc;
}

RealArray points_to(const std::vector<Vec3d>& pts) {
  RealArray out({py::ssize_t(pts.size()), py::ssize_t(3)});
  auto buf = out.mutable_unchecked<2>();
  for (size_t i = 0; i < pts.size(); ++i) {
    buf(py::ssize_t(i), 0) = pts[i].x;
    buf(py::ssize_t(i), 1) = pts[i].y;
    buf(py::ssize_t(i), 2) = pts[i].z;
  }
  return out;
}

RDCurve curve_from(const std::vector<std::pair<double, double>>& samples) {
  RDCurve c;
  for (auto [bpp, psnr] : samples) c.samples.push_back({bpp, psnr, -1, 0, 0});
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "point cloud geometry compression toolkit";

  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_ValueError);
  py::register_exception<TruncationError>(m, "TruncationError", PyExc_ValueError);

  m.def("morton_code",
        [](int x, int y, int z, int depth) { return morton_code({x, y, z}, depth); },
        py::arg("x"), py::arg("y"), py::arg("z"), py::arg("depth"));
  m.def("morton_decode", [](uint64_t code, int depth) {
    Vec3i c = morton_decode(code, depth);
    return py::make_tuple(c.x, c.y, c.z);
  });

  m.def(
      "quantize",
      [](const RealArray& pts, double scale, int depth) {
        return voxels_to(quantize(points_from(pts), scale, depth));
      },
      py::arg("points"), py::arg("scale"), py::arg("depth"),
      "Round points to the voxel grid, merging duplicates (Morton order).");
  m.def("dequantize", [](const IntArray& coords, int depth, double scale) {
    return points_to(dequantize(voxels_from(coords, depth), scale).points);
  });

  m.def("read_ply", [](const std::string& path) {
    PointCloud pc = read_ply(path);
    py::dict out;
    out["points"] = points_to(pc.points);
    if (pc.has_normals()) out["normals"] = points_to(pc.normals);
    return out;
  });
  m.def(
      "write_ply",
      [](const RealArray& pts, const std::string& path, const std::string& format) {
        write_ply(points_from(pts), path,
                  format == "ascii" ? PlyFormat::Ascii : PlyFormat::BinaryLittleEndian);
      },
      py::arg("points"), py::arg("path"), py::arg("format") = "binary");

  m.def("d1_psnr", [](const IntArray& a, const IntArray& b, int depth) {
    DistortionReport rep = d1_psnr(voxels_from(a, depth), voxels_from(b, depth));
    py::dict out;
    out["d1_psnr"] = rep.d1_psnr;
    out["chamfer"] = rep.chamfer;
    out["mse_ab"] = rep.mse_ab;
    out["mse_ba"] = rep.mse_ba;
    return out;
  });
  m.def("estimate_normals", [](const IntArray& coords, int depth, int k) {
    NormalEstimate est = estimate_normals(voxels_from(coords, depth), k);
    return py::make_tuple(points_to(est.normals), est.any_degenerate);
  });

  m.def(
      "octree_encode",
      [](const IntArray& coords, int depth, double scale) {
        Bitstream bs = octree_encode(voxels_from(coords, depth), float(scale));
        std::vector<uint8_t> bytes = bs.serialize();
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("coords"), py::arg("depth"), py::arg("scale") = 1.0);
  m.def("octree_decode", [](const py::bytes& data) {
    std::string s = data;
    std::vector<uint8_t> bytes(s.begin(), s.end());
    Bitstream bs = Bitstream::deserialize(bytes);
    VoxelCloud vc = octree_decode(bs);
    py::dict out;
    out["coords"] = voxels_to(vc);
    out["depth"] = vc.depth;
    out["scale"] = bs.header.scale;
    return out;
  });

  m.def("estimate_bits", &estimate_bits, py::arg("p"), py::arg("bit"));
  m.def("bce", &nn::bce, py::arg("bit"), py::arg("p"));
  m.def("bd_rate", [](const std::vector<std::pair<double, double>>& ref,
                      const std::vector<std::pair<double, double>>& test) {
    return bd_rate(curve_from(ref), curve_from(test));
  });

  m.def(
      "synth_clouds",
      [](int depth, int spheres, int tori, int superquadrics, int boxes, double size_lo,
         double size_hi, double density, bool rotate, uint64_t seed) {
        DatasetSpec spec;
        spec.depth = depth;
        spec.rotate = rotate;
        auto push = [&](ShapeFamily f, int n) {
          if (n > 0) spec.shapes.push_back({f, n, density, size_lo, size_hi});
        };
        push(ShapeFamily::Sphere, spheres);
        push(ShapeFamily::Torus, tori);
        push(ShapeFamily::Superquadric, superquadrics);
        push(ShapeFamily::BoxUnion, boxes);
        std::vector<IntArray> out;
        for (const VoxelCloud& vc : synth_dataset(spec, seed)) out.push_back(voxels_to(vc));
        return out;
      },
      py::arg("depth") = 8, py::arg("spheres") = 1, py::arg("tori") = 0,
      py::arg("superquadrics") = 0, py::arg("boxes") = 0, py::arg("size_lo") = 10.0,
      py::arg("size_hi") = 20.0, py::arg("density") = 4.0, py::arg("rotate") = true,
      py::arg("seed") = 1);

  py::class_<nn::SurrogateModel>(m, "SurrogateModel")
      .def(py::init([](int channels, int extraction_blocks, bool inception,
                       int aggregation_blocks, int coarse_levels, uint64_t seed) {
             nn::SurrogateConfig cfg;
             cfg.channels = channels;
             cfg.extraction_blocks = extraction_blocks;
             cfg.extraction_inception = inception;
             cfg.aggregation_blocks = aggregation_blocks;
             cfg.coarse_levels = coarse_levels;
             cfg.seed = seed;
             return nn::SurrogateModel(cfg);
           }),
           py::arg("channels") = 32, py::arg("extraction_blocks") = 2,
           py::arg("inception") = true, py::arg("aggregation_blocks") = 2,
           py::arg("coarse_levels") = 2, py::arg("seed") = 1)
      .def_static("load",
                  [](const std::string& path) {
                    return nn::SurrogateModel::from_checkpoint(nn::Checkpoint::load(path));
                  })
      .def("save",
           [](const nn::SurrogateModel& self, const std::string& path) {
             self.to_checkpoint().save(path);
           })
      .def("checkpoint_hash", &nn::SurrogateModel::checkpoint_hash)
      .def("estimate_rate_bits",
           [](const nn::SurrogateModel& self, const IntArray& coords, int depth) {
             return self.estimate_rate_bits(voxels_from(coords, depth));
           })
      .def("pretrain",
           [](nn::SurrogateModel& self, const std::vector<IntArray>& clouds, int depth,
              int epochs, int batch_size, double lr) {
             std::vector<VoxelCloud> train;
             for (const IntArray& c : clouds) train.push_back(voxels_from(c, depth));
             nn::TrainSchedule sched;
             sched.epochs = epochs;
             sched.batch_size = batch_size;
             sched.lr = lr;
             nn::TrainOutcome out = train_surrogate(self, train, sched);
             std::vector<double> losses;
             for (const nn::EpochLog& e : out.log) losses.push_back(e.loss);
             return losses;
           },
           py::arg("clouds"), py::arg("depth"), py::arg("epochs") = 1,
           py::arg("batch_size") = 8, py::arg("lr") = 1e-4)
      .def("encode",
           [](const nn::SurrogateModel& self, const IntArray& coords, int depth, double scale) {
             Bitstream bs = nn::surrogate_encode(self, voxels_from(coords, depth), float(scale));
             std::vector<uint8_t> bytes = bs.serialize();
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           },
           py::arg("coords"), py::arg("depth"), py::arg("scale") = 1.0)
      .def("decode", [](const nn::SurrogateModel& self, const py::bytes& data) {
        std::string s = data;
        std::vector<uint8_t> bytes(s.begin(), s.end());
        VoxelCloud vc = nn::surrogate_decode(self, Bitstream::deserialize(bytes));
        return voxels_to(vc);
      });

  py::class_<nn::VoxNetModel>(m, "VoxNetModel")
      .def(py::init([](int channels, int extraction_blocks, uint64_t seed) {
             nn::VoxNetConfig cfg;
             cfg.channels = channels;
             cfg.extraction_blocks = extraction_blocks;
             cfg.seed = seed;
             return nn::VoxNetModel(cfg);
           }),
           py::arg("channels") = 32, py::arg("extraction_blocks") = 2, py::arg("seed") = 2)
      .def_static("load",
                  [](const std::string& path) {
                    return nn::VoxNetModel::from_checkpoint(nn::Checkpoint::load(path));
                  })
      .def("save",
           [](const nn::VoxNetModel& self, const std::string& path) {
             self.to_checkpoint().save(path);
           })
      .def("voxelize",
           [](const nn::VoxNetModel& self, const RealArray& pts, double scale, int depth) {
             nn::VoxelizeResult res = self.voxelize(points_from(pts), scale, depth);
             return py::make_tuple(voxels_to(res.cloud), res.fallback);
           },
           py::arg("points"), py::arg("scale"), py::arg("depth"))
      .def("train_joint",
           [](nn::VoxNetModel& self, nn::SurrogateModel& surrogate,
              const std::vector<IntArray>& clouds, int depth, double lambda, int epochs,
              int batch_size, double lr) {
             std::vector<VoxelCloud> train;
             for (const IntArray& c : clouds) train.push_back(voxels_from(c, depth));
             surrogate.set_frozen(true);
             nn::TrainSchedule sched;
             sched.epochs = epochs;
             sched.batch_size = batch_size;
             sched.lr = lr;
             nn::TrainOutcome out = train_voxnet(self, surrogate, train, lambda, sched);
             std::vector<double> losses;
             for (const nn::EpochLog& e : out.log) losses.push_back(e.loss);
             return losses;
           },
           py::arg("surrogate"), py::arg("clouds"), py::arg("depth"), py::arg("lambda_") = 1.0,
           py::arg("epochs") = 1, py::arg("batch_size") = 8, py::arg("lr") = 1e-4)
      .def("upsample_flops", [](const nn::VoxNetModel& self, const IntArray& coords, int depth) {
        nn::UpsampleFlops f = nn::compare_upsample_flops(self, voxels_from(coords, depth));
        return py::make_tuple(f.back_loaded, f.mid_network);
      });
}
