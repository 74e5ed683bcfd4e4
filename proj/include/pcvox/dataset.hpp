#pragma once

#include <random>

#include "pcvox/geometry.hpp"

namespace pcvox {

// Parametric surface families standing in for mesh datasets at desk scale.
enum class ShapeFamily { Sphere, Torus, Superquadric, BoxUnion };

struct ShapeSpec {
  ShapeFamily family = ShapeFamily::Sphere;
  int count = 1;
  double density = 4.0;    // samples per squared grid unit of surface area
  double size_lo = 12.0;   // characteristic radius range, grid units
  double size_hi = 28.0;
};

struct DatasetSpec {
  std::vector<ShapeSpec> shapes;
  int depth = 8;       // geometry precision of the emitted clouds
  bool rotate = true;  // random rotation about the box center
};

// Dense surface samples of one shape, centered in the [0, 2^depth) box,
// before quantization.
PointCloud sample_shape(ShapeFamily family, double size, double density, bool rotate, int depth,
                        std::mt19937_64& rng);

// Deterministic under seed: same spec and seed give identical clouds.
std::vector<VoxelCloud> synth_dataset(const DatasetSpec& spec, uint64_t seed);

// Voxels whose cube intersects the sphere of radius r centered at c
// (exact cube-to-sphere distance test); the coverage oracle for sampling.
std::vector<Vec3i> sphere_surface_voxels(const Vec3d& center, double radius, int depth);

// Euclidean distance from a point to the torus surface (major radius R,
// minor r, axis +z, centered at c).
double torus_distance(const Vec3d& p, const Vec3d& center, double major, double minor);

}  // namespace pcvox
