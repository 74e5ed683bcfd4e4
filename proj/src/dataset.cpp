#include "pcvox/dataset.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>

namespace pcvox {

namespace {

constexpr double kPi = std::numbers::pi;

struct Rotation {
  double m[3][3];
  Vec3d apply(const Vec3d& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }
};

Rotation identity_rotation() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

// Uniform rotation from a random unit quaternion.
Rotation random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double q[4] = {n(rng), n(rng), n(rng), n(rng)};
  double len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& v : q) v /= len;
  double w = q[0], x = q[1], y = q[2], z = q[3];
  Rotation r;
  r.m[0][0] = 1 - 2 * (y * y + z * z);
  r.m[0][1] = 2 * (x * y - w * z);
  r.m[0][2] = 2 * (x * z + w * y);
  r.m[1][0] = 2 * (x * y + w * z);
  r.m[1][1] = 1 - 2 * (x * x + z * z);
  r.m[1][2] = 2 * (y * z - w * x);
  r.m[2][0] = 2 * (x * z - w * y);
  r.m[2][1] = 2 * (y * z + w * x);
  r.m[2][2] = 1 - 2 * (x * x + y * y);
  return r;
}

using Sampler = std::function<Vec3d(std::mt19937_64&)>;

std::vector<Vec3d> sample_surface(size_t n, std::mt19937_64& rng, const Sampler& sampler) {
  std::vector<Vec3d> pts;
  pts.reserve(n);
  for (size_t i = 0; i < n; ++i) pts.push_back(sampler(rng));
  return pts;
}

Vec3d sphere_point(double r, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3d d{n(rng), n(rng), n(rng)};
  double len = d.norm();
  if (len < 1e-12) return {r, 0, 0};
  return d * (r / len);
}

// Area-uniform torus sampling: minor angle accepted with density
// proportional to (R + r cos phi).
Vec3d torus_point(double major, double minor, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double theta = 2 * kPi * u(rng);
  double phi;
  for (;;) {
    phi = 2 * kPi * u(rng);
    if (u(rng) <= (major + minor * std::cos(phi)) / (major + minor)) break;
  }
  double ring = major + minor * std::cos(phi);
  return {ring * std::cos(theta), ring * std::sin(theta), minor * std::sin(phi)};
}

// Superquadric |x/a|^e + |y/b|^e + |z/c|^e = 1, sampled by projecting
// random directions onto the surface. Dense enough for coverage, not
// area-uniform.
Vec3d superquadric_point(double a, double b, double c, double e, std::mt19937_64& rng) {
  Vec3d d = sphere_point(1.0, rng);
  double f = std::pow(std::abs(d.x / a), e) + std::pow(std::abs(d.y / b), e) +
             std::pow(std::abs(d.z / c), e);
  double t = std::pow(f, -1.0 / e);
  return d * t;
}

struct Box {
  Vec3d center, half;
};

Vec3d box_surface_point(const std::vector<Box>& boxes, const std::vector<double>& cum_area,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double pick = u(rng) * cum_area.back();
  size_t bi = 0;
  while (bi + 1 < cum_area.size() && pick > cum_area[bi]) ++bi;
  const Box& box = boxes[bi];
  double ax = box.half.y * box.half.z, ay = box.half.x * box.half.z, az = box.half.x * box.half.y;
  double total = 2 * (ax + ay + az);
  double f = u(rng) * total;
  double sx = u(rng) * 2 - 1, sy = u(rng) * 2 - 1;
  Vec3d p;
  if (f < 2 * ax)
    p = {f < ax ? 1.0 : -1.0, sx, sy};
  else if (f < 2 * ax + 2 * ay)
    p = {sx, f < 2 * ax + ay ? 1.0 : -1.0, sy};
  else
    p = {sx, sy, f < 2 * ax + 2 * ay + az ? 1.0 : -1.0};
  return box.center + Vec3d{p.x * box.half.x, p.y * box.half.y, p.z * box.half.z};
}

}  // namespace

PointCloud sample_shape(ShapeFamily family, double size, double density, bool rotate, int depth,
                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double extent = double(1 << depth);
  const Vec3d center{extent / 2, extent / 2, extent / 2};
  Rotation rot = rotate ? random_rotation(rng) : identity_rotation();

  double area = 0;
  Sampler sampler;
  switch (family) {
    case ShapeFamily::Sphere: {
      double r = size;
      area = 4 * kPi * r * r;
      sampler = [r](std::mt19937_64& g) { return sphere_point(r, g); };
      break;
    }
    case ShapeFamily::Torus: {
      double major = size, minor = size * 0.35;
      area = 4 * kPi * kPi * major * minor;
      sampler = [major, minor](std::mt19937_64& g) { return torus_point(major, minor, g); };
      break;
    }
    case ShapeFamily::Superquadric: {
      double a = size, b = size * (0.5 + 0.5 * u(rng)), c = size * (0.5 + 0.5 * u(rng));
      double e = 1.5 + 2.5 * u(rng);
      // Ellipsoid-like area bound; oversampling is harmless.
      area = 4 * kPi * std::pow((std::pow(a * b, 1.6) + std::pow(a * c, 1.6) +
                                 std::pow(b * c, 1.6)) / 3.0, 1.0 / 1.6);
      sampler = [a, b, c, e](std::mt19937_64& g) { return superquadric_point(a, b, c, e, g); };
      break;
    }
    case ShapeFamily::BoxUnion: {
      int nboxes = 2 + int(u(rng) * 2.0);
      auto boxes = std::make_shared<std::vector<Box>>();
      auto cum = std::make_shared<std::vector<double>>();
      double acc = 0;
      for (int i = 0; i < nboxes; ++i) {
        Box box;
        box.half = {size * (0.3 + 0.7 * u(rng)), size * (0.3 + 0.7 * u(rng)),
                    size * (0.3 + 0.7 * u(rng))};
        double room = size * 0.5;
        box.center = {u(rng) * room - room / 2, u(rng) * room - room / 2,
                      u(rng) * room - room / 2};
        double a = 8 * (box.half.y * box.half.z + box.half.x * box.half.z +
                        box.half.x * box.half.y);
        acc += a;
        boxes->push_back(box);
        cum->push_back(acc);
      }
      area = acc;
      sampler = [boxes, cum](std::mt19937_64& g) { return box_surface_point(*boxes, *cum, g); };
      break;
    }
  }

  size_t n = size_t(std::ceil(area * density));
  PointCloud pc;
  pc.points = sample_surface(std::max<size_t>(n, 16), rng, sampler);
  for (Vec3d& p : pc.points) p = rot.apply(p) + center;
  return pc;
}

std::vector<VoxelCloud> synth_dataset(const DatasetSpec& spec, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<VoxelCloud> out;
  for (const ShapeSpec& shape : spec.shapes) {
    for (int i = 0; i < shape.count; ++i) {
      double size = shape.size_lo + (shape.size_hi - shape.size_lo) * u(rng);
      PointCloud pc =
          sample_shape(shape.family, size, shape.density, spec.rotate, spec.depth, rng);
      out.push_back(quantize(pc, 1.0, spec.depth));
    }
  }
  return out;
}

std::vector<Vec3i> sphere_surface_voxels(const Vec3d& center, double radius, int depth) {
  std::vector<Vec3i> out;
  const int lim = (1 << depth) - 1;
  int lo = std::max(0, int(std::floor(center.x - radius)) - 1);
  int hi = std::min(lim, int(std::ceil(center.x + radius)) + 1);
  auto axis_dist = [](double c, double lo_face, double hi_face) {
    if (c < lo_face) return lo_face - c;
    if (c > hi_face) return c - hi_face;
    return 0.0;
  };
  for (int x = lo; x <= hi; ++x)
    for (int y = lo; y <= hi; ++y)
      for (int z = lo; z <= hi; ++z) {
        // Cube [v-0.5, v+0.5]^3 intersects the sphere surface iff the
        // nearest cube point is inside radius and the farthest is outside.
        double dmin2 = 0, dmax2 = 0;
        double cs[3] = {center.x, center.y, center.z};
        double vs[3] = {double(x), double(y), double(z)};
        for (int a = 0; a < 3; ++a) {
          double d = axis_dist(cs[a], vs[a] - 0.5, vs[a] + 0.5);
          dmin2 += d * d;
          double far_d = std::max(std::abs(cs[a] - (vs[a] - 0.5)), std::abs(cs[a] - (vs[a] + 0.5)));
          dmax2 += far_d * far_d;
        }
        if (dmin2 <= radius * radius && radius * radius <= dmax2) out.push_back({x, y, z});
      }
  return out;
}

double torus_distance(const Vec3d& p, const Vec3d& center, double major, double minor) {
  Vec3d q = p - center;
  double ring = std::sqrt(q.x * q.x + q.y * q.y) - major;
  return std::abs(std::sqrt(ring * ring + q.z * q.z) - minor);
}

}  // namespace pcvox
