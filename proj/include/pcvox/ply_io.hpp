#pragma once

#include <string>

#include "pcvox/geometry.hpp"

namespace pcvox {

enum class PlyFormat { Ascii, BinaryLittleEndian };

// PLY 1.0 with vertex properties x,y,z (float32 or int32) and optional
// nx,ny,nz. Normals are renormalized to unit length on load.
PointCloud read_ply(const std::string& path);

void write_ply(const PointCloud& pc, const std::string& path, PlyFormat format);
void write_ply(const VoxelCloud& vc, const std::string& path, PlyFormat format);

}  // namespace pcvox
