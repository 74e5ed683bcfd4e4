#include "pcvox/ply_io.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace pcvox {
namespace {

struct Property {
  std::string type;
  std::string name;
};

struct Header {
  PlyFormat format = PlyFormat::Ascii;
  size_t vertex_count = 0;
  std::vector<Property> vertex_props;
  int header_lines = 0;
};

size_t scalar_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" || type == "float" ||
      type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw UnsupportedFormatError("unsupported PLY property type: " + type);
}

Header parse_header(std::istream& in) {
  Header h;
  std::string line;
  int lineno = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError("unexpected end of PLY header", lineno);
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    return line;
  };
  if (next() != "ply") throw ParseError("missing 'ply' magic", lineno);

  std::string current_element;
  bool format_seen = false, end_seen = false;
  while (!end_seen) {
    std::istringstream ls(next());
    std::string tok;
    ls >> tok;
    if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
    if (tok == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii")
        h.format = PlyFormat::Ascii;
      else if (fmt == "binary_little_endian")
        h.format = PlyFormat::BinaryLittleEndian;
      else
        throw UnsupportedFormatError("unsupported PLY format: " + fmt);
      if (version != "1.0") throw ParseError("unsupported PLY version: " + version, lineno);
      format_seen = true;
    } else if (tok == "element") {
      std::string name;
      size_t count = 0;
      ls >> name >> count;
      if (ls.fail()) throw ParseError("malformed element declaration", lineno);
      current_element = name;
      if (name == "vertex") h.vertex_count = count;
    } else if (tok == "property") {
      std::string type, name;
      ls >> type;
      if (type == "list") throw UnsupportedFormatError("list properties are not supported");
      ls >> name;
      if (ls.fail()) throw ParseError("malformed property declaration", lineno);
      if (current_element == "vertex") h.vertex_props.push_back({type, name});
    } else if (tok == "end_header") {
      end_seen = true;
    } else {
      throw ParseError("unrecognized header keyword: " + tok, lineno);
    }
  }
  if (!format_seen) throw ParseError("PLY header missing format line", lineno);
  if (h.vertex_count == 0) throw ParseError("PLY header declares no vertices", lineno);
  h.header_lines = lineno;
  return h;
}

double read_scalar_binary(std::istream& in, const std::string& type) {
  auto rd = [&](auto v) -> double {
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return double(v);
  };
  size_t sz = scalar_size(type);
  if (type == "float" || type == "float32") return rd(float{});
  if (type == "double" || type == "float64") return rd(double{});
  if (type == "char" || type == "int8") return rd(int8_t{});
  if (type == "uchar" || type == "uint8") return rd(uint8_t{});
  if (type == "short" || type == "int16") return rd(int16_t{});
  if (type == "ushort" || type == "uint16") return rd(uint16_t{});
  if (type == "int" || type == "int32") return rd(int32_t{});
  if (type == "uint" || type == "uint32") return rd(uint32_t{});
  (void)sz;
  throw UnsupportedFormatError("unsupported PLY property type: " + type);
}

}  // namespace

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open PLY file: " + path);
  Header h = parse_header(in);

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (size_t i = 0; i < h.vertex_props.size(); ++i) {
    const std::string& n = h.vertex_props[i].name;
    if (n == "x") ix = int(i);
    else if (n == "y") iy = int(i);
    else if (n == "z") iz = int(i);
    else if (n == "nx") inx = int(i);
    else if (n == "ny") iny = int(i);
    else if (n == "nz") inz = int(i);
  }
  if (ix < 0 || iy < 0 || iz < 0)
    throw ParseError("PLY header does not declare x, y, z vertex properties", h.header_lines);
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

  PointCloud pc;
  pc.points.reserve(h.vertex_count);
  if (has_normals) pc.normals.reserve(h.vertex_count);
  std::vector<double> row(h.vertex_props.size());

  for (size_t v = 0; v < h.vertex_count; ++v) {
    if (h.format == PlyFormat::Ascii) {
      std::string line;
      if (!std::getline(in, line))
        throw ParseError("unexpected end of vertex data", h.header_lines + int(v) + 1);
      std::istringstream ls(line);
      for (size_t p = 0; p < row.size(); ++p) {
        ls >> row[p];
        if (ls.fail())
          throw ParseError("malformed vertex line", h.header_lines + int(v) + 1);
        // Values carry the declared property precision regardless of the
        // on-disk encoding, so ascii and binary files parse identically.
        const std::string& type = h.vertex_props[p].type;
        if (type == "float" || type == "float32")
          row[p] = double(float(row[p]));
        else if (type != "double" && type != "float64")
          row[p] = double(int64_t(row[p]));
      }
    } else {
      for (size_t p = 0; p < row.size(); ++p)
        row[p] = read_scalar_binary(in, h.vertex_props[p].type);
      if (!in) throw ParseError("unexpected end of binary vertex data");
    }
    pc.points.push_back({row[ix], row[iy], row[iz]});
    if (has_normals) {
      Vec3d n{row[inx], row[iny], row[inz]};
      double len = n.norm();
      pc.normals.push_back(len > 0 ? n / len : Vec3d{0, 0, 1});
    }
  }
  return pc;
}

namespace {

void write_ply_impl(const std::vector<Vec3d>& pts, const std::vector<Vec3d>& normals,
                    bool integer_coords, const std::string& path, PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  const char* coord_type = integer_coords ? "int" : "float";
  out << "ply\nformat "
      << (format == PlyFormat::Ascii ? "ascii" : "binary_little_endian") << " 1.0\n"
      << "element vertex " << pts.size() << "\n";
  for (const char* axis : {"x", "y", "z"}) out << "property " << coord_type << " " << axis << "\n";
  if (!normals.empty())
    for (const char* axis : {"nx", "ny", "nz"}) out << "property float " << axis << "\n";
  out << "end_header\n";

  for (size_t i = 0; i < pts.size(); ++i) {
    const Vec3d& p = pts[i];
    if (format == PlyFormat::Ascii) {
      if (integer_coords)
        out << int32_t(p.x) << " " << int32_t(p.y) << " " << int32_t(p.z);
      else {
        std::ostringstream ls;
        ls.precision(9);  // round-trips float32 exactly
        ls << float(p.x) << " " << float(p.y) << " " << float(p.z);
        out << ls.str();
      }
      if (!normals.empty()) {
        const Vec3d& n = normals[i];
        std::ostringstream ls;
        ls.precision(9);
        ls << " " << float(n.x) << " " << float(n.y) << " " << float(n.z);
        out << ls.str();
      }
      out << "\n";
    } else {
      auto put = [&](auto v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
      if (integer_coords) {
        put(int32_t(p.x));
        put(int32_t(p.y));
        put(int32_t(p.z));
      } else {
        put(float(p.x));
        put(float(p.y));
        put(float(p.z));
      }
      if (!normals.empty()) {
        const Vec3d& n = normals[i];
        put(float(n.x));
        put(float(n.y));
        put(float(n.z));
      }
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void write_ply(const PointCloud& pc, const std::string& path, PlyFormat format) {
  write_ply_impl(pc.points, pc.normals, false, path, format);
}

void write_ply(const VoxelCloud& vc, const std::string& path, PlyFormat format) {
  std::vector<Vec3d> pts;
  pts.reserve(vc.coords.size());
  for (const Vec3i& c : vc.coords) pts.push_back({double(c.x), double(c.y), double(c.z)});
  write_ply_impl(pts, {}, true, path, format);
}

}  // namespace pcvox
