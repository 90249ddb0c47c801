#pragma once

#include <string>

#include "defgrid/geometry.hpp"

namespace defgrid {

/// Dispatches on extension: .ply (ascii or binary little-endian) or .xyz
/// (whitespace-separated x y z per line, '#' comments).
PointCloud read_point_cloud(const std::string& path);

/// Dispatches on extension: .obj (v/f records, 1-based indices) or .ply.
/// Polygons with more than 3 vertices are triangulated by fan.
TriMesh read_mesh(const std::string& path);

void write_obj(const std::string& path, const TriMesh& mesh);
void write_obj(const std::string& path, std::span<const Vec3> vertices,
               std::span<const std::array<int, 3>> triangles);
void write_xyz(const std::string& path, std::span<const Vec3> points);

/// The face block of an OBJ file as one string; exported frames share it verbatim.
std::string obj_face_block(std::span<const std::array<int, 3>> triangles);

}  // namespace defgrid
