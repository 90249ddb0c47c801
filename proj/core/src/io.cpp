#include "defgrid/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace defgrid {

namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return {};
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw InputError(path + ": " + what);
}

struct PlyProperty {
    std::string name;
    std::string type;       // scalar type, or item type for lists
    std::string count_type; // non-empty for list properties
    bool is_list = false;
};

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<PlyProperty> properties;
};

std::size_t ply_type_size(const std::string& t, const std::string& path) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
        t == "float32")
        return 4;
    if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
    fail(path, "unknown PLY property type '" + t + "'");
}

double ply_read_scalar(std::istream& in, const std::string& t, const std::string& path) {
    unsigned char buf[8];
    const std::size_t sz = ply_type_size(t, path);
    in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(sz));
    if (!in) fail(path, "unexpected end of binary PLY data");
    if (t == "float" || t == "float32") {
        float v;
        std::memcpy(&v, buf, 4);
        return static_cast<double>(v);
    }
    if (t == "double" || t == "float64") {
        double v;
        std::memcpy(&v, buf, 8);
        return v;
    }
    // integer types
    std::int64_t v = 0;
    bool is_signed = t[0] == 'c' || t[0] == 's' || (t[0] == 'i' && t != "uint");
    switch (sz) {
        case 1: v = is_signed ? static_cast<std::int64_t>(static_cast<std::int8_t>(buf[0]))
                              : static_cast<std::int64_t>(buf[0]);
                break;
        case 2: {
            std::uint16_t u;
            std::memcpy(&u, buf, 2);
            v = is_signed ? static_cast<std::int64_t>(static_cast<std::int16_t>(u))
                          : static_cast<std::int64_t>(u);
            break;
        }
        case 4: {
            std::uint32_t u;
            std::memcpy(&u, buf, 4);
            v = is_signed ? static_cast<std::int64_t>(static_cast<std::int32_t>(u))
                          : static_cast<std::int64_t>(u);
            break;
        }
        default: {
            std::uint64_t u;
            std::memcpy(&u, buf, 8);
            v = static_cast<std::int64_t>(u);
            break;
        }
    }
    return static_cast<double>(v);
}

struct PlyContents {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> faces;
};

PlyContents read_ply(const std::string& path, bool need_faces) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open file");

    std::string line;
    if (!std::getline(in, line)) fail(path, "empty file");
    if (line.rfind("ply", 0) != 0) fail(path, "missing 'ply' magic");

    bool binary = false;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "comment" || tok == "obj_info" || tok.empty()) continue;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            if (fmt == "ascii") binary = false;
            else if (fmt == "binary_little_endian") binary = true;
            else fail(path, "unsupported PLY format '" + fmt + "'");
        } else if (tok == "element") {
            PlyElement el;
            ls >> el.name >> el.count;
            elements.push_back(el);
        } else if (tok == "property") {
            if (elements.empty()) fail(path, "property before element");
            PlyProperty p;
            std::string t;
            ls >> t;
            if (t == "list") {
                p.is_list = true;
                ls >> p.count_type >> p.type >> p.name;
            } else {
                p.type = t;
                ls >> p.name;
            }
            elements.back().properties.push_back(p);
        } else if (tok == "end_header") {
            break;
        } else {
            fail(path, "unexpected header token '" + tok + "'");
        }
    }

    PlyContents out;
    auto push_face = [&](const std::vector<long>& poly) {
        if (poly.size() < 3) fail(path, "face with fewer than 3 indices");
        for (std::size_t k = 2; k < poly.size(); ++k) {
            out.faces.push_back({static_cast<int>(poly[0]), static_cast<int>(poly[k - 1]),
                                 static_cast<int>(poly[k])});
        }
    };

    for (const auto& el : elements) {
        const bool is_vertex = el.name == "vertex";
        const bool is_face = el.name == "face";
        int ix = -1, iy = -1, iz = -1, iface = -1;
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
            const auto& prop = el.properties[p];
            if (is_vertex && prop.name == "x") ix = static_cast<int>(p);
            if (is_vertex && prop.name == "y") iy = static_cast<int>(p);
            if (is_vertex && prop.name == "z") iz = static_cast<int>(p);
            if (is_face && (prop.name == "vertex_indices" || prop.name == "vertex_index"))
                iface = static_cast<int>(p);
        }
        if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) fail(path, "vertex element lacks x/y/z");

        for (std::size_t row = 0; row < el.count; ++row) {
            if (binary) {
                Vec3 v(0, 0, 0);
                std::vector<long> poly;
                for (std::size_t p = 0; p < el.properties.size(); ++p) {
                    const auto& prop = el.properties[p];
                    if (prop.is_list) {
                        const long cnt =
                            static_cast<long>(ply_read_scalar(in, prop.count_type, path));
                        for (long k = 0; k < cnt; ++k) {
                            const double val = ply_read_scalar(in, prop.type, path);
                            if (static_cast<int>(p) == iface) poly.push_back(static_cast<long>(val));
                        }
                    } else {
                        const double val = ply_read_scalar(in, prop.type, path);
                        if (static_cast<int>(p) == ix) v.x() = val;
                        else if (static_cast<int>(p) == iy) v.y() = val;
                        else if (static_cast<int>(p) == iz) v.z() = val;
                    }
                }
                if (is_vertex) out.vertices.push_back(v);
                if (is_face && iface >= 0) push_face(poly);
            } else {
                std::string data_line;
                do {
                    if (!std::getline(in, data_line)) fail(path, "unexpected end of PLY data");
                } while (data_line.find_first_not_of(" \t\r") == std::string::npos);
                std::istringstream ls(data_line);
                Vec3 v(0, 0, 0);
                std::vector<long> poly;
                for (std::size_t p = 0; p < el.properties.size(); ++p) {
                    const auto& prop = el.properties[p];
                    if (prop.is_list) {
                        long cnt = 0;
                        ls >> cnt;
                        for (long k = 0; k < cnt; ++k) {
                            long idx = 0;
                            ls >> idx;
                            if (static_cast<int>(p) == iface) poly.push_back(idx);
                        }
                    } else {
                        double val = 0;
                        ls >> val;
                        if (static_cast<int>(p) == ix) v.x() = val;
                        else if (static_cast<int>(p) == iy) v.y() = val;
                        else if (static_cast<int>(p) == iz) v.z() = val;
                    }
                }
                if (!ls && el.properties.size() > 0) fail(path, "malformed PLY data row");
                if (is_vertex) out.vertices.push_back(v);
                if (is_face && iface >= 0) push_face(poly);
            }
        }
    }

    if (need_faces && out.faces.empty()) fail(path, "PLY mesh has no faces");
    return out;
}

PointCloud read_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open file");
    std::vector<Vec3> pts;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z)) fail(path, "malformed xyz line: '" + line + "'");
        pts.emplace_back(x, y, z);
    }
    if (pts.empty()) fail(path, "no points in file");
    return PointCloud(std::move(pts));
}

TriMesh read_obj(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open file");
    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> tris;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) fail(path, "malformed vertex line: '" + line + "'");
            verts.emplace_back(x, y, z);
        } else if (tok == "f") {
            std::vector<int> poly;
            std::string ref;
            while (ls >> ref) {
                const auto slash = ref.find('/');
                const std::string head = slash == std::string::npos ? ref : ref.substr(0, slash);
                long idx = 0;
                try {
                    idx = std::stol(head);
                } catch (...) {
                    fail(path, "malformed face reference '" + ref + "'");
                }
                if (idx < 1) fail(path, "OBJ face indices must be positive 1-based");
                poly.push_back(static_cast<int>(idx - 1));
            }
            if (poly.size() < 3) fail(path, "face with fewer than 3 vertices");
            for (std::size_t k = 2; k < poly.size(); ++k) {
                tris.push_back({poly[0], poly[k - 1], poly[k]});
            }
        }
        // all other records (vn, vt, usemtl, ...) are ignored
    }
    if (verts.empty() || tris.empty()) fail(path, "OBJ has no usable geometry");
    return TriMesh(std::move(verts), std::move(tris));
}

}  // namespace

PointCloud read_point_cloud(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "xyz" || ext == "txt") return read_xyz(path);
    if (ext == "ply") {
        auto contents = read_ply(path, /*need_faces=*/false);
        if (contents.vertices.empty()) fail(path, "PLY has no vertices");
        return PointCloud(std::move(contents.vertices));
    }
    fail(path, "unsupported point cloud format '." + ext + "'");
}

TriMesh read_mesh(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == "obj") return read_obj(path);
    if (ext == "ply") {
        auto contents = read_ply(path, /*need_faces=*/true);
        return TriMesh(std::move(contents.vertices), std::move(contents.faces));
    }
    fail(path, "unsupported mesh format '." + ext + "'");
}

std::string obj_face_block(std::span<const std::array<int, 3>> triangles) {
    std::string out;
    out.reserve(triangles.size() * 16);
    char buf[64];
    for (const auto& t : triangles) {
        std::snprintf(buf, sizeof(buf), "f %d %d %d\n", t[0] + 1, t[1] + 1, t[2] + 1);
        out += buf;
    }
    return out;
}

void write_obj(const std::string& path, std::span<const Vec3> vertices,
               std::span<const std::array<int, 3>> triangles) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open file for writing");
    char buf[128];
    for (const Vec3& v : vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    out << obj_face_block(triangles);
    if (!out) fail(path, "write failed");
}

void write_obj(const std::string& path, const TriMesh& mesh) {
    write_obj(path, mesh.vertices, mesh.triangles);
}

void write_xyz(const std::string& path, std::span<const Vec3> points) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(path, "cannot open file for writing");
    char buf[128];
    for (const Vec3& p : points) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
        out << buf;
    }
    if (!out) fail(path, "write failed");
}

}  // namespace defgrid
