#include "defgrid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace defgrid {

namespace {

std::size_t cube(int r) {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(r) * static_cast<std::size_t>(r);
}

GridLevel from_active_mask(int level, const std::vector<std::uint8_t>& active) {
    GridLevel out;
    out.level = level;
    out.resolution = GridLevel::resolution_for(level);
    const int r = out.resolution;
    out.slot.assign(cube(r), -1);
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            for (int k = 0; k < r; ++k) {
                const std::size_t lin = static_cast<std::size_t>((i * r + j) * r + k);
                if (!active[lin]) continue;
                out.slot[lin] = static_cast<std::int32_t>(out.coords.size());
                out.coords.emplace_back(i, j, k);
            }
        }
    }
    out.params.assign(out.coords.size(), Transform6{});
    return out;
}

// Separable Chebyshev dilation by kPruneDilation along each axis in place.
void dilate(std::vector<std::uint8_t>& mask, int r) {
    std::vector<std::uint8_t> tmp(mask.size());
    auto pass = [&](int stride_sel) {
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < r; ++j) {
                for (int k = 0; k < r; ++k) {
                    int c[3] = {i, j, k};
                    std::uint8_t v = 0;
                    for (int d = -kPruneDilation; d <= kPruneDilation && !v; ++d) {
                        int cc[3] = {c[0], c[1], c[2]};
                        cc[stride_sel] += d;
                        if (cc[stride_sel] < 0 || cc[stride_sel] >= r) continue;
                        v = mask[static_cast<std::size_t>((cc[0] * r + cc[1]) * r + cc[2])];
                    }
                    tmp[static_cast<std::size_t>((i * r + j) * r + k)] = v;
                }
            }
        }
        mask.swap(tmp);
    };
    pass(0);
    pass(1);
    pass(2);
}

void mark_occupancy(std::vector<std::uint8_t>& mask, int r, const PointCloud& cloud) {
    if (r == 1) {
        mask[0] = 1;
        return;
    }
    const double inv_h = (r - 1) / 2.0;
    for (const Vec3& p : cloud.points) {
        int c[3];
        for (int a = 0; a < 3; ++a) {
            const long idx = std::lround((p[a] + 1.0) * inv_h);
            c[a] = static_cast<int>(std::clamp<long>(idx, 0, r - 1));
        }
        mask[static_cast<std::size_t>((c[0] * r + c[1]) * r + c[2])] = 1;
    }
}

GridLevel build_pruned_level(int level, const PointCloud& a, const PointCloud& b) {
    const int r = GridLevel::resolution_for(level);
    std::vector<std::uint8_t> mask(cube(r), 0);
    mark_occupancy(mask, r, a);
    mark_occupancy(mask, r, b);
    if (r > 1) dilate(mask, r);
    return from_active_mask(level, mask);
}

}  // namespace

GridLevel GridLevel::dense(int level) {
    GridLevel out;
    out.level = level;
    out.resolution = resolution_for(level);
    const int r = out.resolution;
    out.slot.resize(cube(r));
    out.coords.reserve(cube(r));
    std::int32_t next = 0;
    for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
            for (int k = 0; k < r; ++k) {
                out.slot[static_cast<std::size_t>((i * r + j) * r + k)] = next++;
                out.coords.emplace_back(i, j, k);
            }
        }
    }
    out.params.assign(out.coords.size(), Transform6{});
    return out;
}

Vec3 GridLevel::vertex_position(const Vec3i& c) const {
    if (resolution == 1) return Vec3(0.0, 0.0, 0.0);
    const double h = spacing();
    return Vec3(-1.0 + h * c.x(), -1.0 + h * c.y(), -1.0 + h * c.z());
}

std::size_t DeformationGrid::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : levels) n += static_cast<std::size_t>(l.active_count()) * 6;
    return n;
}

void DeformationGrid::zero_params() {
    for (auto& l : levels) std::fill(l.params.begin(), l.params.end(), Transform6{});
}

Vec3 clamp_to_domain(const Vec3& x) {
    return Vec3(std::clamp(x.x(), -1.0, 1.0), std::clamp(x.y(), -1.0, 1.0),
                std::clamp(x.z(), -1.0, 1.0));
}

LevelStencil make_stencil(const GridLevel& level, const Vec3& clamped) {
    LevelStencil st;
    if (level.resolution == 1) {
        st.count = 1;
        st.slots[0] = level.slot_at(0, 0, 0);
        st.weights[0] = 1.0;
        st.weight_grads[0] = Vec3::Zero();
        return st;
    }
    const int r = level.resolution;
    const double h = level.spacing();
    const double inv_h = 1.0 / h;
    int base[3];
    double u[3];
    for (int a = 0; a < 3; ++a) {
        const double s = (clamped[a] + 1.0) * inv_h;
        int c = static_cast<int>(std::floor(s));
        c = std::clamp(c, 0, r - 2);
        base[a] = c;
        u[a] = s - c;
    }
    st.count = 8;
    for (int corner = 0; corner < 8; ++corner) {
        const int di = (corner >> 2) & 1;
        const int dj = (corner >> 1) & 1;
        const int dk = corner & 1;
        const double wx = di ? u[0] : 1.0 - u[0];
        const double wy = dj ? u[1] : 1.0 - u[1];
        const double wz = dk ? u[2] : 1.0 - u[2];
        st.slots[corner] = level.slot_at(base[0] + di, base[1] + dj, base[2] + dk);
        st.weights[corner] = wx * wy * wz;
        st.weight_grads[corner] = Vec3((di ? 1.0 : -1.0) * inv_h * wy * wz,
                                       (dj ? 1.0 : -1.0) * inv_h * wx * wz,
                                       (dk ? 1.0 : -1.0) * inv_h * wx * wy);
    }
    return st;
}

Transform6 interpolate(const DeformationGrid& grid, const Vec3& x) {
    const Vec3 xc = clamp_to_domain(x);
    Transform6 acc;
    for (const GridLevel& level : grid.levels) {
        const LevelStencil st = make_stencil(level, xc);
        for (int c = 0; c < st.count; ++c) {
            const std::int32_t s = st.slots[c];
            if (s < 0) continue;
            acc += st.weights[c] * level.params[static_cast<std::size_t>(s)];
        }
    }
    acc *= 1.0 / static_cast<double>(grid.levels.size());
    return acc;
}

Vec3 apply_grid_step(const DeformationGrid& grid, const Vec3& x) {
    const Transform6 tf = interpolate(grid, x);
    return apply_transform(tf, x);
}

DeformationGrid build_pruned_pair(int level_count, const PointCloud& a, const PointCloud& b) {
    if (level_count < 1) throw InputError("level count must be >= 1");
    DeformationGrid grid;
    grid.levels.reserve(static_cast<std::size_t>(level_count));
    for (int l = 1; l <= level_count; ++l) {
        grid.levels.push_back(build_pruned_level(l, a, b));
    }
    return grid;
}

std::vector<DeformationGrid> build_pruned(int level_count, const PointCloudSequence& seq) {
    std::vector<DeformationGrid> out;
    out.reserve(static_cast<std::size_t>(seq.frame_count() - 1));
    for (int t = 0; t + 1 < seq.frame_count(); ++t) {
        out.push_back(build_pruned_pair(level_count, seq.frames[static_cast<std::size_t>(t)],
                                        seq.frames[static_cast<std::size_t>(t + 1)]));
    }
    return out;
}

int GridSequence::grid_index_for_frame(int t) const {
    if (t < 0 || t >= frame_count || t == keyframe) {
        throw InputError("no transition grid targets frame " + std::to_string(t));
    }
    if (t > keyframe) return t - keyframe - 1;
    return forward_count() + (keyframe - t - 1);
}

std::size_t GridSequence::parameter_count() const {
    std::size_t n = 0;
    for (const auto& g : grids) n += g.parameter_count();
    return n;
}

std::size_t GridSequence::dense_parameter_count() const {
    std::size_t n = 0;
    for (const auto& g : grids) {
        for (const auto& l : g.levels) {
            n += cube(l.resolution) * 6;
        }
    }
    return n;
}

void GridSequence::zero_params() {
    for (auto& g : grids) g.zero_params();
}

GridSequence GridSequence::build(const PointCloudSequence& seq, int keyframe, int level_count,
                                 bool multi_resolution) {
    if (keyframe < 0 || keyframe >= seq.frame_count()) {
        throw InputError("keyframe out of range");
    }
    GridSequence gs;
    gs.keyframe = keyframe;
    gs.frame_count = seq.frame_count();

    auto build_pair = [&](int lo, int hi, TimeDirection dir) {
        DeformationGrid grid;
        if (multi_resolution) {
            grid = build_pruned_pair(level_count, seq.frames[static_cast<std::size_t>(lo)],
                                     seq.frames[static_cast<std::size_t>(hi)]);
        } else {
            grid.levels.push_back(build_pruned_level(level_count,
                                                     seq.frames[static_cast<std::size_t>(lo)],
                                                     seq.frames[static_cast<std::size_t>(hi)]));
        }
        grid.direction = dir;
        return grid;
    };

    for (int i = 0; i < gs.forward_count(); ++i) {
        gs.grids.push_back(build_pair(keyframe + i, keyframe + i + 1, TimeDirection::Forward));
    }
    for (int j = 0; j < gs.backward_count(); ++j) {
        gs.grids.push_back(build_pair(keyframe - j - 1, keyframe - j, TimeDirection::Backward));
    }
    return gs;
}

std::vector<Vec3> deform_points(const GridSequence& grids, std::span<const Vec3> base,
                                int target_frame) {
    if (target_frame < 0 || target_frame >= grids.frame_count) {
        throw InputError("target frame out of range");
    }
    std::vector<Vec3> pos(base.begin(), base.end());
    if (target_frame == grids.keyframe) return pos;
    const int step = target_frame > grids.keyframe ? 1 : -1;
    for (int t = grids.keyframe + step; ; t += step) {
        const DeformationGrid& g = grids.grid_for_frame(t);
        for (Vec3& p : pos) p = apply_grid_step(g, p);
        if (t == target_frame) break;
    }
    return pos;
}

namespace {
constexpr char kCheckpointMagic[4] = {'D', 'G', 'C', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw InputError(path + ": truncated grid checkpoint");
    return v;
}
}  // namespace

void save_grid_checkpoint(const std::string& path, const GridSequence& grids) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(path + ": cannot open for writing");
    out.write(kCheckpointMagic, 4);
    put(out, kCheckpointVersion);
    put(out, static_cast<std::uint32_t>(grids.keyframe));
    put(out, static_cast<std::uint32_t>(grids.frame_count));
    put(out, static_cast<std::uint32_t>(grids.grids.size()));
    for (const auto& g : grids.grids) {
        put(out, static_cast<std::uint8_t>(g.direction));
        put(out, static_cast<std::uint32_t>(g.levels.size()));
        for (const auto& l : g.levels) {
            put(out, static_cast<std::uint32_t>(l.level));
            put(out, static_cast<std::uint32_t>(l.resolution));
            put(out, static_cast<std::uint64_t>(l.coords.size()));
            for (const auto& c : l.coords) {
                put(out, static_cast<std::uint16_t>(c.x()));
                put(out, static_cast<std::uint16_t>(c.y()));
                put(out, static_cast<std::uint16_t>(c.z()));
            }
            for (const auto& p : l.params) {
                for (int a = 0; a < 3; ++a) put(out, p.z[a]);
                for (int a = 0; a < 3; ++a) put(out, p.t[a]);
            }
        }
    }
    if (!out) throw InputError(path + ": write failed");
}

GridSequence load_grid_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(path + ": cannot open");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw InputError(path + ": not a grid checkpoint");
    }
    const auto version = get<std::uint32_t>(in, path);
    if (version != kCheckpointVersion) {
        throw InputError(path + ": unsupported checkpoint version " + std::to_string(version));
    }
    GridSequence gs;
    gs.keyframe = static_cast<int>(get<std::uint32_t>(in, path));
    gs.frame_count = static_cast<int>(get<std::uint32_t>(in, path));
    const auto grid_count = get<std::uint32_t>(in, path);
    gs.grids.resize(grid_count);
    for (auto& g : gs.grids) {
        g.direction = static_cast<TimeDirection>(get<std::uint8_t>(in, path));
        const auto level_count = get<std::uint32_t>(in, path);
        g.levels.resize(level_count);
        for (auto& l : g.levels) {
            l.level = static_cast<int>(get<std::uint32_t>(in, path));
            l.resolution = static_cast<int>(get<std::uint32_t>(in, path));
            const auto active = get<std::uint64_t>(in, path);
            l.slot.assign(cube(l.resolution), -1);
            l.coords.resize(active);
            for (auto& c : l.coords) {
                c.x() = get<std::uint16_t>(in, path);
                c.y() = get<std::uint16_t>(in, path);
                c.z() = get<std::uint16_t>(in, path);
            }
            l.params.resize(active);
            for (auto& p : l.params) {
                for (int a = 0; a < 3; ++a) p.z[a] = get<double>(in, path);
                for (int a = 0; a < 3; ++a) p.t[a] = get<double>(in, path);
            }
            for (std::size_t s = 0; s < l.coords.size(); ++s) {
                const auto& c = l.coords[s];
                if (c.x() >= l.resolution || c.y() >= l.resolution || c.z() >= l.resolution) {
                    throw InputError(path + ": checkpoint coordinate out of range");
                }
                l.slot[static_cast<std::size_t>((c.x() * l.resolution + c.y()) * l.resolution +
                                                c.z())] = static_cast<std::int32_t>(s);
            }
        }
    }
    return gs;
}

}  // namespace defgrid
