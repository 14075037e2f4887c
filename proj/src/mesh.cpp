#include "forge/mesh.hpp"

#include <array>
#include <cmath>
#include <unordered_map>
#include <vector>

namespace forge {

void validate_mesh(const Mesh& mesh) {
    const auto v = mesh.vertex_count();
    for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
        const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
        if (a < 0 || b < 0 || c < 0 || a >= v || b >= v || c >= v)
            throw std::invalid_argument("mesh: face " + std::to_string(f) +
                                        " references vertex out of range");
        if (a == b || b == c || a == c)
            throw std::invalid_argument("mesh: face " + std::to_string(f) +
                                        " is degenerate (repeated vertex index)");
    }
    if (mesh.colors.rows() != 0 && mesh.colors.rows() != v)
        throw std::invalid_argument("mesh: color count does not match vertex count");
}

MatX3 vertex_normals(const Mesh& mesh, Exec exec) {
    validate_mesh(mesh);
    const auto nv = mesh.vertex_count();
    const auto nf = mesh.face_count();

    // Unnormalized face normals (cross product: length is twice the area).
    MatX3 face_normals(nf, 3);
    parallel_for(nf, exec, [&](std::int64_t f) {
        const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
        const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
        const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
        face_normals.row(f) = (b - a).cross(c - a);
    });

    // Incident faces per vertex in ascending face order, so the parallel
    // accumulation matches the serial one bitwise.
    std::vector<std::vector<int>> incident(nv);
    for (Eigen::Index f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) incident[mesh.faces(f, k)].push_back(static_cast<int>(f));

    MatX3 normals(nv, 3);
    std::vector<std::int8_t> isolated(nv, 0);
    parallel_for(nv, exec, [&](std::int64_t v) {
        if (incident[v].empty()) {
            isolated[v] = 1;
            normals.row(v).setZero();
            return;
        }
        Vec3 sum = Vec3::Zero();
        for (int f : incident[v]) sum += face_normals.row(f).transpose();
        const double n = sum.norm();
        if (n <= 1e-30) {
            // Cancelling incident faces: fall back to the first face normal.
            Vec3 fallback = face_normals.row(incident[v][0]);
            const double fn = fallback.norm();
            normals.row(v) = fn > 0 ? (fallback / fn).transpose().eval() : Vec3::UnitZ().transpose().eval();
            return;
        }
        normals.row(v) = sum / n;
    });
    for (Eigen::Index v = 0; v < nv; ++v)
        if (isolated[v])
            throw std::invalid_argument("vertex_normals: vertex " + std::to_string(v) +
                                        " has no incident face");
    return normals;
}

namespace {

inline std::uint64_t edge_key(int a, int b) {
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
}

SubdivideResult subdivide_once(const Mesh& mesh, const MatX* attrs) {
    const auto nv = mesh.vertex_count();
    const auto nf = mesh.face_count();

    // Manifold check: every edge on at most two faces.
    std::unordered_map<std::uint64_t, int> edge_uses;
    edge_uses.reserve(static_cast<std::size_t>(nf) * 3);
    for (Eigen::Index f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.faces(f, k), b = mesh.faces(f, (k + 1) % 3);
            if (++edge_uses[edge_key(a, b)] > 2)
                throw std::invalid_argument("subdivide: non-manifold edge (" + std::to_string(a) +
                                            "," + std::to_string(b) + ") shared by >2 faces");
        }

    // One new vertex per edge, numbered in deterministic face-scan order.
    std::unordered_map<std::uint64_t, int> midpoint;
    midpoint.reserve(edge_uses.size());
    int next = static_cast<int>(nv);
    for (Eigen::Index f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) {
            const auto key = edge_key(mesh.faces(f, k), mesh.faces(f, (k + 1) % 3));
            if (midpoint.emplace(key, next).second) ++next;
        }
    const int total = next;

    SubdivideResult out;
    out.mesh.vertices.resize(total, 3);
    out.mesh.vertices.topRows(nv) = mesh.vertices;
    if (attrs) {
        out.attributes.resize(total, attrs->cols());
        out.attributes.topRows(nv) = *attrs;
    }
    for (Eigen::Index f = 0; f < nf; ++f)
        for (int k = 0; k < 3; ++k) {
            const int a = mesh.faces(f, k), b = mesh.faces(f, (k + 1) % 3);
            const int m = midpoint[edge_key(a, b)];
            out.mesh.vertices.row(m) = 0.5 * (mesh.vertices.row(a) + mesh.vertices.row(b));
            if (attrs) out.attributes.row(m) = 0.5 * (attrs->row(a) + attrs->row(b));
        }

    out.mesh.faces.resize(nf * 4, 3);
    for (Eigen::Index f = 0; f < nf; ++f) {
        const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
        const int ab = midpoint[edge_key(a, b)];
        const int bc = midpoint[edge_key(b, c)];
        const int ca = midpoint[edge_key(c, a)];
        out.mesh.faces.row(f * 4 + 0) << a, ab, ca;
        out.mesh.faces.row(f * 4 + 1) << ab, b, bc;
        out.mesh.faces.row(f * 4 + 2) << ca, bc, c;
        out.mesh.faces.row(f * 4 + 3) << ab, bc, ca;
    }
    return out;
}

}  // namespace

SubdivideResult subdivide(const Mesh& mesh, int levels, const MatX* carried_attrs,
                          bool renormalize_rows) {
    if (levels <= 0) throw std::invalid_argument("subdivide: levels must be positive");
    validate_mesh(mesh);
    if (carried_attrs && carried_attrs->rows() != mesh.vertex_count())
        throw std::invalid_argument("subdivide: attribute row count does not match vertices");

    SubdivideResult result;
    result.mesh = mesh;
    result.mesh.colors.resize(0, 3);
    if (carried_attrs) result.attributes = *carried_attrs;
    for (int l = 0; l < levels; ++l) {
        result = subdivide_once(result.mesh,
                                result.attributes.size() > 0 ? &result.attributes : nullptr);
    }
    if (renormalize_rows && result.attributes.size() > 0) {
        for (Eigen::Index r = 0; r < result.attributes.rows(); ++r) {
            const double s = result.attributes.row(r).sum();
            if (s > 0) result.attributes.row(r) /= s;
        }
    }
    return result;
}

BoundingSphere bounding_sphere(const Mesh& mesh) {
    if (mesh.vertex_count() == 0) throw std::invalid_argument("bounding_sphere: empty mesh");
    BoundingSphere s;
    s.center = mesh.vertices.colwise().mean();
    double r2 = 0;
    for (Eigen::Index v = 0; v < mesh.vertex_count(); ++v)
        r2 = std::max(r2, (mesh.vertices.row(v).transpose() - s.center).squaredNorm());
    s.radius = std::sqrt(r2);
    return s;
}

Mesh make_tetrahedron() {
    Mesh m;
    m.vertices.resize(4, 3);
    m.vertices << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
    m.faces.resize(4, 3);
    m.faces << 0, 2, 1, 0, 1, 3, 0, 3, 2, 1, 2, 3;
    return m;
}

Mesh make_icosphere(int subdivisions, double radius) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    Mesh m;
    m.vertices.resize(12, 3);
    m.vertices << -1, t, 0, 1, t, 0, -1, -t, 0, 1, -t, 0, 0, -1, t, 0, 1, t, 0, -1, -t, 0, 1, -t,
        t, 0, -1, t, 0, 1, -t, 0, -1, -t, 0, 1;
    m.faces.resize(20, 3);
    m.faces << 0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11, 1, 5, 9, 5, 11, 4, 11, 10, 2, 10,
        7, 6, 7, 1, 8, 3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9, 4, 9, 5, 2, 4, 11, 6, 2, 10,
        8, 6, 7, 9, 8, 1;
    for (int s = 0; s < subdivisions; ++s) m = subdivide(m, 1).mesh;
    for (Eigen::Index v = 0; v < m.vertex_count(); ++v)
        m.vertices.row(v) *= radius / m.vertices.row(v).norm();
    return m;
}

Mesh make_cube() {
    Mesh m;
    m.vertices.resize(8, 3);
    // 0:(+,+,+) 1:(-,+,+) 2:(+,-,+) 3:(-,-,+) 4:(+,+,-) 5:(-,+,-) 6:(+,-,-) 7:(-,-,-)
    m.vertices << 0.5, 0.5, 0.5, -0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, -0.5, 0.5, 0.5, 0.5, -0.5,
        -0.5, 0.5, -0.5, 0.5, -0.5, -0.5, -0.5, -0.5, -0.5;
    // Diagonals of the three faces incident to vertex 0 pass through it.
    m.faces.resize(12, 3);
    m.faces << 0, 1, 3, 0, 3, 2,  // +z face, diagonal 0-3
        0, 4, 5, 0, 5, 1,         // +y face, diagonal 0-5
        0, 2, 6, 0, 6, 4,         // +x face, diagonal 0-6
        7, 5, 4, 7, 4, 6,         // -z face
        7, 3, 1, 7, 1, 5,         // -x face
        7, 6, 2, 7, 2, 3;         // -y face
    return m;
}

}  // namespace forge
