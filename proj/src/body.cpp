#include "forge/body.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "forge/binary_io.hpp"

namespace forge {

using nlohmann::json;

void SkinnedBodyModel::validate() const {
    const auto v = vertex_count();
    const auto j = joint_count();
    validate_mesh(Mesh{template_vertices, faces, {}});
    if (static_cast<Eigen::Index>(joint_parents.size()) != j)
        throw std::invalid_argument("body: joint_parents size != joint count");
    if (skin_weights.rows() != v || skin_weights.cols() != j)
        throw std::invalid_argument("body: skin_weights must be V x J");
    if (shape_basis.size() > 0 && (shape_basis.rows() != v * 3 || shape_basis.cols() != 10))
        throw std::invalid_argument("body: shape_basis must be (V*3) x 10");

    int roots = 0;
    for (Eigen::Index k = 0; k < j; ++k) {
        const int p = joint_parents[k];
        if (p == -1) {
            ++roots;
            continue;
        }
        if (p < 0 || p >= j) throw std::invalid_argument("body: parent index out of range");
        if (p >= k)
            throw std::invalid_argument(
                "body: joints must be topologically ordered (parent before child)");
    }
    if (roots != 1) throw std::invalid_argument("body: expected exactly one root joint");

    for (Eigen::Index r = 0; r < v; ++r) {
        if (skin_weights.row(r).minCoeff() < -1e-12)
            throw std::invalid_argument("body: negative skin weight at vertex " + std::to_string(r));
        if (std::abs(skin_weights.row(r).sum() - 1.0) > 1e-6)
            throw std::invalid_argument("body: skin weights of vertex " + std::to_string(r) +
                                        " do not sum to 1");
    }
}

Mat3 rodrigues(const Vec3& axis_angle) {
    const double theta = axis_angle.norm();
    if (theta < 1e-12) {
        Mat3 r = Mat3::Identity();
        r(0, 1) = -axis_angle.z();
        r(0, 2) = axis_angle.y();
        r(1, 0) = axis_angle.z();
        r(1, 2) = -axis_angle.x();
        r(2, 0) = -axis_angle.y();
        r(2, 1) = axis_angle.x();
        return r;
    }
    const Vec3 axis = axis_angle / theta;
    Mat3 k;
    k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * (k * k);
}

std::vector<Mat4> skinning_transforms(const SkinnedBodyModel& model, const PoseParams& pose) {
    const auto j = model.joint_count();
    if (pose.joint_count() != j)
        throw std::invalid_argument("lbs: pose has " + std::to_string(pose.joint_count()) +
                                    " joints, model has " + std::to_string(j));

    std::vector<Mat4> global(j);
    for (Eigen::Index k = 0; k < j; ++k) {
        const int parent = model.joint_parents[k];
        const Vec3 offset = parent < 0
                                ? Vec3(model.joint_positions.row(k))
                                : Vec3(model.joint_positions.row(k) - model.joint_positions.row(parent));
        Mat4 local = Mat4::Identity();
        local.topLeftCorner<3, 3>() = rodrigues(pose.rotations.row(k));
        local.topRightCorner<3, 1>() = offset;
        global[k] = parent < 0 ? local : Mat4(global[parent] * local);
    }
    // Compose with the inverse rest transform (a pure translation to the rest
    // joint position) so the identity pose is a fixed point.
    for (Eigen::Index k = 0; k < j; ++k) {
        Mat4 inv_rest = Mat4::Identity();
        inv_rest.topRightCorner<3, 1>() = -model.joint_positions.row(k).transpose();
        global[k] = global[k] * inv_rest;
    }
    return global;
}

MatX3 shaped_template(const SkinnedBodyModel& model, const ShapeParams& shape) {
    MatX3 verts = model.template_vertices;
    if (model.shape_basis.size() > 0) {
        const Vec delta = model.shape_basis * shape.coefficients;
        verts += Eigen::Map<const MatX3>(delta.data(), verts.rows(), 3);
    }
    return verts;
}

Mesh lbs(const SkinnedBodyModel& model, const PoseParams& pose, const ShapeParams& shape,
         Exec exec) {
    const auto transforms = skinning_transforms(model, pose);
    const MatX3 rest = shaped_template(model, shape);
    const auto v = model.vertex_count();
    const auto j = model.joint_count();

    Mesh out;
    out.vertices.resize(v, 3);
    out.faces = model.faces;
    parallel_for(v, exec, [&](std::int64_t i) {
        Eigen::Vector4d h;
        h << rest(i, 0), rest(i, 1), rest(i, 2), 1.0;
        Eigen::Vector4d acc = Eigen::Vector4d::Zero();
        for (Eigen::Index k = 0; k < j; ++k) {
            const double w = model.skin_weights(i, k);
            if (w != 0.0) acc += w * (transforms[k] * h);
        }
        out.vertices.row(i) = acc.head<3>();
    });
    return out;
}

std::vector<Mesh> motion_to_meshes(const SkinnedBodyModel& model,
                                   std::span<const PoseParams> poses, const ShapeParams& shape,
                                   Exec exec) {
    std::vector<Mesh> meshes;
    meshes.reserve(poses.size());
    for (const auto& pose : poses) meshes.push_back(lbs(model, pose, shape, exec));
    return meshes;
}

// ---------------------------------------------------------------------------
// Toy body

namespace {

// Closed capped cylinder between two points, n-gon cross-section, `rings`
// internal rings. Appends into the mesh arrays.
void append_tube(std::vector<Vec3>& verts, std::vector<std::array<int, 3>>& faces, const Vec3& a,
                 const Vec3& b, double radius, int segments, int rings) {
    const int base = static_cast<int>(verts.size());
    const Vec3 axis = (b - a).normalized();
    Vec3 u = std::abs(axis.z()) < 0.9 ? axis.cross(Vec3::UnitZ()).normalized()
                                      : axis.cross(Vec3::UnitX()).normalized();
    const Vec3 w = axis.cross(u);

    for (int r = 0; r <= rings; ++r) {
        const double t = static_cast<double>(r) / rings;
        const Vec3 center = a + t * (b - a);
        for (int s = 0; s < segments; ++s) {
            const double ang = 2.0 * M_PI * s / segments;
            verts.push_back(center + radius * (std::cos(ang) * u + std::sin(ang) * w));
        }
    }
    const int cap_a = static_cast<int>(verts.size());
    verts.push_back(a);
    const int cap_b = cap_a + 1;
    verts.push_back(b);

    auto ring_vertex = [&](int r, int s) { return base + r * segments + (s % segments); };
    for (int r = 0; r < rings; ++r)
        for (int s = 0; s < segments; ++s) {
            const int v00 = ring_vertex(r, s), v01 = ring_vertex(r, s + 1);
            const int v10 = ring_vertex(r + 1, s), v11 = ring_vertex(r + 1, s + 1);
            faces.push_back({v00, v10, v01});
            faces.push_back({v01, v10, v11});
        }
    for (int s = 0; s < segments; ++s) {
        faces.push_back({cap_a, ring_vertex(0, s), ring_vertex(0, s + 1)});
        faces.push_back({cap_b, ring_vertex(rings, s + 1), ring_vertex(rings, s)});
    }
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double denom = ab.squaredNorm();
    double t = denom > 0 ? (p - a).dot(ab) / denom : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

}  // namespace

SkinnedBodyModel make_toy_body() {
    // Joints: 0 root (pelvis), 1 spine, 2 neck, 3 head, 4/5 shoulders, 6/7 hips.
    const Vec3 pelvis(0, 0.95, 0), spine(0, 1.20, 0), neck(0, 1.45, 0), head(0, 1.52, 0);
    const Vec3 l_shoulder(0.19, 1.40, 0), r_shoulder(-0.19, 1.40, 0);
    const Vec3 l_hip(0.09, 0.92, 0), r_hip(-0.09, 0.92, 0);
    const Vec3 head_top(0, 1.72, 0);
    const Vec3 l_wrist(0.26, 0.92, 0), r_wrist(-0.26, 0.92, 0);
    const Vec3 l_ankle(0.10, 0.06, 0), r_ankle(-0.10, 0.06, 0);

    SkinnedBodyModel model;
    model.joint_positions.resize(8, 3);
    model.joint_positions << pelvis.transpose(), spine.transpose(), neck.transpose(),
        head.transpose(), l_shoulder.transpose(), r_shoulder.transpose(), l_hip.transpose(),
        r_hip.transpose();
    model.joint_parents = {-1, 0, 1, 2, 1, 1, 0, 0};

    std::vector<Vec3> verts;
    std::vector<std::array<int, 3>> faces;
    append_tube(verts, faces, Vec3(0, 0.88, 0), Vec3(0, 1.46, 0), 0.155, 8, 3);  // torso
    append_tube(verts, faces, Vec3(0, 1.50, 0), head_top, 0.085, 8, 2);          // head
    append_tube(verts, faces, l_shoulder, l_wrist, 0.045, 6, 3);                 // arms
    append_tube(verts, faces, r_shoulder, r_wrist, 0.045, 6, 3);
    append_tube(verts, faces, l_hip, l_ankle, 0.062, 6, 4);                      // legs
    append_tube(verts, faces, r_hip, r_ankle, 0.062, 6, 4);

    const auto nv = static_cast<Eigen::Index>(verts.size());
    model.template_vertices.resize(nv, 3);
    for (Eigen::Index i = 0; i < nv; ++i) model.template_vertices.row(i) = verts[i];
    model.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t i = 0; i < faces.size(); ++i)
        model.faces.row(static_cast<Eigen::Index>(i)) << faces[i][0], faces[i][1], faces[i][2];

    // Influence segment per joint; weights fall off smoothly with distance.
    const std::array<std::pair<Vec3, Vec3>, 8> bones = {{
        {pelvis, spine},
        {spine, neck},
        {neck, head},
        {head, head_top},
        {l_shoulder, l_wrist},
        {r_shoulder, r_wrist},
        {l_hip, l_ankle},
        {r_hip, r_ankle},
    }};
    const double falloff = 0.09;
    model.skin_weights.resize(nv, 8);
    for (Eigen::Index i = 0; i < nv; ++i) {
        const Vec3 p = model.template_vertices.row(i);
        double total = 0;
        for (int k = 0; k < 8; ++k) {
            const double d = point_segment_distance(p, bones[k].first, bones[k].second);
            const double w = std::exp(-(d * d) / (falloff * falloff));
            model.skin_weights(i, k) = w;
            total += w;
        }
        model.skin_weights.row(i) /= total;
    }
    model.validate();
    return model;
}

SkinnedBodyModel subdivide_body(const SkinnedBodyModel& model, int levels) {
    if (levels <= 0) return model;
    // Carry weights and shape basis in one attribute block.
    const auto v = model.vertex_count();
    const auto j = model.joint_count();
    const bool has_basis = model.shape_basis.size() > 0;
    MatX attrs(v, j + (has_basis ? 30 : 0));
    attrs.leftCols(j) = model.skin_weights;
    if (has_basis)
        for (Eigen::Index i = 0; i < v; ++i)
            for (int c = 0; c < 3; ++c)
                attrs.block(i, j + c * 10, 1, 10) = model.shape_basis.row(i * 3 + c);

    auto result = subdivide(Mesh{model.template_vertices, model.faces, {}}, levels, &attrs, false);

    SkinnedBodyModel out;
    out.template_vertices = result.mesh.vertices;
    out.faces = result.mesh.faces;
    out.joint_positions = model.joint_positions;
    out.joint_parents = model.joint_parents;
    const auto nv = result.mesh.vertex_count();
    out.skin_weights = result.attributes.leftCols(j);
    for (Eigen::Index i = 0; i < nv; ++i) {
        const double s = out.skin_weights.row(i).sum();
        if (s > 0) out.skin_weights.row(i) /= s;
    }
    if (has_basis) {
        out.shape_basis.resize(nv * 3, 10);
        for (Eigen::Index i = 0; i < nv; ++i)
            for (int c = 0; c < 3; ++c)
                out.shape_basis.row(i * 3 + c) = result.attributes.block(i, j + c * 10, 1, 10);
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Manifest I/O

namespace {

struct ArrayRef {
    std::filesystem::path file;
    std::vector<Eigen::Index> shape;
};

ArrayRef parse_array_ref(const json& manifest, const std::string& field,
                         const std::filesystem::path& dir) {
    if (!manifest.contains(field)) throw DataError("body manifest: missing array '" + field + "'");
    const auto& node = manifest.at(field);
    ArrayRef ref;
    try {
        ref.file = dir / node.at("file").get<std::string>();
        for (const auto& d : node.at("shape")) ref.shape.push_back(d.get<Eigen::Index>());
    } catch (const json::exception& e) {
        throw DataError("body manifest: field '" + field + "': " + e.what());
    }
    return ref;
}

std::size_t element_count(const ArrayRef& ref) {
    std::size_t n = 1;
    for (auto d : ref.shape) n *= static_cast<std::size_t>(d);
    return n;
}

void expect_rank(const ArrayRef& ref, const std::string& field, std::size_t rank) {
    if (ref.shape.size() != rank)
        throw DataError("body manifest: '" + field + "' must have rank " + std::to_string(rank));
}

}  // namespace

SkinnedBodyModel load_body(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open body manifest: " + manifest_path.string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("invalid body manifest " + manifest_path.string() + ": " + e.what());
    }
    const auto dir = manifest_path.parent_path();

    const auto tmpl = parse_array_ref(manifest, "template_vertices", dir);
    expect_rank(tmpl, "template_vertices", 2);
    const auto faces = parse_array_ref(manifest, "faces", dir);
    expect_rank(faces, "faces", 2);
    const auto joints = parse_array_ref(manifest, "joint_positions", dir);
    expect_rank(joints, "joint_positions", 2);
    const auto parents = parse_array_ref(manifest, "joint_parents", dir);
    expect_rank(parents, "joint_parents", 1);
    const auto weights = parse_array_ref(manifest, "skin_weights", dir);
    expect_rank(weights, "skin_weights", 2);

    if (tmpl.shape[1] != 3) throw DataError("body manifest: 'template_vertices' must be (V, 3)");
    if (faces.shape[1] != 3) throw DataError("body manifest: 'faces' must be (F, 3)");
    if (joints.shape[1] != 3) throw DataError("body manifest: 'joint_positions' must be (J, 3)");
    const auto v = tmpl.shape[0];
    const auto j = joints.shape[0];
    if (parents.shape[0] != j)
        throw DataError("body manifest: 'joint_parents' length must equal joint count");
    if (weights.shape[0] != v || weights.shape[1] != j)
        throw DataError("body manifest: 'skin_weights' must be (V, J)");

    SkinnedBodyModel model;
    {
        const auto raw = read_f32(tmpl.file, element_count(tmpl));
        model.template_vertices.resize(v, 3);
        for (std::size_t i = 0; i < raw.size(); ++i) model.template_vertices.data()[i] = raw[i];
    }
    {
        const auto raw = read_i32(faces.file, element_count(faces));
        model.faces.resize(faces.shape[0], 3);
        for (std::size_t i = 0; i < raw.size(); ++i) model.faces.data()[i] = raw[i];
    }
    {
        const auto raw = read_f32(joints.file, element_count(joints));
        model.joint_positions.resize(j, 3);
        for (std::size_t i = 0; i < raw.size(); ++i) model.joint_positions.data()[i] = raw[i];
    }
    {
        const auto raw = read_i32(parents.file, element_count(parents));
        model.joint_parents.assign(raw.begin(), raw.end());
    }
    {
        const auto raw = read_f32(weights.file, element_count(weights));
        model.skin_weights.resize(v, j);
        for (std::size_t i = 0; i < raw.size(); ++i) model.skin_weights.data()[i] = raw[i];
    }
    if (manifest.contains("shape_basis")) {
        const auto basis = parse_array_ref(manifest, "shape_basis", dir);
        expect_rank(basis, "shape_basis", 3);
        if (basis.shape[0] != v || basis.shape[1] != 3 || basis.shape[2] != 10)
            throw DataError("body manifest: 'shape_basis' must be (V, 3, 10)");
        const auto raw = read_f32(basis.file, element_count(basis));
        model.shape_basis.resize(v * 3, 10);
        for (std::size_t i = 0; i < raw.size(); ++i) model.shape_basis.data()[i] = raw[i];
    }

    try {
        model.validate();
    } catch (const std::invalid_argument& e) {
        throw DataError("body manifest " + manifest_path.string() + ": " + e.what());
    }
    return model;
}

void save_body(const std::filesystem::path& manifest_path, const SkinnedBodyModel& model) {
    model.validate();
    const auto dir = manifest_path.parent_path();
    std::filesystem::create_directories(dir);

    const auto v = model.vertex_count();
    const auto j = model.joint_count();
    write_f32(dir / "template_vertices.f32", model.template_vertices.data(),
              static_cast<std::size_t>(v) * 3);
    write_i32(dir / "faces.i32", model.faces.data(), static_cast<std::size_t>(model.faces.size()));
    write_f32(dir / "joint_positions.f32", model.joint_positions.data(),
              static_cast<std::size_t>(j) * 3);
    write_i32(dir / "joint_parents.i32", model.joint_parents.data(),
              model.joint_parents.size());
    write_f32(dir / "skin_weights.f32", model.skin_weights.data(),
              static_cast<std::size_t>(model.skin_weights.size()));

    json manifest = {
        {"template_vertices", {{"file", "template_vertices.f32"}, {"shape", {v, 3}}}},
        {"faces", {{"file", "faces.i32"}, {"shape", {model.faces.rows(), 3}}}},
        {"joint_positions", {{"file", "joint_positions.f32"}, {"shape", {j, 3}}}},
        {"joint_parents", {{"file", "joint_parents.i32"}, {"shape", {j}}}},
        {"skin_weights", {{"file", "skin_weights.f32"}, {"shape", {v, j}}}},
    };
    if (model.shape_basis.size() > 0) {
        write_f32(dir / "shape_basis.f32", model.shape_basis.data(),
                  static_cast<std::size_t>(model.shape_basis.size()));
        manifest["shape_basis"] = {{"file", "shape_basis.f32"}, {"shape", {v, 3, 10}}};
    }

    std::ofstream out(manifest_path);
    if (!out) throw DataError("cannot open for writing: " + manifest_path.string());
    out << manifest.dump(2) << "\n";
}

}  // namespace forge
