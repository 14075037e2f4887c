#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "forge/mesh.hpp"

namespace forge {

// Per-joint axis-angle rotations, radians.
struct PoseParams {
    MatX3 rotations;  // J x 3

    static PoseParams identity(int joints) {
        PoseParams p;
        p.rotations = MatX3::Zero(joints, 3);
        return p;
    }
    Eigen::Index joint_count() const { return rotations.rows(); }
};

struct ShapeParams {
    Eigen::Matrix<double, 10, 1> coefficients = Eigen::Matrix<double, 10, 1>::Zero();
};

// Skinned template body: rest geometry, skeleton, and skinning weights.
// shape_basis, when present, is (V*3) x 10 with vertex-major rows
// (v0.x, v0.y, v0.z, v1.x, ...).
struct SkinnedBodyModel {
    MatX3 template_vertices;
    FacesX3 faces;
    MatX3 joint_positions;          // J x 3, rest pose, world coordinates
    std::vector<int> joint_parents; // -1 marks the single root
    MatX skin_weights;              // V x J, rows sum to 1
    MatX shape_basis;               // (V*3) x 10, or empty

    Eigen::Index vertex_count() const { return template_vertices.rows(); }
    Eigen::Index joint_count() const { return joint_positions.rows(); }
    void validate() const;
};

// Axis-angle to rotation matrix (Rodrigues).
Mat3 rodrigues(const Vec3& axis_angle);

// Per-joint global transforms for a pose: forward kinematics over the parent
// tree, composed with the inverse rest transform so the identity pose maps
// every vertex to itself.
std::vector<Mat4> skinning_transforms(const SkinnedBodyModel& model, const PoseParams& pose);

// Linear blend skinning of the (shape-displaced) template.
Mesh lbs(const SkinnedBodyModel& model, const PoseParams& pose, const ShapeParams& shape,
         Exec exec = Exec::parallel);

// Frame-wise lbs with shared faces.
std::vector<Mesh> motion_to_meshes(const SkinnedBodyModel& model,
                                   std::span<const PoseParams> poses, const ShapeParams& shape,
                                   Exec exec = Exec::parallel);

// Shaped template vertices (template + shape_basis * beta), rest pose.
MatX3 shaped_template(const SkinnedBodyModel& model, const ShapeParams& shape);

// Low-poly articulated humanoid (8 joints, < 400 vertices) with smooth
// distance-based weights. Entirely deterministic.
SkinnedBodyModel make_toy_body();

// Midpoint-subdivides the template, carrying skin weights (renormalized) and
// the shape basis.
SkinnedBodyModel subdivide_body(const SkinnedBodyModel& model, int levels);

// JSON manifest + raw little-endian arrays; same layout for the toy body and
// externally converted models.
SkinnedBodyModel load_body(const std::filesystem::path& manifest_path);
void save_body(const std::filesystem::path& manifest_path, const SkinnedBodyModel& model);

}  // namespace forge
