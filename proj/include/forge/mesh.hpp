#pragma once

#include <optional>

#include "forge/common.hpp"

namespace forge {

// Triangle mesh; colors are optional per-vertex RGB in [0,1].
struct Mesh {
    MatX3 vertices;
    FacesX3 faces;
    MatX3 colors;  // 0 rows when absent

    Eigen::Index vertex_count() const { return vertices.rows(); }
    Eigen::Index face_count() const { return faces.rows(); }
    bool has_colors() const { return colors.rows() == vertices.rows() && vertices.rows() > 0; }
};

// Face indices in range, no degenerate faces (repeated indices).
void validate_mesh(const Mesh& mesh);

// Area-weighted vertex normals, unit length. Throws if some vertex has no
// incident face. Parallel and serial paths are bitwise identical.
MatX3 vertex_normals(const Mesh& mesh, Exec exec = Exec::parallel);

struct SubdivideResult {
    Mesh mesh;
    MatX attributes;  // carried per-vertex attributes, empty if none given
};

// Midpoint 1-to-4 subdivision. Carried attributes are averaged over edge
// endpoints; with renormalize_rows the rows are rescaled to sum to one
// (skin weights). Requires a manifold triangle mesh (each edge on <= 2 faces).
SubdivideResult subdivide(const Mesh& mesh, int levels, const MatX* carried_attrs = nullptr,
                          bool renormalize_rows = false);

// Centroid and radius of a bounding sphere (max vertex distance from centroid).
struct BoundingSphere {
    Vec3 center;
    double radius;
};
BoundingSphere bounding_sphere(const Mesh& mesh);

// Deterministic fixture meshes.
Mesh make_tetrahedron();
Mesh make_icosphere(int subdivisions, double radius = 1.0);
// Unit cube centered at origin; the face diagonals all touch vertex 0
// (+0.5,+0.5,+0.5), giving it a symmetric normal.
Mesh make_cube();

}  // namespace forge
