#include "forge/render.hpp"

#include <algorithm>
#include <cmath>

namespace forge {

std::vector<CameraPose> sample_camera_poses(int n, Rng& rng, const CameraSampleConfig& config) {
    if (n < 1) throw std::invalid_argument("sample_camera_poses: n must be >= 1");
    std::vector<CameraPose> poses;
    poses.reserve(n);
    for (int i = 0; i < n; ++i) {
        CameraPose pose;
        pose.azimuth = rng.uniform(0.0, 2.0 * M_PI);
        double elevation;
        do {
            elevation = config.elevation_stddev * rng.normal();
        } while (elevation < config.elevation_min || elevation > config.elevation_max);
        pose.elevation = elevation;
        pose.radius = config.radius_scale * config.bounding_radius;
        pose.fov = config.fov;
        pose.look_at = config.look_at;
        poses.push_back(pose);
    }
    return poses;
}

CameraPose frontal_camera(const CameraSampleConfig& config) {
    CameraPose pose;
    pose.radius = config.radius_scale * config.bounding_radius;
    pose.fov = config.fov;
    pose.look_at = config.look_at;
    return pose;
}

void RenderSettings::validate() const {
    if (height < 16 || width < 16)
        throw std::invalid_argument("render settings: height and width must be >= 16");
    if (soft_temperature <= 0) throw std::invalid_argument("render settings: temperature must be > 0");
    if (depth_temperature <= 0)
        throw std::invalid_argument("render settings: depth temperature must be > 0");
    if (ambient < 0 || ambient > 1) throw std::invalid_argument("render settings: ambient in [0,1]");
}

namespace {

constexpr double kSoftBand = 40.0;  // sigmoid(-40) ~ 4e-18: beyond this, no fragment

struct CameraFrame {
    Vec3 eye, right, up, forward;
    double focal_px;  // vertical focal length in pixels
    double cx, cy;
    Vec3 headlight;  // unit vector from look_at toward the camera
};

CameraFrame make_camera_frame(const CameraPose& pose, const RenderSettings& settings) {
    CameraFrame f;
    const Vec3 dir(std::cos(pose.elevation) * std::sin(pose.azimuth), std::sin(pose.elevation),
                   std::cos(pose.elevation) * std::cos(pose.azimuth));
    f.eye = pose.look_at + pose.radius * dir;
    f.forward = (pose.look_at - f.eye).normalized();
    const Vec3 world_up = std::abs(f.forward.y()) > 0.999 ? Vec3::UnitX() : Vec3::UnitY();
    f.right = f.forward.cross(world_up).normalized();
    f.up = f.right.cross(f.forward);
    f.focal_px = 0.5 * settings.height / std::tan(0.5 * pose.fov);
    f.cx = 0.5 * settings.width;
    f.cy = 0.5 * settings.height;
    f.headlight = dir;
    return f;
}

struct FaceData {
    bool valid = false;
    int v[3];
    Eigen::Vector2d proj[3];
    double depth[3];
    double shade = 0.0;
    // Shading backward pieces.
    Vec3 n_hat;
    double n_len = 0.0;
    bool lit = false;
    double x_lo = 0, x_hi = 0, y_lo = 0, y_hi = 0;
};

struct Scene {
    const Mesh* mesh;
    CameraFrame cam;
    RenderSettings settings;
    double tau_px;
    double gamma;  // absolute depth-softmax temperature
    double z_background;
    bool gray;
    std::vector<FaceData> faces;
    std::vector<std::vector<int>> row_faces;
    // Camera-space coordinates per vertex, for the projection Jacobian.
    std::vector<Eigen::Vector3d> cam_coords;
    std::vector<Eigen::Vector2d> proj;
};

Vec3 vertex_color(const Scene& scene, int v) {
    if (scene.gray) return Vec3::Constant(0.5);
    return scene.mesh->colors.row(v);
}

Scene build_scene(const Mesh& mesh, const CameraPose& pose, const RenderSettings& settings,
                  bool gray, Exec exec) {
    settings.validate();
    validate_mesh(mesh);
    if (!gray && !mesh.has_colors())
        throw std::invalid_argument("render: mesh has no per-vertex colors");
    const auto bs = bounding_sphere(mesh);

    Scene scene;
    scene.mesh = &mesh;
    scene.cam = make_camera_frame(pose, settings);
    scene.settings = settings;
    scene.tau_px = settings.soft_temperature * std::max(settings.height, settings.width);
    scene.gamma = settings.depth_temperature * pose.radius;
    scene.gray = gray;

    const double eye_distance = (scene.cam.eye - bs.center).norm();
    if (eye_distance <= bs.radius)
        throw std::invalid_argument("render: camera lies inside the mesh bounding sphere");
    // A virtual fragment behind everything carries the background.
    scene.z_background = eye_distance + 1.5 * bs.radius;

    const auto nv = mesh.vertex_count();
    const double near_clip = std::max(1e-6, 1e-3 * pose.radius);
    scene.cam_coords.resize(nv);
    scene.proj.resize(nv);
    parallel_for(nv, exec, [&](std::int64_t i) {
        const Vec3 rel = Vec3(mesh.vertices.row(i)) - scene.cam.eye;
        const double xc = scene.cam.right.dot(rel);
        const double yc = scene.cam.up.dot(rel);
        const double zc = scene.cam.forward.dot(rel);
        scene.cam_coords[i] = {xc, yc, zc};
        if (zc > near_clip) {
            scene.proj[i] = {scene.cam.cx + scene.cam.focal_px * xc / zc,
                             scene.cam.cy - scene.cam.focal_px * yc / zc};
        } else {
            scene.proj[i] = {0, 0};
        }
    });

    const auto nf = mesh.face_count();
    scene.faces.resize(nf);
    const double band_px = kSoftBand * scene.tau_px;
    parallel_for(nf, exec, [&](std::int64_t fi) {
        FaceData& fd = scene.faces[fi];
        for (int k = 0; k < 3; ++k) fd.v[k] = mesh.faces(fi, k);
        for (int k = 0; k < 3; ++k)
            if (scene.cam_coords[fd.v[k]].z() <= near_clip) return;  // stays invalid
        for (int k = 0; k < 3; ++k) {
            fd.proj[k] = scene.proj[fd.v[k]];
            fd.depth[k] = scene.cam_coords[fd.v[k]].z();
        }
        const Vec3 a = mesh.vertices.row(fd.v[0]);
        const Vec3 b = mesh.vertices.row(fd.v[1]);
        const Vec3 c = mesh.vertices.row(fd.v[2]);
        const Vec3 n = (b - a).cross(c - a);
        fd.n_len = n.norm();
        if (fd.n_len < 1e-30) return;  // degenerate in 3D
        fd.n_hat = n / fd.n_len;
        const double facing = fd.n_hat.dot(scene.cam.headlight);
        fd.lit = facing > 0.0;
        fd.shade =
            scene.settings.ambient + (1.0 - scene.settings.ambient) * std::max(0.0, facing);
        fd.x_lo = std::min({fd.proj[0].x(), fd.proj[1].x(), fd.proj[2].x()}) - band_px;
        fd.x_hi = std::max({fd.proj[0].x(), fd.proj[1].x(), fd.proj[2].x()}) + band_px;
        fd.y_lo = std::min({fd.proj[0].y(), fd.proj[1].y(), fd.proj[2].y()}) - band_px;
        fd.y_hi = std::max({fd.proj[0].y(), fd.proj[1].y(), fd.proj[2].y()}) + band_px;
        fd.valid = true;
    });

    scene.row_faces.resize(settings.height);
    for (Eigen::Index fi = 0; fi < nf; ++fi) {
        const FaceData& fd = scene.faces[fi];
        if (!fd.valid) continue;
        const int y0 = std::max(0, static_cast<int>(std::floor(fd.y_lo - 0.5)));
        const int y1 = std::min(settings.height - 1, static_cast<int>(std::ceil(fd.y_hi - 0.5)));
        for (int y = y0; y <= y1; ++y) scene.row_faces[y].push_back(static_cast<int>(fi));
    }
    return scene;
}

// Signed distance of a point to a projected triangle (positive inside) plus
// the barycentric coordinates used for interpolation: true barycentrics
// inside, coordinates of the nearest boundary point outside.
struct Fragment {
    int face;
    double depth;
    double alpha;
    double sd;
    double bary[3];
    bool inside;
    int feature_edge;  // nearest edge index when outside (edge k = verts k, k+1)
    double feature_t;  // clamped parameter along that edge
};

inline double cross2(const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return u.x() * v.y() - u.y() * v.x();
}

bool compute_fragment(const Scene& scene, const FaceData& fd, int face_id,
                      const Eigen::Vector2d& p, Fragment& frag) {
    const Eigen::Vector2d& a = fd.proj[0];
    const Eigen::Vector2d& b = fd.proj[1];
    const Eigen::Vector2d& c = fd.proj[2];

    const double area2 = cross2(b - a, c - a);
    if (std::abs(area2) < 1e-12) return false;  // edge-on projection

    double e[3] = {cross2(c - b, p - b), cross2(a - c, p - c), cross2(b - a, p - a)};
    const bool inside = area2 > 0 ? (e[0] >= 0 && e[1] >= 0 && e[2] >= 0)
                                  : (e[0] <= 0 && e[1] <= 0 && e[2] <= 0);

    // Nearest edge feature.
    double best_d2 = std::numeric_limits<double>::infinity();
    int best_edge = 0;
    double best_t = 0;
    const Eigen::Vector2d* verts[3] = {&a, &b, &c};
    for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d& u = *verts[k];
        const Eigen::Vector2d& v = *verts[(k + 1) % 3];
        const Eigen::Vector2d uv = v - u;
        const double denom = uv.squaredNorm();
        double t = denom > 0 ? (p - u).dot(uv) / denom : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double d2 = (p - (u + t * uv)).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best_edge = k;
            best_t = t;
        }
    }
    const double dist = std::sqrt(best_d2);
    const double sd = inside ? dist : -dist;
    if (sd <= -kSoftBand * scene.tau_px) return false;

    frag.face = face_id;
    frag.sd = sd;
    frag.alpha = 1.0 / (1.0 + std::exp(-sd / scene.tau_px));
    frag.inside = inside;
    frag.feature_edge = best_edge;
    frag.feature_t = best_t;
    if (inside) {
        frag.bary[0] = e[0] / area2;
        frag.bary[1] = e[1] / area2;
        frag.bary[2] = e[2] / area2;
    } else {
        frag.bary[0] = frag.bary[1] = frag.bary[2] = 0.0;
        frag.bary[best_edge] = 1.0 - best_t;
        frag.bary[(best_edge + 1) % 3] = best_t;
    }
    frag.depth =
        frag.bary[0] * fd.depth[0] + frag.bary[1] * fd.depth[1] + frag.bary[2] * fd.depth[2];
    return true;
}

void gather_fragments(const Scene& scene, int px, int py, std::vector<Fragment>& frags) {
    frags.clear();
    const Eigen::Vector2d p(px + 0.5, py + 0.5);
    for (int fi : scene.row_faces[py]) {
        const FaceData& fd = scene.faces[fi];
        if (p.x() < fd.x_lo || p.x() > fd.x_hi) continue;
        Fragment frag;
        if (compute_fragment(scene, fd, fi, p, frag)) frags.push_back(frag);
    }
    std::sort(frags.begin(), frags.end(), [](const Fragment& l, const Fragment& r) {
        if (l.depth != r.depth) return l.depth < r.depth;
        return l.face < r.face;
    });
}

Vec3 fragment_color(const Scene& scene, const Fragment& frag) {
    const FaceData& fd = scene.faces[frag.face];
    Vec3 interp = Vec3::Zero();
    for (int k = 0; k < 3; ++k) interp += frag.bary[k] * vertex_color(scene, fd.v[k]);
    return fd.shade * interp;
}

// Depth-softmax aggregation of a pixel's fragments against the background.
// Rescaling every weight by exp(z_ref/gamma) cancels in the ratio, so the
// nearest fragment is used as the reference for numerical range.
struct PixelAggregate {
    double denom = 1.0;
    Vec3 rgb = Vec3::Zero();
    double mask = 0.0;
    std::vector<double> weights;  // per fragment: alpha * exp((z_ref - z)/gamma)
    double weight_bg = 1.0;
    double z_ref = 0.0;
};

PixelAggregate aggregate_pixel(const Scene& scene, const std::vector<Fragment>& frags) {
    PixelAggregate agg;
    const double z_ref = frags.empty() ? scene.z_background : frags.front().depth;
    agg.z_ref = z_ref;
    agg.weight_bg = std::exp((z_ref - scene.z_background) / scene.gamma);
    agg.denom = agg.weight_bg;
    Vec3 numer = agg.weight_bg * scene.settings.background;
    double transmit = 1.0;
    agg.weights.reserve(frags.size());
    for (const Fragment& frag : frags) {
        const double weight = frag.alpha * std::exp((z_ref - frag.depth) / scene.gamma);
        agg.weights.push_back(weight);
        agg.denom += weight;
        numer += weight * fragment_color(scene, frag);
        transmit *= 1.0 - frag.alpha;
    }
    agg.rgb = numer / agg.denom;
    agg.mask = 1.0 - transmit;
    return agg;
}

RenderOutput run_forward(const Scene& scene, Exec exec) {
    const int h = scene.settings.height;
    const int w = scene.settings.width;
    RenderOutput out;
    out.rgb = Image(h, w);
    out.mask.assign(static_cast<std::size_t>(h) * w, 0.0);

    parallel_for(static_cast<std::int64_t>(h), exec, [&](std::int64_t py) {
        std::vector<Fragment> frags;
        for (int px = 0; px < w; ++px) {
            gather_fragments(scene, px, static_cast<int>(py), frags);
            const PixelAggregate agg = aggregate_pixel(scene, frags);
            for (int c = 0; c < 3; ++c) out.rgb.at(static_cast<int>(py), px, c) = agg.rgb[c];
            out.mask[py * w + px] = agg.mask;
        }
    });
    return out;
}

// --- backward helpers -------------------------------------------------------

// d(edge function e_k)/d(projected vertices); e_k = cross2(W - V, p - V) with
// V = verts[k+1], W = verts[k+2].
void edge_function_grads(const Eigen::Vector2d* verts[3], const Eigen::Vector2d& p, int k,
                         Eigen::Vector2d grads[3]) {
    const int vi = (k + 1) % 3;
    const int wi = (k + 2) % 3;
    const Eigen::Vector2d& V = *verts[vi];
    const Eigen::Vector2d& W = *verts[wi];
    grads[k].setZero();
    grads[wi] = {p.y() - V.y(), -(p.x() - V.x())};
    grads[vi] = {W.y() - p.y(), p.x() - W.x()};
}

struct GradSink {
    MatX3* vertices;
    MatX3* colors;
};

// Distributes d(loss)/d(projected 2D vertex) through the perspective
// projection into the world-space vertex gradient.
void scatter_proj_grad(const Scene& scene, int vertex, const Eigen::Vector2d& grad_proj,
                       MatX3& grad_vertices) {
    const Eigen::Vector3d& cc = scene.cam_coords[vertex];
    const double inv_z = 1.0 / cc.z();
    const double f = scene.cam.focal_px;
    // px = cx + f*x/z, py = cy - f*y/z.
    const Vec3 dpx = f * inv_z * (scene.cam.right - cc.x() * inv_z * scene.cam.forward);
    const Vec3 dpy = -f * inv_z * (scene.cam.up - cc.y() * inv_z * scene.cam.forward);
    grad_vertices.row(vertex) += (grad_proj.x() * dpx + grad_proj.y() * dpy).transpose();
}

void backward_pixel(const Scene& scene, int px, int py, const Vec3& g3,
                    const std::vector<Fragment>& frags, MatX3& grad_vertices, MatX3& grad_colors) {
    const int n = static_cast<int>(frags.size());
    if (n == 0) return;
    const Eigen::Vector2d p(px + 0.5, py + 0.5);
    const PixelAggregate agg = aggregate_pixel(scene, frags);

    for (int k = 0; k < n; ++k) {
        const Fragment& frag = frags[k];
        const FaceData& fd = scene.faces[frag.face];
        const double weight = agg.weights[k];
        const double s_depth = std::exp((agg.z_ref - frag.depth) / scene.gamma);

        Vec3 interp = Vec3::Zero();
        for (int j = 0; j < 3; ++j) interp += frag.bary[j] * vertex_color(scene, fd.v[j]);
        const Vec3 shaded = fd.shade * interp;

        // Pixel = (sum_f W_f C_f + W_bg bg) / D with W_f = alpha * s_depth.
        const double grad_weight = g3.dot(shaded - agg.rgb) / agg.denom;
        const double grad_alpha = grad_weight * s_depth;
        const double grad_depth = -grad_weight * weight / scene.gamma;
        const Vec3 grad_shaded = (weight / agg.denom) * g3;

        // Color gradients.
        if (!scene.gray) {
            for (int j = 0; j < 3; ++j)
                grad_colors.row(fd.v[j]) += (fd.shade * frag.bary[j]) * grad_shaded.transpose();
        }

        // Shade gradient -> world-space face normal -> vertices.
        const double grad_shade = grad_shaded.dot(interp);
        if (fd.lit && grad_shade != 0.0) {
            const Vec3 w = scene.cam.headlight;
            const Vec3 grad_n =
                (1.0 - scene.settings.ambient) * grad_shade / fd.n_len *
                (w - fd.n_hat.dot(w) * fd.n_hat);
            const Vec3 a = scene.mesh->vertices.row(fd.v[0]);
            const Vec3 b = scene.mesh->vertices.row(fd.v[1]);
            const Vec3 c = scene.mesh->vertices.row(fd.v[2]);
            grad_vertices.row(fd.v[0]) += ((b - c).cross(grad_n)).transpose();
            grad_vertices.row(fd.v[1]) += ((c - a).cross(grad_n)).transpose();
            grad_vertices.row(fd.v[2]) += ((a - b).cross(grad_n)).transpose();
        }

        // Fragment depth feeds the softmax weight: z = sum_k bary_k * z_k.
        for (int j = 0; j < 3; ++j)
            grad_vertices.row(fd.v[j]) +=
                (grad_depth * frag.bary[j]) * scene.cam.forward.transpose();

        // Barycentric gradients -> projected vertices. Both the interpolated
        // color and the interpolated depth depend on the barycentrics.
        const Eigen::Vector2d* verts[3] = {&fd.proj[0], &fd.proj[1], &fd.proj[2]};
        Eigen::Vector2d grad_proj[3] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
                                        Eigen::Vector2d::Zero()};
        double grad_bary[3];
        for (int j = 0; j < 3; ++j)
            grad_bary[j] = grad_shaded.dot(fd.shade * vertex_color(scene, fd.v[j])) +
                           grad_depth * fd.depth[j];

        if (frag.inside) {
            const double area2 = cross2(*verts[1] - *verts[0], *verts[2] - *verts[0]);
            double e[3] = {cross2(*verts[2] - *verts[1], p - *verts[1]),
                           cross2(*verts[0] - *verts[2], p - *verts[2]),
                           cross2(*verts[1] - *verts[0], p - *verts[0])};
            // d(area2)/dverts equals the sum of the three edge gradients.
            Eigen::Vector2d darea[3] = {Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero(),
                                        Eigen::Vector2d::Zero()};
            for (int k2 = 0; k2 < 3; ++k2) {
                Eigen::Vector2d de[3];
                edge_function_grads(verts, p, k2, de);
                for (int j = 0; j < 3; ++j) darea[j] += de[j];
                // bary_k2 = e_k2 / area2 (first term of the quotient rule).
                for (int j = 0; j < 3; ++j) grad_proj[j] += grad_bary[k2] / area2 * de[j];
            }
            double sum_gb_e = 0;
            for (int k2 = 0; k2 < 3; ++k2) sum_gb_e += grad_bary[k2] * e[k2];
            for (int j = 0; j < 3; ++j) grad_proj[j] -= sum_gb_e / (area2 * area2) * darea[j];
        } else {
            // bary = lerp over the nearest edge: d(bary)/d(t).
            const int k2 = frag.feature_edge;
            const int vi = k2;
            const int wi = (k2 + 1) % 3;
            const double grad_t = grad_bary[wi] - grad_bary[vi];
            if (frag.feature_t > 0.0 && frag.feature_t < 1.0 && grad_t != 0.0) {
                const Eigen::Vector2d& u = *verts[vi];
                const Eigen::Vector2d& v = *verts[wi];
                const Eigen::Vector2d uv = v - u;
                const double denom = uv.squaredNorm();
                const double num = (p - u).dot(uv);
                // t = num / denom.
                const Eigen::Vector2d dnum_du = -(uv + (p - u));
                const Eigen::Vector2d dnum_dv = p - u;
                const Eigen::Vector2d ddenom_du = -2.0 * uv;
                const Eigen::Vector2d ddenom_dv = 2.0 * uv;
                grad_proj[vi] += grad_t * (dnum_du * denom - num * ddenom_du) / (denom * denom);
                grad_proj[wi] += grad_t * (dnum_dv * denom - num * ddenom_dv) / (denom * denom);
            }
        }

        // Alpha gradient -> signed distance -> projected vertices.
        const double grad_sd = grad_alpha * frag.alpha * (1.0 - frag.alpha) / scene.tau_px;
        if (grad_sd != 0.0) {
            const double sign = frag.inside ? 1.0 : -1.0;
            const int k2 = frag.feature_edge;
            const Eigen::Vector2d& u = *verts[k2];
            const Eigen::Vector2d& v = *verts[(k2 + 1) % 3];
            if (frag.feature_t > 0.0 && frag.feature_t < 1.0) {
                // Distance to the supporting line: |cross2(v-u, p-u)| / |v-u|.
                const double cr = cross2(v - u, p - u);
                const double len = (v - u).norm();
                if (len > 0.0 && cr != 0.0) {
                    const double s_cr = cr > 0 ? 1.0 : -1.0;
                    // d(cr)/du, d(cr)/dv as edge-function derivatives.
                    const Eigen::Vector2d dcr_dv(p.y() - u.y(), -(p.x() - u.x()));
                    const Eigen::Vector2d dcr_du(v.y() - p.y(), p.x() - v.x());
                    const Eigen::Vector2d dlen_dv = (v - u) / len;
                    const Eigen::Vector2d dlen_du = -(v - u) / len;
                    const double d_abs = std::abs(cr);
                    grad_proj[k2] += sign * grad_sd *
                                     (s_cr * dcr_du * len - d_abs * dlen_du) / (len * len);
                    grad_proj[(k2 + 1) % 3] += sign * grad_sd *
                                               (s_cr * dcr_dv * len - d_abs * dlen_dv) /
                                               (len * len);
                }
            } else {
                // Nearest vertex.
                const int j = frag.feature_t <= 0.0 ? k2 : (k2 + 1) % 3;
                const Eigen::Vector2d diff = p - *verts[j];
                const double d = diff.norm();
                if (d > 0.0) grad_proj[j] += sign * grad_sd * (-diff / d);
            }
        }

        for (int j = 0; j < 3; ++j)
            if (!grad_proj[j].isZero()) scatter_proj_grad(scene, fd.v[j], grad_proj[j], grad_vertices);
    }
}

RenderGrad run_backward(const Scene& scene, const Image& grad_rgb, Exec exec) {
    const int h = scene.settings.height;
    const int w = scene.settings.width;
    if (grad_rgb.height != h || grad_rgb.width != w)
        throw std::invalid_argument("render_backward: gradient image size mismatch");
    const auto nv = scene.mesh->vertex_count();

    const int slots = exec == Exec::parallel ? max_threads() : 1;
    std::vector<MatX3> vert_buf(slots, MatX3::Zero(nv, 3));
    std::vector<MatX3> color_buf(scene.gray ? 0 : slots, MatX3::Zero(nv, 3));
    MatX3 dummy = MatX3::Zero(0, 3);

    parallel_for_threaded(static_cast<std::int64_t>(h), exec, slots, [&](std::int64_t py, int slot) {
        std::vector<Fragment> frags;
        for (int px = 0; px < w; ++px) {
            Vec3 g3(grad_rgb.at(static_cast<int>(py), px, 0), grad_rgb.at(static_cast<int>(py), px, 1),
                    grad_rgb.at(static_cast<int>(py), px, 2));
            if (g3.isZero()) continue;
            gather_fragments(scene, px, static_cast<int>(py), frags);
            backward_pixel(scene, px, static_cast<int>(py), g3, frags, vert_buf[slot],
                           scene.gray ? dummy : color_buf[slot]);
        }
    });

    RenderGrad grad;
    grad.vertices = MatX3::Zero(nv, 3);
    for (int s = 0; s < slots; ++s) grad.vertices += vert_buf[s];
    grad.colors = MatX3::Zero(nv, 3);
    if (!scene.gray)
        for (int s = 0; s < slots; ++s) grad.colors += color_buf[s];
    return grad;
}

}  // namespace

RenderOutput render(const Mesh& mesh, const CameraPose& pose, const RenderSettings& settings,
                    Exec exec) {
    return run_forward(build_scene(mesh, pose, settings, /*gray=*/false, exec), exec);
}

RenderOutput render_geo(const Mesh& mesh, const CameraPose& pose, const RenderSettings& settings,
                        Exec exec) {
    return run_forward(build_scene(mesh, pose, settings, /*gray=*/true, exec), exec);
}

RenderGrad render_backward(const Mesh& mesh, const CameraPose& pose,
                           const RenderSettings& settings, const Image& grad_rgb, Exec exec) {
    return run_backward(build_scene(mesh, pose, settings, /*gray=*/false, exec), grad_rgb, exec);
}

RenderGrad render_geo_backward(const Mesh& mesh, const CameraPose& pose,
                               const RenderSettings& settings, const Image& grad_rgb, Exec exec) {
    return run_backward(build_scene(mesh, pose, settings, /*gray=*/true, exec), grad_rgb, exec);
}

double foreground_ratio(const RenderOutput& view) {
    if (view.mask.empty()) throw std::invalid_argument("foreground_ratio: empty mask");
    std::size_t count = 0;
    for (double m : view.mask)
        if (m > 0.5) ++count;
    return static_cast<double>(count) / static_cast<double>(view.mask.size());
}

}  // namespace forge
