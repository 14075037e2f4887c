#include "forge/style_field.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace forge {

using nlohmann::json;

FourierFeatureMap FourierFeatureMap::create(int num_frequencies, double sigma,
                                            std::uint64_t seed) {
    if (num_frequencies <= 0)
        throw std::invalid_argument("FourierFeatureMap: need at least one frequency");
    FourierFeatureMap map;
    map.sigma = sigma;
    map.seed = seed;
    map.frequencies.resize(num_frequencies, 3);
    Rng rng(splitmix64(seed ^ hash_tag("fourier-frequencies")));
    for (int l = 0; l < num_frequencies; ++l)
        for (int c = 0; c < 3; ++c) map.frequencies(l, c) = sigma * rng.normal();
    return map;
}

MatX fourier_encode(const MatX3& vertices, const FourierFeatureMap& map, Exec exec) {
    const auto v = vertices.rows();
    const int L = map.num_frequencies();
    MatX features(v, 2 * L);
    parallel_for(v, exec, [&](std::int64_t i) {
        for (int l = 0; l < L; ++l) {
            const double phase = 2.0 * M_PI * map.frequencies.row(l).dot(vertices.row(i));
            features(i, l) = std::sin(phase);
            features(i, L + l) = std::cos(phase);
        }
    });
    return features;
}

StyleFieldParams init_params(const StyleFieldArch& arch, std::uint64_t seed,
                             int fourier_frequencies, double fourier_sigma) {
    if (arch.hidden.empty()) throw std::invalid_argument("style field: empty trunk");
    for (int h : arch.hidden)
        if (h <= 0) throw std::invalid_argument("style field: non-positive trunk width");

    StyleFieldParams params;
    params.arch = arch;
    params.seed = seed;
    params.fourier =
        FourierFeatureMap::create(fourier_frequencies, fourier_sigma, splitmix64(seed));

    std::vector<std::pair<int, int>> dims;  // (in, out) per layer
    int in = params.fourier.feature_dim();
    for (int h : arch.hidden) {
        dims.emplace_back(in, h);
        in = h;
    }
    dims.emplace_back(in, 3);  // color head
    dims.emplace_back(in, 1);  // displacement head

    Eigen::Index total = 0;
    for (auto [i, o] : dims) {
        StyleFieldParams::LayerSpec spec;
        spec.weight_offset = total;
        spec.in_dim = i;
        spec.out_dim = o;
        total += static_cast<Eigen::Index>(i) * o;
        spec.bias_offset = total;
        total += o;
        params.layers.push_back(spec);
    }
    params.flat = Vec::Zero(total);

    // Trunk: scaled Gaussian; heads stay zero.
    Rng rng(splitmix64(seed ^ hash_tag("style-field-init")));
    for (int layer = 0; layer < params.trunk_layers(); ++layer) {
        const auto& spec = params.layers[layer];
        const double scale = std::sqrt(2.0 / spec.in_dim);
        double* w = params.flat.data() + spec.weight_offset;
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(spec.in_dim) * spec.out_dim; ++k)
            w[k] = scale * rng.normal();
    }
    return params;
}

namespace {

// out = act(in * W + b), rows independent. Parallel and serial paths are
// bitwise identical (per-row products, fixed order).
enum class Activation { relu, linear };

void dense_forward(const MatX& in, Eigen::Map<const MatX> w, Eigen::Map<const Vec> b, MatX& out,
                   Activation act, Exec exec) {
    out.resize(in.rows(), w.cols());
    parallel_for(in.rows(), exec, [&](std::int64_t r) {
        out.row(r) = in.row(r) * w + b.transpose();
        if (act == Activation::relu) out.row(r) = out.row(r).cwiseMax(0.0);
    });
}

}  // namespace

StyleAttributes style_field_forward(const StyleFieldParams& params, const MatX3& template_vertices,
                                    Exec exec, StyleFieldCache* cache,
                                    const MatX* precomputed_features) {
    const auto v = template_vertices.rows();
    MatX features;
    const MatX* in = precomputed_features;
    if (!in) {
        features = fourier_encode(template_vertices, params.fourier, exec);
        in = &features;
    }
    if (in->cols() != params.fourier.feature_dim())
        throw std::invalid_argument("style field: feature width mismatch");

    std::vector<MatX> activations(params.trunk_layers());
    const MatX* prev = in;
    for (int layer = 0; layer < params.trunk_layers(); ++layer) {
        dense_forward(*prev, params.weight(layer), params.bias(layer), activations[layer],
                      Activation::relu, exec);
        prev = &activations[layer];
    }

    const int color_layer = params.trunk_layers();
    const int disp_layer = color_layer + 1;
    MatX color_raw, disp_raw;
    dense_forward(*prev, params.weight(color_layer), params.bias(color_layer), color_raw,
                  Activation::linear, exec);
    dense_forward(*prev, params.weight(disp_layer), params.bias(disp_layer), disp_raw,
                  Activation::linear, exec);

    StyleAttributes style;
    style.colors.resize(v, 3);
    style.displacements.resize(v);
    parallel_for(v, exec, [&](std::int64_t i) {
        for (int c = 0; c < 3; ++c) style.colors(i, c) = 1.0 / (1.0 + std::exp(-color_raw(i, c)));
        style.displacements(i) = 0.1 * std::tanh(disp_raw(i, 0));
    });

    if (cache) {
        if (precomputed_features)
            cache->features = *precomputed_features;
        else
            cache->features = std::move(features);
        cache->activations = std::move(activations);
        cache->outputs = style;
    }
    return style;
}

void style_field_backward(const StyleFieldParams& params, const StyleFieldCache& cache,
                          const MatX3& grad_colors, const Vec& grad_displacements, Vec& grad_flat,
                          Exec exec) {
    const auto v = cache.features.rows();
    if (grad_colors.rows() != v || grad_displacements.size() != v)
        throw std::invalid_argument("style field backward: gradient size mismatch");
    if (grad_flat.size() != params.flat.size()) {
        grad_flat = Vec::Zero(params.flat.size());
    }

    // Through the squashing heads.
    MatX delta_color(v, 3);
    MatX delta_disp(v, 1);
    parallel_for(v, exec, [&](std::int64_t i) {
        for (int c = 0; c < 3; ++c) {
            const double s = cache.outputs.colors(i, c);
            delta_color(i, c) = grad_colors(i, c) * s * (1.0 - s);
        }
        const double d = cache.outputs.displacements(i);
        delta_disp(i, 0) = grad_displacements(i) * (0.1 - 10.0 * d * d);
    });

    const int color_layer = params.trunk_layers();
    const int disp_layer = color_layer + 1;
    const MatX& last_act =
        params.trunk_layers() > 0 ? cache.activations.back() : cache.features;

    // grad_W = act^T * delta, one output row per parallel task; grad_b = column
    // sums. Rows of grad_W accumulate over vertices in fixed order.
    auto accumulate_dense = [&](int layer, const MatX& in_act, const MatX& delta) {
        const auto& spec = params.layers[layer];
        double* gw = grad_flat.data() + spec.weight_offset;
        parallel_for(spec.in_dim, exec, [&](std::int64_t r) {
            for (int c = 0; c < spec.out_dim; ++c) {
                double acc = 0;
                for (Eigen::Index k = 0; k < in_act.rows(); ++k) acc += in_act(k, r) * delta(k, c);
                gw[r * spec.out_dim + c] += acc;
            }
        });
        double* gb = grad_flat.data() + spec.bias_offset;
        for (int c = 0; c < spec.out_dim; ++c) gb[c] += delta.col(c).sum();
    };

    accumulate_dense(color_layer, last_act, delta_color);
    accumulate_dense(disp_layer, last_act, delta_disp);

    // Into the trunk.
    MatX delta(v, last_act.cols());
    {
        const auto wc = params.weight(color_layer);
        const auto wd = params.weight(disp_layer);
        parallel_for(v, exec, [&](std::int64_t i) {
            delta.row(i) = delta_color.row(i) * wc.transpose() + delta_disp.row(i) * wd.transpose();
            for (Eigen::Index c = 0; c < delta.cols(); ++c)
                if (last_act(i, c) <= 0.0) delta(i, c) = 0.0;
        });
    }
    for (int layer = params.trunk_layers() - 1; layer >= 0; --layer) {
        const MatX& in_act = layer == 0 ? cache.features : cache.activations[layer - 1];
        accumulate_dense(layer, in_act, delta);
        if (layer == 0) break;
        MatX next_delta(v, in_act.cols());
        const auto w = params.weight(layer);
        parallel_for(v, exec, [&](std::int64_t i) {
            next_delta.row(i) = delta.row(i) * w.transpose();
            for (Eigen::Index c = 0; c < next_delta.cols(); ++c)
                if (in_act(i, c) <= 0.0) next_delta(i, c) = 0.0;
        });
        delta = std::move(next_delta);
    }
}

Mesh apply_style(const Mesh& content_mesh, const StyleAttributes& style, const MatX3* normals,
                 Exec exec) {
    const auto v = content_mesh.vertex_count();
    if (style.colors.rows() != v || style.displacements.size() != v)
        throw std::invalid_argument("apply_style: style has " + std::to_string(style.colors.rows()) +
                                    " vertices, mesh has " + std::to_string(v));
    MatX3 local_normals;
    if (!normals) {
        local_normals = vertex_normals(content_mesh, exec);
        normals = &local_normals;
    }
    Mesh out;
    out.faces = content_mesh.faces;
    out.colors = style.colors;
    out.vertices.resize(v, 3);
    parallel_for(v, exec, [&](std::int64_t i) {
        out.vertices.row(i) =
            content_mesh.vertices.row(i) + style.displacements(i) * normals->row(i);
    });
    return out;
}

void apply_style_backward(const MatX3& normals, const MatX3& grad_vertices,
                          const MatX3& grad_mesh_colors, MatX3& grad_style_colors,
                          Vec& grad_displacements) {
    const auto v = normals.rows();
    if (grad_style_colors.rows() != v) grad_style_colors = MatX3::Zero(v, 3);
    if (grad_displacements.size() != v) grad_displacements = Vec::Zero(v);
    if (grad_mesh_colors.rows() == v) grad_style_colors += grad_mesh_colors;
    if (grad_vertices.rows() == v)
        for (Eigen::Index i = 0; i < v; ++i)
            grad_displacements(i) += grad_vertices.row(i).dot(normals.row(i));
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {
constexpr char kMagic[8] = {'F', 'O', 'R', 'G', 'E', 'S', 'F', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const StyleFieldParams& params,
                     Eigen::Index vertex_count) {
    json header = {
        {"hidden", params.arch.hidden},
        {"seed", params.seed},
        {"fourier", {{"num_frequencies", params.fourier.num_frequencies()},
                     {"sigma", params.fourier.sigma},
                     {"seed", params.fourier.seed}}},
        {"vertex_count", vertex_count},
        {"parameter_count", params.parameter_count()},
    };
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t len = static_cast<std::uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    std::vector<float> blob(params.flat.size());
    for (Eigen::Index i = 0; i < params.flat.size(); ++i)
        blob[i] = static_cast<float>(params.flat[i]);
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw DataError("short write: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError(path.string() + ": not a style field checkpoint");
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string head(len, '\0');
    in.read(head.data(), len);
    if (!in) throw DataError(path.string() + ": truncated header");

    json header;
    try {
        header = json::parse(head);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": invalid header: " + e.what());
    }

    Checkpoint ckpt;
    try {
        StyleFieldArch arch;
        arch.hidden = header.at("hidden").get<std::vector<int>>();
        const auto& f = header.at("fourier");
        StyleFieldParams params = init_params(arch, header.at("seed").get<std::uint64_t>(),
                                              f.at("num_frequencies").get<int>(),
                                              f.at("sigma").get<double>());
        // The Fourier seed is derived from the field seed at init time; trust
        // the stored value in case the derivation ever changes.
        if (params.fourier.seed != f.at("seed").get<std::uint64_t>())
            params.fourier = FourierFeatureMap::create(f.at("num_frequencies").get<int>(),
                                                       f.at("sigma").get<double>(),
                                                       f.at("seed").get<std::uint64_t>());
        ckpt.params = std::move(params);
        ckpt.vertex_count = header.at("vertex_count").get<Eigen::Index>();
        const auto expected = header.at("parameter_count").get<Eigen::Index>();
        if (expected != ckpt.params.parameter_count())
            throw DataError(path.string() + ": parameter count mismatch with architecture");
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": header: " + e.what());
    }

    std::vector<float> blob(ckpt.params.parameter_count());
    in.read(reinterpret_cast<char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!in) throw DataError(path.string() + ": truncated parameter blob");
    for (std::size_t i = 0; i < blob.size(); ++i) ckpt.params.flat[static_cast<Eigen::Index>(i)] = blob[i];
    return ckpt;
}

}  // namespace forge
