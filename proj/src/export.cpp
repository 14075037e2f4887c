#include "forge/export.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

namespace forge {

using nlohmann::json;

void write_ply(const std::filesystem::path& path, const Mesh& mesh, bool binary) {
    validate_mesh(mesh);
    const bool colors = mesh.has_colors();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());

    out << "ply\n";
    out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
    out << "element vertex " << mesh.vertex_count() << "\n";
    out << "property float x\nproperty float y\nproperty float z\n";
    if (colors) out << "property float red\nproperty float green\nproperty float blue\n";
    out << "element face " << mesh.face_count() << "\n";
    out << "property list uchar int vertex_indices\n";
    out << "end_header\n";

    if (binary) {
        for (Eigen::Index v = 0; v < mesh.vertex_count(); ++v) {
            float row[6];
            int n = 3;
            for (int c = 0; c < 3; ++c) row[c] = static_cast<float>(mesh.vertices(v, c));
            if (colors) {
                for (int c = 0; c < 3; ++c) row[3 + c] = static_cast<float>(mesh.colors(v, c));
                n = 6;
            }
            out.write(reinterpret_cast<const char*>(row), n * sizeof(float));
        }
        for (Eigen::Index f = 0; f < mesh.face_count(); ++f) {
            const std::uint8_t count = 3;
            out.write(reinterpret_cast<const char*>(&count), 1);
            std::int32_t idx[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
            out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
        }
    } else {
        char buf[160];
        for (Eigen::Index v = 0; v < mesh.vertex_count(); ++v) {
            if (colors)
                std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g %.9g %.9g %.9g\n",
                              static_cast<float>(mesh.vertices(v, 0)),
                              static_cast<float>(mesh.vertices(v, 1)),
                              static_cast<float>(mesh.vertices(v, 2)),
                              static_cast<float>(mesh.colors(v, 0)),
                              static_cast<float>(mesh.colors(v, 1)),
                              static_cast<float>(mesh.colors(v, 2)));
            else
                std::snprintf(buf, sizeof(buf), "%.9g %.9g %.9g\n",
                              static_cast<float>(mesh.vertices(v, 0)),
                              static_cast<float>(mesh.vertices(v, 1)),
                              static_cast<float>(mesh.vertices(v, 2)));
            out << buf;
        }
        for (Eigen::Index f = 0; f < mesh.face_count(); ++f)
            out << "3 " << mesh.faces(f, 0) << " " << mesh.faces(f, 1) << " " << mesh.faces(f, 2)
                << "\n";
    }
    if (!out) throw DataError("short write: " + path.string());
}

namespace {

struct PlyProperty {
    std::string name;
    std::string type;
    bool is_list = false;
    std::string count_type;
};

struct PlyElement {
    std::string name;
    Eigen::Index count = 0;
    std::vector<PlyProperty> properties;
};

std::size_t scalar_size(const std::string& type) {
    if (type == "float" || type == "float32" || type == "int" || type == "int32" ||
        type == "uint" || type == "uint32")
        return 4;
    if (type == "double" || type == "float64") return 8;
    if (type == "uchar" || type == "uint8" || type == "char" || type == "int8") return 1;
    if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
    throw DataError("ply: unsupported property type '" + type + "'");
}

double read_binary_scalar(std::istream& in, const std::string& type) {
    char buf[8];
    const std::size_t n = scalar_size(type);
    in.read(buf, static_cast<std::streamsize>(n));
    if (type == "float" || type == "float32") {
        float v;
        std::memcpy(&v, buf, 4);
        return v;
    }
    if (type == "double" || type == "float64") {
        double v;
        std::memcpy(&v, buf, 8);
        return v;
    }
    if (type == "int" || type == "int32") {
        std::int32_t v;
        std::memcpy(&v, buf, 4);
        return v;
    }
    if (type == "uint" || type == "uint32") {
        std::uint32_t v;
        std::memcpy(&v, buf, 4);
        return v;
    }
    if (type == "uchar" || type == "uint8") return static_cast<unsigned char>(buf[0]);
    if (type == "char" || type == "int8") return static_cast<signed char>(buf[0]);
    if (type == "short" || type == "int16") {
        std::int16_t v;
        std::memcpy(&v, buf, 2);
        return v;
    }
    std::uint16_t v;
    std::memcpy(&v, buf, 2);
    return v;
}

}  // namespace

Mesh read_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open ply: " + path.string());

    std::string line;
    if (!std::getline(in, line) || line.substr(0, 3) != "ply")
        throw DataError(path.string() + ": not a ply file");

    bool binary = false;
    std::vector<PlyElement> elements;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::stringstream ss(line);
        std::string keyword;
        ss >> keyword;
        if (keyword == "comment") continue;
        if (keyword == "format") {
            std::string fmt;
            ss >> fmt;
            if (fmt == "binary_little_endian")
                binary = true;
            else if (fmt == "ascii")
                binary = false;
            else
                throw DataError(path.string() + ": unsupported ply format '" + fmt + "'");
        } else if (keyword == "element") {
            PlyElement element;
            ss >> element.name >> element.count;
            elements.push_back(element);
        } else if (keyword == "property") {
            if (elements.empty()) throw DataError(path.string() + ": property before element");
            PlyProperty prop;
            std::string type;
            ss >> type;
            if (type == "list") {
                prop.is_list = true;
                ss >> prop.count_type >> prop.type >> prop.name;
            } else {
                prop.type = type;
                ss >> prop.name;
            }
            elements.back().properties.push_back(prop);
        } else if (keyword == "end_header") {
            break;
        }
    }

    Mesh mesh;
    for (const auto& element : elements) {
        if (element.name == "vertex") {
            int ix = -1, iy = -1, iz = -1, ir = -1, ig = -1, ib = -1;
            for (std::size_t i = 0; i < element.properties.size(); ++i) {
                const auto& name = element.properties[i].name;
                if (name == "x") ix = static_cast<int>(i);
                if (name == "y") iy = static_cast<int>(i);
                if (name == "z") iz = static_cast<int>(i);
                if (name == "red") ir = static_cast<int>(i);
                if (name == "green") ig = static_cast<int>(i);
                if (name == "blue") ib = static_cast<int>(i);
            }
            if (ix < 0 || iy < 0 || iz < 0)
                throw DataError(path.string() + ": vertex element lacks x/y/z");
            const bool colors = ir >= 0 && ig >= 0 && ib >= 0;
            mesh.vertices.resize(element.count, 3);
            if (colors) mesh.colors.resize(element.count, 3);

            std::vector<double> row(element.properties.size());
            for (Eigen::Index v = 0; v < element.count; ++v) {
                if (binary) {
                    for (std::size_t i = 0; i < element.properties.size(); ++i) {
                        if (element.properties[i].is_list)
                            throw DataError(path.string() + ": list property on vertex");
                        row[i] = read_binary_scalar(in, element.properties[i].type);
                    }
                } else {
                    for (std::size_t i = 0; i < element.properties.size(); ++i) {
                        if (!(in >> row[i]))
                            throw DataError(path.string() + ": truncated vertex data");
                        // Round float32-typed properties through float so the
                        // decimal form restores the exact stored value.
                        const auto& type = element.properties[i].type;
                        if (type == "float" || type == "float32")
                            row[i] = static_cast<double>(static_cast<float>(row[i]));
                    }
                }
                mesh.vertices(v, 0) = row[ix];
                mesh.vertices(v, 1) = row[iy];
                mesh.vertices(v, 2) = row[iz];
                if (colors) {
                    double scale = element.properties[ir].type == "uchar" ? 1.0 / 255.0 : 1.0;
                    mesh.colors(v, 0) = row[ir] * scale;
                    mesh.colors(v, 1) = row[ig] * scale;
                    mesh.colors(v, 2) = row[ib] * scale;
                }
            }
        } else if (element.name == "face") {
            if (element.properties.size() != 1 || !element.properties[0].is_list)
                throw DataError(path.string() + ": face element must be a single list property");
            mesh.faces.resize(element.count, 3);
            for (Eigen::Index f = 0; f < element.count; ++f) {
                int count;
                if (binary)
                    count = static_cast<int>(
                        read_binary_scalar(in, element.properties[0].count_type));
                else if (!(in >> count))
                    throw DataError(path.string() + ": truncated face data");
                if (count != 3) throw DataError(path.string() + ": non-triangle face in ply");
                for (int k = 0; k < 3; ++k) {
                    if (binary)
                        mesh.faces(f, k) =
                            static_cast<int>(read_binary_scalar(in, element.properties[0].type));
                    else if (!(in >> mesh.faces(f, k)))
                        throw DataError(path.string() + ": truncated face data");
                }
            }
        } else {
            throw DataError(path.string() + ": unsupported element '" + element.name + "'");
        }
    }
    validate_mesh(mesh);
    return mesh;
}

// ---------------------------------------------------------------------------

namespace {

std::string frame_file(int index, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%04d.%s", index, ext);
    return buf;
}

}  // namespace

void export_sequence_ply(const std::filesystem::path& dir, std::span<const Mesh> frames,
                         double fps, bool binary) {
    std::filesystem::create_directories(dir);
    json manifest_frames = json::array();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const std::string file = frame_file(static_cast<int>(i), "ply");
        write_ply(dir / file, frames[i], binary);
        manifest_frames.push_back({{"index", i}, {"file", file}});
    }
    json manifest = {{"format", "ply"}, {"fps", fps}, {"frames", manifest_frames}};
    std::ofstream out(dir / "sequence.json");
    if (!out) throw DataError("cannot open for writing: " + (dir / "sequence.json").string());
    out << manifest.dump(2) << "\n";
}

std::vector<Mesh> load_sequence(const std::filesystem::path& dir) {
    std::ifstream in(dir / "sequence.json");
    if (!in) throw DataError("cannot open sequence manifest: " + (dir / "sequence.json").string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("invalid sequence.json: " + std::string(e.what()));
    }
    std::vector<Mesh> frames;
    try {
        for (const auto& node : manifest.at("frames"))
            frames.push_back(read_ply(dir / node.at("file").get<std::string>()));
    } catch (const json::exception& e) {
        throw DataError("sequence.json: " + std::string(e.what()));
    }
    if (frames.empty()) throw DataError("sequence.json lists no frames");
    return frames;
}

// ---------------------------------------------------------------------------
// glTF morph-target export

void export_sequence_gltf(const std::filesystem::path& gltf_path, std::span<const Mesh> frames,
                          double fps) {
    if (frames.empty()) throw std::invalid_argument("gltf export: no frames");
    const Mesh& base = frames[0];
    validate_mesh(base);
    const auto nv = base.vertex_count();
    const auto nf = base.face_count();
    const int t = static_cast<int>(frames.size());
    for (const auto& frame : frames)
        if (frame.vertex_count() != nv || frame.face_count() != nf)
            throw std::invalid_argument("gltf export: frames disagree on topology");

    std::vector<char> bin;
    auto append = [&](const void* data, std::size_t bytes) {
        const std::size_t offset = bin.size();
        bin.resize(offset + bytes);
        std::memcpy(bin.data() + offset, data, bytes);
        return offset;
    };
    auto pad4 = [&] { while (bin.size() % 4) bin.push_back(0); };

    json accessors = json::array();
    json buffer_views = json::array();
    auto add_view = [&](std::size_t offset, std::size_t bytes, std::optional<int> target) {
        json view = {{"buffer", 0}, {"byteOffset", offset}, {"byteLength", bytes}};
        if (target) view["target"] = *target;
        buffer_views.push_back(view);
        return static_cast<int>(buffer_views.size() - 1);
    };

    // Indices.
    int indices_accessor;
    {
        std::vector<std::uint32_t> indices(static_cast<std::size_t>(nf) * 3);
        for (Eigen::Index f = 0; f < nf; ++f)
            for (int k = 0; k < 3; ++k)
                indices[f * 3 + k] = static_cast<std::uint32_t>(base.faces(f, k));
        const auto offset = append(indices.data(), indices.size() * 4);
        const int view = add_view(offset, indices.size() * 4, 34963);
        accessors.push_back({{"bufferView", view},
                             {"componentType", 5125},
                             {"count", indices.size()},
                             {"type", "SCALAR"}});
        indices_accessor = static_cast<int>(accessors.size() - 1);
        pad4();
    }

    auto add_vec3_accessor = [&](const std::vector<float>& data, bool with_min_max) {
        const auto offset = append(data.data(), data.size() * 4);
        const int view = add_view(offset, data.size() * 4, 34962);
        json accessor = {{"bufferView", view},
                         {"componentType", 5126},
                         {"count", data.size() / 3},
                         {"type", "VEC3"}};
        if (with_min_max) {
            std::array<float, 3> lo = {data[0], data[1], data[2]};
            std::array<float, 3> hi = lo;
            for (std::size_t i = 0; i < data.size(); i += 3)
                for (int c = 0; c < 3; ++c) {
                    lo[c] = std::min(lo[c], data[i + c]);
                    hi[c] = std::max(hi[c], data[i + c]);
                }
            accessor["min"] = lo;
            accessor["max"] = hi;
        }
        accessors.push_back(accessor);
        pad4();
        return static_cast<int>(accessors.size() - 1);
    };

    auto mesh_floats = [&](const MatX3& m) {
        std::vector<float> data(static_cast<std::size_t>(m.rows()) * 3);
        for (Eigen::Index i = 0; i < m.size(); ++i) data[i] = static_cast<float>(m.data()[i]);
        return data;
    };

    const int position_accessor = add_vec3_accessor(mesh_floats(base.vertices), true);
    int color_accessor = -1;
    if (base.has_colors()) color_accessor = add_vec3_accessor(mesh_floats(base.colors), false);

    // Morph targets: per-frame position deltas from the base.
    std::vector<int> target_accessors;
    for (int i = 0; i < t; ++i) {
        MatX3 delta = frames[i].vertices - base.vertices;
        target_accessors.push_back(add_vec3_accessor(mesh_floats(delta), true));
    }

    // Animation: step interpolation, one-hot weight rows.
    int times_accessor, weights_accessor;
    {
        std::vector<float> times(t);
        for (int i = 0; i < t; ++i) times[i] = static_cast<float>(i / fps);
        const auto offset = append(times.data(), times.size() * 4);
        const int view = add_view(offset, times.size() * 4, std::nullopt);
        accessors.push_back({{"bufferView", view},
                             {"componentType", 5126},
                             {"count", t},
                             {"type", "SCALAR"},
                             {"min", {times.front()}},
                             {"max", {times.back()}}});
        times_accessor = static_cast<int>(accessors.size() - 1);
        pad4();

        std::vector<float> weights(static_cast<std::size_t>(t) * t, 0.0f);
        for (int i = 0; i < t; ++i) weights[static_cast<std::size_t>(i) * t + i] = 1.0f;
        const auto w_offset = append(weights.data(), weights.size() * 4);
        const int w_view = add_view(w_offset, weights.size() * 4, std::nullopt);
        accessors.push_back({{"bufferView", w_view},
                             {"componentType", 5126},
                             {"count", weights.size()},
                             {"type", "SCALAR"}});
        weights_accessor = static_cast<int>(accessors.size() - 1);
        pad4();
    }

    const auto bin_path = std::filesystem::path(gltf_path).replace_extension(".bin");
    {
        std::ofstream out(bin_path, std::ios::binary);
        if (!out) throw DataError("cannot open for writing: " + bin_path.string());
        out.write(bin.data(), static_cast<std::streamsize>(bin.size()));
        if (!out) throw DataError("short write: " + bin_path.string());
    }

    json attributes = {{"POSITION", position_accessor}};
    if (color_accessor >= 0) attributes["COLOR_0"] = color_accessor;
    json targets = json::array();
    for (int accessor : target_accessors) targets.push_back({{"POSITION", accessor}});

    json gltf = {
        {"asset", {{"version", "2.0"}, {"generator", "forge"}}},
        {"buffers", {{{"uri", bin_path.filename().string()}, {"byteLength", bin.size()}}}},
        {"bufferViews", buffer_views},
        {"accessors", accessors},
        {"meshes",
         {{{"primitives",
            {{{"attributes", attributes}, {"indices", indices_accessor}, {"targets", targets}}}},
           {"weights", std::vector<double>(t, 0.0)}}}},
        {"nodes", {{{"mesh", 0}}}},
        {"scenes", {{{"nodes", {0}}}}},
        {"scene", 0},
        {"animations",
         {{{"samplers",
            {{{"input", times_accessor},
              {"output", weights_accessor},
              {"interpolation", "STEP"}}}},
           {"channels",
            {{{"sampler", 0}, {"target", {{"node", 0}, {"path", "weights"}}}}}}}}},
    };

    std::ofstream out(gltf_path);
    if (!out) throw DataError("cannot open for writing: " + gltf_path.string());
    out << gltf.dump(2) << "\n";
}

}  // namespace forge
