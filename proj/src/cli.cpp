#include "forge/cli.hpp"

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "forge/export.hpp"
#include "forge/fixtures.hpp"

namespace forge {

using nlohmann::json;

void RunConfig::validate_paths() const {
    if (body_manifest.empty()) throw ConfigError("config: 'body_manifest' is not set");
    if (!std::filesystem::exists(body_manifest))
        throw ConfigError("config: body_manifest does not exist: " + body_manifest.string());
    if (motion_db.empty()) throw ConfigError("config: 'motion_db' is not set");
    if (!std::filesystem::exists(motion_db / "manifest.json"))
        throw ConfigError("config: motion_db has no manifest.json: " + motion_db.string());
}

namespace {

template <class T>
void read_field(const json& node, const char* name, T& value) {
    if (!node.contains(name)) return;
    try {
        value = node.at(name).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + name + "': " + e.what());
    }
}

void read_path(const json& node, const char* name, std::filesystem::path& value) {
    std::string s;
    read_field(node, name, s);
    if (!s.empty()) value = s;
}

}  // namespace

RunConfig config_from_json(const json& node) {
    RunConfig config;
    read_path(node, "body_manifest", config.body_manifest);
    read_path(node, "motion_db", config.motion_db);
    read_path(node, "out_dir", config.out_dir);
    read_field(node, "seed", config.seed);

    if (node.contains("encoders")) {
        const auto& enc = node.at("encoders");
        read_field(enc, "stage1", config.stage1_encoder);
        read_field(enc, "stage2", config.stage2_encoder);
        read_field(enc, "image", config.image_encoder);
        read_field(enc, "dimension", config.encoder_dimension);
        if (enc.contains("extra")) {
            for (const auto& e : enc.at("extra")) {
                RunConfig::ExtraEncoder extra;
                read_field(e, "kind", extra.kind);
                read_field(e, "id", extra.id);
                read_path(e, "cache", extra.cache);
                read_field(e, "seed", extra.seed);
                read_field(e, "dimension", extra.dimension);
                if (extra.kind.empty() || extra.id.empty())
                    throw ConfigError("config: extra encoder entries need 'kind' and 'id'");
                config.extra_encoders.push_back(std::move(extra));
            }
        }
    }
    if (node.contains("retrieval")) read_field(node.at("retrieval"), "k", config.retrieval_k);
    if (node.contains("body"))
        read_field(node.at("body"), "subdivision_levels", config.subdivision_levels);

    if (node.contains("optimization")) {
        const auto& opt = node.at("optimization");
        auto& o = config.optimization;
        read_field(opt, "iterations", o.iterations);
        read_field(opt, "learning_rate", o.learning_rate);
        read_field(opt, "lr_decay", o.lr_decay);
        read_field(opt, "lr_decay_every", o.lr_decay_every);
        read_field(opt, "n_views", o.n_views);
        read_field(opt, "frame_top_k", o.frame_top_k);
        read_field(opt, "global_augments_per_view", o.global_augments_per_view);
        read_field(opt, "local_augments_per_view", o.local_augments_per_view);
        read_field(opt, "weight_global", o.weight_global);
        read_field(opt, "weight_local", o.weight_local);
        read_field(opt, "weight_geo", o.weight_geo);
        read_field(opt, "deterministic", o.deterministic);
        read_field(opt, "hidden", o.arch.hidden);
        read_field(opt, "fourier_frequencies", o.fourier_frequencies);
        read_field(opt, "fourier_sigma", o.fourier_sigma);
        if (opt.contains("param_seed") || opt.contains("sampling_seed")) {
            read_field(opt, "param_seed", o.param_seed);
            read_field(opt, "sampling_seed", o.sampling_seed);
            config.optimization_seeds_set = true;
        }
    }
    if (node.contains("render")) {
        const auto& ren = node.at("render");
        read_field(ren, "height", config.render.height);
        read_field(ren, "width", config.render.width);
        read_field(ren, "soft_temperature", config.render.soft_temperature);
        read_field(ren, "ambient", config.render.ambient);
        if (ren.contains("background")) {
            const auto bg = ren.at("background").get<std::vector<double>>();
            if (bg.size() != 3) throw ConfigError("config: render.background needs 3 values");
            config.render.background = Vec3(bg[0], bg[1], bg[2]);
        }
    }
    if (node.contains("export")) {
        const auto& exp = node.at("export");
        read_field(exp, "format", config.export_format);
        read_field(exp, "ply_binary", config.ply_binary);
    }
    return config;
}

json config_to_json(const RunConfig& config) {
    json extra = json::array();
    for (const auto& e : config.extra_encoders)
        extra.push_back({{"kind", e.kind},
                         {"id", e.id},
                         {"cache", e.cache.string()},
                         {"seed", e.seed},
                         {"dimension", e.dimension}});
    return json{
        {"body_manifest", config.body_manifest.string()},
        {"motion_db", config.motion_db.string()},
        {"out_dir", config.out_dir.string()},
        {"seed", config.seed},
        {"encoders",
         {{"stage1", config.stage1_encoder},
          {"stage2", config.stage2_encoder},
          {"image", config.image_encoder},
          {"dimension", config.encoder_dimension},
          {"extra", extra}}},
        {"retrieval", {{"k", config.retrieval_k}}},
        {"body", {{"subdivision_levels", config.subdivision_levels}}},
        {"optimization",
         {{"iterations", config.optimization.iterations},
          {"learning_rate", config.optimization.learning_rate},
          {"lr_decay", config.optimization.lr_decay},
          {"lr_decay_every", config.optimization.lr_decay_every},
          {"n_views", config.optimization.n_views},
          {"frame_top_k", config.optimization.frame_top_k},
          {"global_augments_per_view", config.optimization.global_augments_per_view},
          {"local_augments_per_view", config.optimization.local_augments_per_view},
          {"weight_global", config.optimization.weight_global},
          {"weight_local", config.optimization.weight_local},
          {"weight_geo", config.optimization.weight_geo},
          {"deterministic", config.optimization.deterministic},
          {"hidden", config.optimization.arch.hidden},
          {"fourier_frequencies", config.optimization.fourier_frequencies},
          {"fourier_sigma", config.optimization.fourier_sigma},
          {"param_seed", config.optimization.param_seed},
          {"sampling_seed", config.optimization.sampling_seed}}},
        {"render",
         {{"height", config.render.height},
          {"width", config.render.width},
          {"background",
           {config.render.background[0], config.render.background[1],
            config.render.background[2]}},
          {"soft_temperature", config.render.soft_temperature},
          {"ambient", config.render.ambient}}},
        {"export", {{"format", config.export_format}, {"ply_binary", config.ply_binary}}},
    };
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path.string());
    json node;
    try {
        in >> node;
    } catch (const json::exception& e) {
        throw ConfigError("invalid config " + path.string() + ": " + e.what());
    }
    return config_from_json(node);
}

void finalize_seeds(RunConfig& config) {
    if (config.optimization_seeds_set) return;
    config.optimization.param_seed = splitmix64(config.seed ^ hash_tag("params"));
    config.optimization.sampling_seed = splitmix64(config.seed ^ hash_tag("sampling"));
    config.optimization_seeds_set = true;
}

EncoderRegistry build_registry(const RunConfig& config) {
    EncoderRegistry registry;
    register_toy_encoders(registry, config.encoder_dimension);
    for (const auto& extra : config.extra_encoders) {
        if (extra.kind == "precomputed-text") {
            registry.register_text(std::make_shared<PrecomputedTextEncoder>(extra.id, extra.cache));
        } else if (extra.kind == "toy-text") {
            registry.register_text(
                std::make_shared<ToyTextEncoder>(extra.id, extra.dimension, extra.seed));
        } else if (extra.kind == "toy-image") {
            registry.register_image(
                std::make_shared<ToyImageEncoder>(extra.id, extra.dimension, extra.seed));
        } else {
            throw ConfigError("config: unknown encoder kind '" + extra.kind + "'");
        }
    }
    return registry;
}

std::filesystem::path forge_cache_root() {
    const char* env = std::getenv("FORGE_CACHE");
    return env ? std::filesystem::path(env) : std::filesystem::path();
}

namespace {

SkinnedBodyModel load_configured_body(const RunConfig& config) {
    SkinnedBodyModel body = load_body(config.body_manifest);
    if (config.subdivision_levels > 0) body = subdivide_body(body, config.subdivision_levels);
    return body;
}

MotionIndex load_or_build_index(const RunConfig& config, const EncoderRegistry& registry,
                                const MotionDatabase& db, std::ostream& out) {
    if (std::filesystem::exists(config.motion_db / "index.json")) {
        MotionIndex index = load_index(config.motion_db);
        if (index.stage1_encoder_id != config.stage1_encoder ||
            index.stage2_encoder_id != config.stage2_encoder)
            throw ConfigError("index at " + config.motion_db.string() + " was built with encoders (" +
                              index.stage1_encoder_id + ", " + index.stage2_encoder_id +
                              "), config asks for (" + config.stage1_encoder + ", " +
                              config.stage2_encoder + "); re-run `forge index`");
        return index;
    }
    out << "index not found, building it\n";
    const auto entries = db.label_entries();
    MotionIndex index = build_index(entries, registry.text(config.stage1_encoder),
                                    registry.text(config.stage2_encoder));
    save_index(config.motion_db, index);
    return index;
}

// Text encoder wrapper that memoizes on disk under the forge cache root.
class CachingTextEncoder final : public TextEncoder {
public:
    CachingTextEncoder(const TextEncoder& inner, std::filesystem::path cache_prefix)
        : inner_(inner), prefix_(std::move(cache_prefix)) {
        std::error_code ec;
        if (std::filesystem::exists(prefix_.string() + ".json", ec)) {
            const auto cache = load_embedding_cache(prefix_);
            if (cache.encoder_id == inner_.id() && cache.dimension == inner_.dimension())
                for (std::size_t i = 0; i < cache.item_ids.size(); ++i)
                    memo_.emplace(cache.item_ids[i],
                                  cache.values.row(static_cast<Eigen::Index>(i)).transpose());
        }
    }

    ~CachingTextEncoder() override {
        if (!dirty_) return;
        try {
            EmbeddingCache cache;
            cache.encoder_id = inner_.id();
            cache.dimension = inner_.dimension();
            cache.values.resize(static_cast<Eigen::Index>(memo_.size()), inner_.dimension());
            Eigen::Index row = 0;
            for (const auto& [text, emb] : memo_) {
                cache.item_ids.push_back(text);
                cache.values.row(row++) = emb.transpose();
            }
            std::filesystem::create_directories(prefix_.parent_path());
            save_embedding_cache(prefix_, cache);
        } catch (...) {
            // Cache writes are best-effort.
        }
    }

    const std::string& id() const override { return inner_.id(); }
    int dimension() const override { return inner_.dimension(); }
    Embedding encode(std::string_view text) const override {
        const std::string key(text);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        Embedding emb = inner_.encode(text);
        memo_.emplace(key, emb);
        dirty_ = true;
        return emb;
    }

private:
    const TextEncoder& inner_;
    std::filesystem::path prefix_;
    mutable std::unordered_map<std::string, Embedding> memo_;
    mutable bool dirty_ = false;
};

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

}  // namespace

void cmd_index(const RunConfig& config, std::ostream& out) {
    config.validate_paths();
    const EncoderRegistry registry = build_registry(config);
    const MotionDatabase db(config.motion_db);
    const auto entries = db.label_entries();
    if (entries.empty()) throw DataError("motion database has no entries");
    const MotionIndex index = build_index(entries, registry.text(config.stage1_encoder),
                                          registry.text(config.stage2_encoder));
    save_index(config.motion_db, index);
    out << "indexed " << index.size() << " labels with encoders (" << config.stage1_encoder
        << ", " << config.stage2_encoder << ") -> " << (config.motion_db / "index.json").string()
        << "\n";
}

RetrievalResult cmd_retrieve(const RunConfig& config, const std::string& prompt, int k,
                             std::ostream& out) {
    config.validate_paths();
    if (prompt.empty()) throw ConfigError("retrieve: empty prompt");
    const EncoderRegistry registry = build_registry(config);
    const MotionDatabase db(config.motion_db);
    const MotionIndex index = load_or_build_index(config, registry, db, out);
    const int use_k = std::min(k > 0 ? k : config.retrieval_k, index.size());

    const RetrievalResult result = retrieve(index, registry, prompt, use_k);
    out << "query: " << prompt << "\n";
    out << "matched: " << result.label << "\n";
    json candidates = json::array();
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        const auto& cand = result.candidates[i];
        out << "  [" << i << "] " << index.entries[cand.index].label
            << "  stage1=" << cand.score << "  stage2=" << result.stage2_scores[i]
            << (cand.index == result.entry_index ? "  <- selected" : "") << "\n";
        candidates.push_back({{"label", index.entries[cand.index].label},
                              {"stage1_score", cand.score},
                              {"stage2_score", result.stage2_scores[i]}});
    }

    std::filesystem::create_directories(config.out_dir);
    json output = {{"query", prompt},
                   {"label", result.label},
                   {"motion_ref", index.entries[result.entry_index].motion_ref},
                   {"k", use_k},
                   {"candidates", candidates}};
    std::ofstream file(config.out_dir / "retrieval.json");
    file << output.dump(2) << "\n";
    return result;
}

void cmd_stylize(const RunConfig& config_in, const std::string& prompt, std::ostream& out) {
    RunConfig config = config_in;
    finalize_seeds(config);
    config.validate_paths();
    if (prompt.empty()) throw ConfigError("stylize: empty prompt");

    const EncoderRegistry registry = build_registry(config);
    const SkinnedBodyModel body = load_configured_body(config);
    const MotionDatabase db(config.motion_db);
    const MotionIndex index = load_or_build_index(config, registry, db, out);
    const int k = std::min(config.retrieval_k, index.size());

    const RetrievedMotion retrieved = retrieve_motion(index, db, registry, prompt, k);
    out << "retrieved motion: " << retrieved.result.label << " ("
        << retrieved.motion.poses.size() << " frames)\n";
    if (!retrieved.motion.poses.empty() &&
        retrieved.motion.poses[0].rotations.rows() != body.joint_count())
        throw DataError("motion has " + std::to_string(retrieved.motion.poses[0].rotations.rows()) +
                        " joints, body has " + std::to_string(body.joint_count()));

    const auto meshes =
        motion_to_meshes(body, retrieved.motion.poses, retrieved.motion.shape,
                         config.optimization.exec());

    const auto t0 = std::chrono::steady_clock::now();
    const OptimizeResult result =
        optimize_dnsf(config.optimization, body, retrieved.motion.shape, meshes, prompt,
                      registry.image(config.image_encoder), registry.text(config.stage1_encoder),
                      config.render);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << "optimized " << result.report.records.size() << " iterations in " << seconds
        << "s; loss " << result.report.initial_total() << " -> " << result.report.final_total()
        << "\n";

    std::filesystem::create_directories(config.out_dir);
    const auto checkpoint_path = config.out_dir / "style_field.fsf";
    save_checkpoint(checkpoint_path, result.params, body.vertex_count());
    write_loss_csv(config.out_dir / "loss_history.csv", result.report);

    const StylizedMotion stylized =
        stylize_motion(result.params, body, retrieved.motion.shape, meshes,
                       config.optimization.exec());
    const auto sequence_dir = config.out_dir / "sequence";
    if (config.export_format == "gltf") {
        std::filesystem::create_directories(sequence_dir);
        export_sequence_gltf(sequence_dir / "sequence.gltf", stylized.frames,
                             retrieved.motion.fps);
    } else {
        export_sequence_ply(sequence_dir, stylized.frames, retrieved.motion.fps,
                            config.ply_binary);
    }

    json manifest = {
        {"prompt", prompt},
        {"label", retrieved.result.label},
        {"motion_ref", index.entries[retrieved.result.entry_index].motion_ref},
        {"frame_indices", result.frame_indices},
        {"seed", config.seed},
        {"param_seed", config.optimization.param_seed},
        {"sampling_seed", config.optimization.sampling_seed},
        {"initial_loss", result.report.initial_total()},
        {"final_loss", result.report.final_total()},
        {"skipped_iterations", result.report.skipped_iterations},
        {"checkpoint", checkpoint_path.string()},
        {"loss_history", (config.out_dir / "loss_history.csv").string()},
        {"sequence_dir", sequence_dir.string()},
        {"wall_seconds", seconds},
        {"config", config_to_json(config)},
    };
    std::ofstream file(config.out_dir / "run_manifest.json");
    file << manifest.dump(2) << "\n";
    out << "run written to " << config.out_dir.string() << "\n";
}

PrecisionResult cmd_eval_sick(const RunConfig& config, const std::filesystem::path& dataset,
                              const std::string& variant, double score_min, double score_max,
                              std::ostream& out) {
    const EncoderRegistry registry = build_registry(config);
    const auto pairs = load_sentence_pairs_tsv(dataset);
    const RetrievalVariant v = parse_variant(variant);

    const TextEncoder& stage1 = registry.text(config.stage1_encoder);
    const TextEncoder& stage2 = registry.text(config.stage2_encoder);

    PrecisionResult result;
    const auto cache_root = forge_cache_root();
    if (!cache_root.empty()) {
        CachingTextEncoder cached1(stage1, cache_root / ("pairs_" + sanitize(stage1.id())));
        CachingTextEncoder cached2(stage2, cache_root / ("pairs_" + sanitize(stage2.id())));
        result = eval_precision(pairs, v, score_min, score_max, cached1, cached2,
                                config.retrieval_k);
    } else {
        result = eval_precision(pairs, v, score_min, score_max, stage1, stage2,
                                config.retrieval_k);
    }

    char line[256];
    std::snprintf(line, sizeof(line), "%-14s  score [%.2f, %.2f]  precision %6.2f%%  (%d/%d, pool %d)\n",
                  variant_name(v).c_str(), score_min, score_max, result.precision, result.hits,
                  result.pairs, result.pool_size);
    out << line;
    return result;
}

void cmd_export(const RunConfig& config, const std::filesystem::path& checkpoint_path,
                const std::string& motion_name, const std::string& format, std::ostream& out) {
    config.validate_paths();
    const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
    const SkinnedBodyModel body = load_configured_body(config);
    if (checkpoint.vertex_count != body.vertex_count())
        throw DataError("checkpoint was trained for " + std::to_string(checkpoint.vertex_count) +
                        " vertices, body has " + std::to_string(body.vertex_count()) +
                        " (check subdivision_levels)");

    const MotionDatabase db(config.motion_db);
    std::string motion_ref = motion_name;
    bool found = false;
    for (const auto& entry : db.entries()) {
        if (entry.motion_file == motion_name || entry.label == motion_name) {
            motion_ref = entry.motion_file;
            found = true;
            break;
        }
    }
    if (!found) throw DataError("export: no motion named '" + motion_name + "' in the database");

    const MotionSequence motion = db.load_motion(motion_ref);
    const auto meshes = motion_to_meshes(body, motion.poses, motion.shape);
    const StylizedMotion stylized =
        stylize_motion(checkpoint.params, body, motion.shape, meshes);

    const std::string fmt = format.empty() ? config.export_format : format;
    std::filesystem::create_directories(config.out_dir);
    if (fmt == "gltf") {
        export_sequence_gltf(config.out_dir / "sequence.gltf", stylized.frames, motion.fps);
        out << "wrote " << (config.out_dir / "sequence.gltf").string() << " (+ .bin), "
            << stylized.frames.size() << " morph-target frames\n";
    } else if (fmt == "ply") {
        export_sequence_ply(config.out_dir, stylized.frames, motion.fps, config.ply_binary);
        out << "wrote " << stylized.frames.size() << " ply frames to "
            << config.out_dir.string() << "\n";
    } else {
        throw ConfigError("export: unknown format '" + fmt + "' (expected ply or gltf)");
    }
}

void cmd_preview(const RunConfig& config, const std::filesystem::path& sequence_dir,
                 int turntable_frames, std::ostream& out) {
    const auto frames = load_sequence(sequence_dir);
    const int n = turntable_frames > 0 ? turntable_frames : static_cast<int>(frames.size());

    Vec3 center = Vec3::Zero();
    double radius = 0;
    {
        Eigen::Index total = 0;
        for (const auto& f : frames) {
            center += f.vertices.colwise().sum().transpose();
            total += f.vertex_count();
        }
        center /= static_cast<double>(total);
        for (const auto& f : frames)
            for (Eigen::Index v = 0; v < f.vertex_count(); ++v)
                radius = std::max(radius,
                                  (f.vertices.row(v).transpose() - center).norm());
    }

    std::filesystem::create_directories(config.out_dir);
    json manifest_frames = json::array();
    for (int i = 0; i < n; ++i) {
        const Mesh& mesh = frames[i % frames.size()];
        CameraPose pose;
        pose.azimuth = 2.0 * M_PI * i / n;
        pose.elevation = 15.0 * M_PI / 180.0;
        pose.radius = 2.2 * radius;
        pose.look_at = center;
        const RenderOutput view = mesh.has_colors() ? render(mesh, pose, config.render)
                                                    : render_geo(mesh, pose, config.render);
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.png", i);
        write_png(config.out_dir / name, view.rgb);
        manifest_frames.push_back({{"index", i}, {"file", name}});
    }
    json manifest = {{"frames", manifest_frames}};
    std::ofstream file(config.out_dir / "preview.json");
    file << manifest.dump(2) << "\n";
    out << "wrote " << n << " preview frames to " << config.out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"text-driven motion retrieval and mesh stylization"};
    app.require_subcommand(1);

    std::string config_path;
    std::string prompt;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON config file")->expected(1);

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option_function<std::uint64_t>(
            "--seed", [&](std::uint64_t s) { seed = s; seed_set = true; }, "master seed");
    };

    auto* index_cmd = app.add_subcommand("index", "embed every action label of the motion database");
    add_common(index_cmd);
    std::string db_override, body_override;
    index_cmd->add_option("--db", db_override, "motion database directory");

    auto* retrieve_cmd = app.add_subcommand("retrieve", "two-stage motion retrieval for a prompt");
    add_common(retrieve_cmd);
    int k = 0;
    retrieve_cmd->add_option("--prompt", prompt, "natural-language prompt")->required();
    retrieve_cmd->add_option("--k", k, "stage-1 candidate count");
    retrieve_cmd->add_option("--db", db_override, "motion database directory");

    auto* stylize_cmd = app.add_subcommand("stylize", "retrieve a motion and optimize the style field");
    add_common(stylize_cmd);
    stylize_cmd->add_option("--prompt", prompt, "natural-language prompt")->required();
    stylize_cmd->add_option("--db", db_override, "motion database directory");
    stylize_cmd->add_option("--body", body_override, "body manifest path");
    int iterations_override = -1;
    stylize_cmd->add_option("--iterations", iterations_override, "optimization iterations");

    auto* eval_cmd = app.add_subcommand("eval-sick", "sentence-pair retrieval precision");
    add_common(eval_cmd);
    std::string dataset, variant = "stage1+stage2";
    double score_min = 4.4, score_max = 4.8;
    eval_cmd->add_option("--data", dataset, "tab-separated sentence pair file")->required();
    eval_cmd->add_option("--variant", variant,
                         "stage1 | stage2 | stage1+stage2 | stage2+stage1");
    eval_cmd->add_option("--score-min", score_min, "minimum relatedness score");
    eval_cmd->add_option("--score-max", score_max, "maximum relatedness score");

    auto* export_cmd = app.add_subcommand("export", "apply a checkpoint to a motion and export");
    add_common(export_cmd);
    std::string checkpoint, motion_name, format;
    export_cmd->add_option("--checkpoint", checkpoint, "style field checkpoint")->required();
    export_cmd->add_option("--motion", motion_name, "motion label or file in the database")
        ->required();
    export_cmd->add_option("--format", format, "ply | gltf");
    export_cmd->add_option("--db", db_override, "motion database directory");
    export_cmd->add_option("--body", body_override, "body manifest path");

    auto* preview_cmd = app.add_subcommand("preview", "turntable PNG frames of an exported sequence");
    add_common(preview_cmd);
    std::string sequence_dir;
    int turntable = 0;
    preview_cmd->add_option("--sequence", sequence_dir, "exported sequence directory")->required();
    preview_cmd->add_option("--frames", turntable, "number of turntable frames");
    int preview_size = 0;
    preview_cmd->add_option("--size", preview_size, "preview image size in pixels");

    // --config may appear after the subcommand name.
    for (auto* cmd : {index_cmd, retrieve_cmd, stylize_cmd, eval_cmd, export_cmd, preview_cmd})
        cmd->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        RunConfig config =
            config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (!out_dir.empty()) config.out_dir = out_dir;
        if (seed_set) {
            config.seed = seed;
            config.optimization_seeds_set = false;
        }
        if (!db_override.empty()) config.motion_db = db_override;
        if (!body_override.empty()) config.body_manifest = body_override;

        if (app.got_subcommand(index_cmd)) {
            cmd_index(config, out);
        } else if (app.got_subcommand(retrieve_cmd)) {
            cmd_retrieve(config, prompt, k, out);
        } else if (app.got_subcommand(stylize_cmd)) {
            if (iterations_override >= 0) config.optimization.iterations = iterations_override;
            cmd_stylize(config, prompt, out);
        } else if (app.got_subcommand(eval_cmd)) {
            cmd_eval_sick(config, dataset, variant, score_min, score_max, out);
        } else if (app.got_subcommand(export_cmd)) {
            cmd_export(config, checkpoint, motion_name, format, out);
        } else if (app.got_subcommand(preview_cmd)) {
            if (preview_size > 0) {
                config.render.height = preview_size;
                config.render.width = preview_size;
            }
            cmd_preview(config, sequence_dir, turntable, out);
        }
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace forge
