#include "forge/retrieval.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "forge/binary_io.hpp"

namespace forge {

using nlohmann::json;

MotionIndex build_index(std::span<const ActionLabelEntry> entries, const TextEncoder& stage1,
                        const TextEncoder& stage2) {
    if (entries.empty()) throw std::invalid_argument("build_index: no entries");
    MotionIndex index;
    index.entries.assign(entries.begin(), entries.end());
    index.stage1_encoder_id = stage1.id();
    index.stage2_encoder_id = stage2.id();
    index.stage1.resize(static_cast<Eigen::Index>(entries.size()), stage1.dimension());
    index.stage2.resize(static_cast<Eigen::Index>(entries.size()), stage2.dimension());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].label.empty())
            throw std::invalid_argument("build_index: empty label at entry " + std::to_string(i));
        try {
            index.stage1.row(static_cast<Eigen::Index>(i)) =
                stage1.encode(entries[i].label).transpose();
            index.stage2.row(static_cast<Eigen::Index>(i)) =
                stage2.encode(entries[i].label).transpose();
        } catch (const std::exception& e) {
            throw DataError("build_index: encoding failed for label \"" + entries[i].label +
                            "\": " + e.what());
        }
    }
    return index;
}

void save_index(const std::filesystem::path& dir, const MotionIndex& index) {
    std::filesystem::create_directories(dir);

    auto save_table = [&](const std::string& name, const std::string& encoder_id,
                          const MatX& table) {
        EmbeddingCache cache;
        cache.encoder_id = encoder_id;
        cache.dimension = static_cast<int>(table.cols());
        for (const auto& e : index.entries) cache.item_ids.push_back(e.label);
        cache.values = table;
        save_embedding_cache(dir / name, cache);
    };
    save_table("stage1_embeddings", index.stage1_encoder_id, index.stage1);
    save_table("stage2_embeddings", index.stage2_encoder_id, index.stage2);

    json entries = json::array();
    for (const auto& e : index.entries)
        entries.push_back({{"label", e.label}, {"motion_ref", e.motion_ref}});
    json manifest = {{"entries", entries},
                     {"stage1_encoder", index.stage1_encoder_id},
                     {"stage2_encoder", index.stage2_encoder_id},
                     {"stage1_cache", "stage1_embeddings"},
                     {"stage2_cache", "stage2_embeddings"}};
    std::ofstream out(dir / "index.json");
    if (!out) throw DataError("cannot open for writing: " + (dir / "index.json").string());
    out << manifest.dump(2) << "\n";
}

MotionIndex load_index(const std::filesystem::path& dir) {
    std::ifstream in(dir / "index.json");
    if (!in) throw DataError("cannot open index: " + (dir / "index.json").string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError("invalid index.json in " + dir.string() + ": " + e.what());
    }

    MotionIndex index;
    try {
        for (const auto& node : manifest.at("entries"))
            index.entries.push_back({node.at("label").get<std::string>(),
                                     node.value("motion_ref", std::string())});
        index.stage1_encoder_id = manifest.at("stage1_encoder").get<std::string>();
        index.stage2_encoder_id = manifest.at("stage2_encoder").get<std::string>();
        const auto c1 = load_embedding_cache(dir / manifest.at("stage1_cache").get<std::string>());
        const auto c2 = load_embedding_cache(dir / manifest.at("stage2_cache").get<std::string>());
        if (c1.values.rows() != index.size() || c2.values.rows() != index.size())
            throw DataError("index embedding tables do not match entry count");
        index.stage1 = c1.values;
        index.stage2 = c2.values;
    } catch (const json::exception& e) {
        throw DataError("index.json in " + dir.string() + ": " + e.what());
    }
    return index;
}

std::vector<ScoredEntry> stage1_match_embedding(const MotionIndex& index, const Embedding& query,
                                                int k) {
    if (index.size() == 0) throw std::invalid_argument("stage1_match: empty index");
    if (k > index.size())
        throw std::invalid_argument("stage1_match: k exceeds index size");
    std::vector<double> scores(index.size());
    for (int i = 0; i < index.size(); ++i)
        scores[i] = cosine_similarity(index.stage1.row(i).transpose(), query);
    const TopK best = top_k(scores, k);
    std::vector<ScoredEntry> out(best.indices.size());
    for (std::size_t i = 0; i < best.indices.size(); ++i)
        out[i] = {best.indices[i], best.values[i]};
    return out;
}

int stage2_rerank_embedding(const MotionIndex& index, std::span<const ScoredEntry> candidates,
                            const Embedding& query, std::vector<double>* stage2_scores) {
    if (candidates.empty()) throw std::invalid_argument("stage2_rerank: no candidates");
    int best = candidates[0].index;
    double best_score = -std::numeric_limits<double>::infinity();
    if (stage2_scores) stage2_scores->clear();
    for (const auto& cand : candidates) {
        const double s = cosine_similarity(index.stage2.row(cand.index).transpose(), query);
        if (stage2_scores) stage2_scores->push_back(s);
        if (s > best_score) {
            best_score = s;
            best = cand.index;
        }
    }
    return best;
}

std::vector<ScoredEntry> stage1_match(const MotionIndex& index, const EncoderRegistry& registry,
                                      const std::string& query, int k) {
    if (query.empty()) throw std::invalid_argument("stage1_match: empty query");
    const auto& encoder = registry.text(index.stage1_encoder_id);
    return stage1_match_embedding(index, encoder.encode(query), k);
}

RetrievalResult retrieve(const MotionIndex& index, const EncoderRegistry& registry,
                         const std::string& query, int k) {
    RetrievalResult result;
    result.candidates = stage1_match(index, registry, query, k);
    const auto& stage2 = registry.text(index.stage2_encoder_id);
    result.entry_index = stage2_rerank_embedding(index, result.candidates,
                                                 stage2.encode(query), &result.stage2_scores);
    result.label = index.entries[result.entry_index].label;
    return result;
}

// ---------------------------------------------------------------------------
// Motion database

MotionDatabase::MotionDatabase(std::filesystem::path root) : root_(std::move(root)) {
    std::ifstream in(root_ / "manifest.json");
    if (!in) throw DataError("cannot open motion database manifest: " +
                             (root_ / "manifest.json").string());
    json manifest;
    try {
        in >> manifest;
        for (const auto& node : manifest.at("entries")) {
            MotionDbEntry entry;
            entry.label = node.at("label").get<std::string>();
            entry.motion_file = node.at("motion_file").get<std::string>();
            entry.frames = node.at("frames").get<int>();
            entry.fps = node.at("fps").get<double>();
            entries_.push_back(std::move(entry));
        }
    } catch (const json::exception& e) {
        throw DataError("motion database manifest: " + std::string(e.what()));
    }
}

std::vector<ActionLabelEntry> MotionDatabase::label_entries() const {
    std::vector<ActionLabelEntry> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back({e.label, e.motion_file});
    return out;
}

MotionSequence MotionDatabase::load_motion(const std::string& motion_ref) const {
    const MotionDbEntry* entry = nullptr;
    for (const auto& e : entries_)
        if (e.motion_file == motion_ref) {
            entry = &e;
            break;
        }
    if (!entry) throw DataError("motion database: unresolved motion_ref '" + motion_ref + "'");

    const auto path = root_ / entry->motion_file;
    const std::size_t bytes = std::filesystem::exists(path)
                                  ? static_cast<std::size_t>(std::filesystem::file_size(path))
                                  : 0;
    if (bytes == 0) throw DataError("motion database: missing motion file " + path.string());
    const std::size_t floats = bytes / sizeof(float);
    if (floats < 10 || (floats - 10) % (static_cast<std::size_t>(entry->frames) * 3) != 0)
        throw DataError("motion database: " + path.string() +
                        " does not hold (T*J*3)+10 float32 values for T=" +
                        std::to_string(entry->frames));
    const int joints = static_cast<int>((floats - 10) / (static_cast<std::size_t>(entry->frames) * 3));
    const auto raw = read_f32(path, floats);

    MotionSequence seq;
    seq.label = entry->label;
    seq.fps = entry->fps;
    seq.poses.resize(entry->frames);
    std::size_t offset = 0;
    for (int t = 0; t < entry->frames; ++t) {
        seq.poses[t].rotations.resize(joints, 3);
        for (int j = 0; j < joints; ++j)
            for (int c = 0; c < 3; ++c) seq.poses[t].rotations(j, c) = raw[offset++];
    }
    for (int i = 0; i < 10; ++i) seq.shape.coefficients[i] = raw[offset++];
    return seq;
}

void save_motion_db(const std::filesystem::path& root, std::span<const MotionSequence> motions) {
    std::filesystem::create_directories(root);
    json entries = json::array();
    int counter = 0;
    for (const auto& motion : motions) {
        const std::string file = "motion_" + std::to_string(counter++) + ".f32";
        const int frames = static_cast<int>(motion.poses.size());
        const auto joints = frames > 0 ? motion.poses[0].rotations.rows() : 0;
        std::vector<double> buf;
        buf.reserve(static_cast<std::size_t>(frames) * joints * 3 + 10);
        for (const auto& pose : motion.poses) {
            if (pose.rotations.rows() != joints)
                throw std::invalid_argument("save_motion_db: inconsistent joint counts");
            for (Eigen::Index j = 0; j < joints; ++j)
                for (int c = 0; c < 3; ++c) buf.push_back(pose.rotations(j, c));
        }
        for (int i = 0; i < 10; ++i) buf.push_back(motion.shape.coefficients[i]);
        write_f32(root / file, buf.data(), buf.size());
        entries.push_back({{"label", motion.label},
                           {"motion_file", file},
                           {"frames", frames},
                           {"fps", motion.fps}});
    }
    json manifest = {{"entries", entries}};
    std::ofstream out(root / "manifest.json");
    if (!out) throw DataError("cannot open for writing: " + (root / "manifest.json").string());
    out << manifest.dump(2) << "\n";
}

RetrievedMotion retrieve_motion(const MotionIndex& index, const MotionDatabase& db,
                                const EncoderRegistry& registry, const std::string& query,
                                int k) {
    RetrievedMotion out;
    out.result = retrieve(index, registry, query, k);
    out.motion = db.load_motion(index.entries[out.result.entry_index].motion_ref);
    return out;
}

// ---------------------------------------------------------------------------
// Sentence-pair evaluation

SentencePairDataset load_sentence_pairs_tsv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open sentence pair file: " + path.string());

    std::string header;
    if (!std::getline(in, header)) throw DataError(path.string() + ": empty file");
    std::vector<std::string> columns;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, '\t')) columns.push_back(col);
    }
    auto column_of = [&](const std::string& name) {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return static_cast<int>(i);
        throw DataError(path.string() + ": missing column '" + name + "'");
    };
    const int col_a = column_of("sentence_A");
    const int col_b = column_of("sentence_B");
    const int col_score = column_of("relatedness_score");

    SentencePairDataset dataset;
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, '\t')) fields.push_back(field);
        const int needed = std::max({col_a, col_b, col_score});
        if (static_cast<int>(fields.size()) <= needed)
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": short row");
        SentencePair pair;
        pair.sentence_a = fields[col_a];
        pair.sentence_b = fields[col_b];
        try {
            pair.relatedness = std::stod(fields[col_score]);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": bad relatedness score '" + fields[col_score] + "'");
        }
        if (pair.relatedness < 1.0 || pair.relatedness > 5.0)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": relatedness outside [1,5]");
        dataset.push_back(std::move(pair));
    }
    return dataset;
}

RetrievalVariant parse_variant(const std::string& name) {
    if (name == "stage1") return RetrievalVariant::stage1_only;
    if (name == "stage2") return RetrievalVariant::stage2_only;
    if (name == "stage2+stage1") return RetrievalVariant::stage2_then_stage1;
    if (name == "stage1+stage2") return RetrievalVariant::stage1_then_stage2;
    throw ConfigError("unknown retrieval variant '" + name +
                      "'; expected stage1, stage2, stage1+stage2 or stage2+stage1");
}

std::string variant_name(RetrievalVariant variant) {
    switch (variant) {
        case RetrievalVariant::stage1_only: return "stage1";
        case RetrievalVariant::stage2_only: return "stage2";
        case RetrievalVariant::stage2_then_stage1: return "stage2+stage1";
        case RetrievalVariant::stage1_then_stage2: return "stage1+stage2";
    }
    return "?";
}

PrecisionResult eval_precision(const SentencePairDataset& dataset, RetrievalVariant variant,
                               double score_min, double score_max, const TextEncoder& stage1,
                               const TextEncoder& stage2, int k) {
    constexpr double kScoreSlack = 1e-9;
    std::vector<const SentencePair*> pairs;
    for (const auto& p : dataset)
        if (p.relatedness >= score_min - kScoreSlack && p.relatedness <= score_max + kScoreSlack)
            pairs.push_back(&p);
    if (pairs.empty())
        throw DataError("eval_precision: no pairs in score range [" + std::to_string(score_min) +
                        ", " + std::to_string(score_max) + "]");

    // Candidate pool: distinct sentence_b values, first-occurrence order.
    std::vector<std::string> pool;
    std::unordered_map<std::string, int> pool_of;
    for (const auto* p : pairs)
        if (pool_of.emplace(p->sentence_b, static_cast<int>(pool.size())).second)
            pool.push_back(p->sentence_b);

    // Embed each distinct sentence once per encoder.
    auto embed_all = [](const TextEncoder& encoder, const std::vector<std::string>& items) {
        MatX table(static_cast<Eigen::Index>(items.size()), encoder.dimension());
        for (std::size_t i = 0; i < items.size(); ++i)
            table.row(static_cast<Eigen::Index>(i)) = encoder.encode(items[i]).transpose();
        return table;
    };
    const MatX pool1 = embed_all(stage1, pool);
    const MatX pool2 = embed_all(stage2, pool);

    std::unordered_map<std::string, Embedding> query1, query2;
    for (const auto* p : pairs) {
        if (!query1.count(p->sentence_a)) {
            query1.emplace(p->sentence_a, stage1.encode(p->sentence_a));
            query2.emplace(p->sentence_a, stage2.encode(p->sentence_a));
        }
    }

    auto argmax_pool = [&](const MatX& table, const Embedding& query,
                           std::span<const int> subset) {
        int best = subset.empty() ? 0 : subset[0];
        double best_score = -std::numeric_limits<double>::infinity();
        if (subset.empty()) {
            for (int i = 0; i < static_cast<int>(pool.size()); ++i) {
                const double s = cosine_similarity(table.row(i).transpose(), query);
                if (s > best_score) {
                    best_score = s;
                    best = i;
                }
            }
        } else {
            for (int i : subset) {
                const double s = cosine_similarity(table.row(i).transpose(), query);
                if (s > best_score) {
                    best_score = s;
                    best = i;
                }
            }
        }
        return best;
    };
    auto topk_pool = [&](const MatX& table, const Embedding& query) {
        std::vector<double> scores(pool.size());
        for (int i = 0; i < static_cast<int>(pool.size()); ++i)
            scores[i] = cosine_similarity(table.row(i).transpose(), query);
        return top_k(scores, std::min<int>(k, static_cast<int>(pool.size()))).indices;
    };

    PrecisionResult result;
    result.pairs = static_cast<int>(pairs.size());
    result.pool_size = static_cast<int>(pool.size());
    for (const auto* p : pairs) {
        const Embedding& q1 = query1.at(p->sentence_a);
        const Embedding& q2 = query2.at(p->sentence_a);
        int retrieved = 0;
        switch (variant) {
            case RetrievalVariant::stage1_only:
                retrieved = argmax_pool(pool1, q1, {});
                break;
            case RetrievalVariant::stage2_only:
                retrieved = argmax_pool(pool2, q2, {});
                break;
            case RetrievalVariant::stage1_then_stage2: {
                const auto candidates = topk_pool(pool1, q1);
                retrieved = argmax_pool(pool2, q2, candidates);
                break;
            }
            case RetrievalVariant::stage2_then_stage1: {
                const auto candidates = topk_pool(pool2, q2);
                retrieved = argmax_pool(pool1, q1, candidates);
                break;
            }
        }
        if (pool[retrieved] == p->sentence_b) ++result.hits;
    }
    result.precision = 100.0 * result.hits / result.pairs;
    return result;
}

}  // namespace forge
