#include "forge/fixtures.hpp"

#include <cmath>
#include <fstream>

#include "forge/body.hpp"
#include "forge/rng.hpp"

namespace forge {

namespace {

// Sinusoidal swing of a joint set about one axis.
MotionSequence swing_motion(const std::string& label, int joints, int frames, double fps,
                            std::initializer_list<int> moving, int axis, double amplitude,
                            double phase_step) {
    MotionSequence seq;
    seq.label = label;
    seq.fps = fps;
    seq.poses.reserve(frames);
    for (int t = 0; t < frames; ++t) {
        PoseParams pose = PoseParams::identity(joints);
        int sign = 1;
        for (int j : moving) {
            pose.rotations(j, axis) = sign * amplitude * std::sin(phase_step * t);
            sign = -sign;
        }
        seq.poses.push_back(std::move(pose));
    }
    return seq;
}

}  // namespace

std::vector<MotionSequence> make_toy_motions(int joints, std::uint64_t seed) {
    // Joint layout of the toy body: 0 root, 1 spine, 2 neck, 3 head,
    // 4/5 shoulders, 6/7 hips.
    std::vector<MotionSequence> motions;
    motions.push_back(
        swing_motion("walking forward", joints, 24, 24, {6, 7}, 0, 0.6, 2.0 * M_PI / 24));
    motions.push_back(
        swing_motion("waving both arms", joints, 24, 24, {4, 5}, 2, 1.1, 2.0 * M_PI / 24));
    motions.push_back(
        swing_motion("bowing politely", joints, 24, 24, {1}, 0, 0.7, M_PI / 24));
    motions.push_back(
        swing_motion("turning the head", joints, 24, 24, {2}, 1, 0.8, 2.0 * M_PI / 24));
    motions.push_back(
        swing_motion("kicking with one leg", joints, 24, 24, {6}, 0, 1.0, 2.0 * M_PI / 24));

    // Mild random shape identity per motion.
    Rng rng(splitmix64(seed ^ hash_tag("toy-motion-shapes")));
    for (auto& motion : motions)
        for (int i = 0; i < 10; ++i) motion.shape.coefficients[i] = 0.1 * rng.normal();
    return motions;
}

ToyWorkspace write_toy_workspace(const std::filesystem::path& dir, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    ToyWorkspace ws;

    const SkinnedBodyModel body = make_toy_body();
    ws.body_manifest = dir / "body" / "body.json";
    save_body(ws.body_manifest, body);

    const auto motions = make_toy_motions(static_cast<int>(body.joint_count()), seed);
    ws.motion_db = dir / "motions";
    save_motion_db(ws.motion_db, motions);

    ws.sentence_pairs = dir / "pairs.tsv";
    std::ofstream out(ws.sentence_pairs);
    out << "pair_ID\tsentence_A\tsentence_B\trelatedness_score\n";
    int id = 0;
    for (const auto& motion : motions) {
        out << ++id << "\tsomeone is " << motion.label << "\t" << motion.label << "\t4.8\n";
    }
    out << ++id << "\ta person jumps high\twalking forward\t2.1\n";
    return ws;
}

void write_duplicate_pairs_tsv(const std::filesystem::path& path, int pairs) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out << "pair_ID\tsentence_A\tsentence_B\trelatedness_score\n";
    for (int i = 0; i < pairs; ++i) {
        const std::string sentence = "unique sentence number " + std::to_string(i);
        out << i + 1 << "\t" << sentence << "\t" << sentence << "\t4.8\n";
    }
}

}  // namespace forge
