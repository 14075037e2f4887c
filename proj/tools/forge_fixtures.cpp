// Generates a self-contained demo workspace (toy body, motion database,
// sentence pairs) so every CLI command can run offline.

#include <cstdint>
#include <cstdlib>
#include <iostream>

#include "forge/fixtures.hpp"

int main(int argc, char** argv) {
    std::string dir = "toy_workspace";
    std::uint64_t seed = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out" && i + 1 < argc)
            dir = argv[++i];
        else if (arg == "--seed" && i + 1 < argc)
            seed = std::strtoull(argv[++i], nullptr, 10);
        else {
            std::cerr << "usage: forge-fixtures [--out DIR] [--seed N]\n";
            return 2;
        }
    }
    try {
        const auto ws = forge::write_toy_workspace(dir, seed);
        std::cout << "body manifest:  " << ws.body_manifest.string() << "\n";
        std::cout << "motion db:      " << ws.motion_db.string() << "\n";
        std::cout << "sentence pairs: " << ws.sentence_pairs.string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
