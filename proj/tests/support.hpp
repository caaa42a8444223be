#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "xflow/config.hpp"
#include "xflow/limits.hpp"

namespace testing_support {

// m = 2 gaussian bump on [0, 4], coarse enough for unit tests.
inline xflow::ConfigSpec bump_spec(int cells = 64, double t_end = 0.05) {
    return xflow::reference_pme_spec(cells, t_end);
}

inline xflow::InitialSpec initial(const std::string& text) {
    return xflow::parse_initial_spec(text);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    static std::mt19937_64 rng(std::random_device{}());
    const auto dir = std::filesystem::temp_directory_path() /
                     ("xflow-test-" + name + "-" + std::to_string(rng() % 1000000000));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing_support
