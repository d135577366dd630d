#pragma once

#include "chaosbench/systems.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing {

inline const chaosbench::Registry& registry() {
    static const chaosbench::Registry r = chaosbench::Registry::load(chaosbench::Registry::default_path());
    return r;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto dir = std::filesystem::temp_directory_path() / ("chaosbench-" + tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
