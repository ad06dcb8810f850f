#pragma once

#include "ldae/gradients.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace ldae::testing {

using ldae::random_matrix;
using ldae::random_params;

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ldae_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace ldae::testing
