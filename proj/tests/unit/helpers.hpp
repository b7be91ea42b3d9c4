#pragma once

#include <filesystem>
#include <string>

#include "srr/series.hpp"
#include "srr/time.hpp"

namespace testing {

inline srr::IntervalSeries series(std::vector<double> values, int interval_seconds = 900,
                                  const std::string& id = "h") {
    return {id, srr::parse_timestamp("2020-01-01T00:00:00Z"), interval_seconds, std::move(values)};
}

// Empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("srr_unit_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
