#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace srr {

using Timestamp = std::chrono::sys_seconds;

/// Parses `YYYY-MM-DD[T| ]HH:MM[:SS][Z|+HH[:MM]|-HH[:MM]]` into UTC.
/// Throws std::invalid_argument on malformed input.
Timestamp parse_timestamp(std::string_view text);

/// Formats as `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(Timestamp t);

/// Start of the UTC civil day containing `t`.
inline Timestamp day_floor(Timestamp t) {
    return std::chrono::floor<std::chrono::days>(t);
}

}  // namespace srr
