#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace occkit {

// Mismatched grid geometry, channel counts, or array extents.
struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed file content. byte_offset points at the section that failed.
struct format_error : std::runtime_error {
  std::size_t byte_offset;

  format_error(const std::string& msg, std::size_t offset)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
};

// Procedural generation could not satisfy its constraints.
struct generation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace occkit
