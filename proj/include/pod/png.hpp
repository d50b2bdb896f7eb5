#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pod {

struct Rgb {
  std::uint8_t r, g, b;
};

/// Writes an 8-bit RGB PNG. `pixels` holds width * height entries, row-major.
void write_png(const std::string& path, int width, int height, const std::vector<Rgb>& pixels);

}  // namespace pod
