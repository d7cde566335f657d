#pragma once

#include <string>
#include <vector>

namespace gridface {

// 8-bit binary PGM (P5) for single-channel rasters and PPM (P6) for
// 3-channel. Values in [0,1] map to bytes by round(v*255), clamped.
void write_pnm(const std::string& path, const std::vector<double>& image, int channels,
               int height, int width);

std::vector<double> read_pnm(const std::string& path, int* channels, int* height, int* width);

}  // namespace gridface
