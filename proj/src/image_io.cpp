#include "gridface/image_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gridface/common.hpp"

namespace gridface {

void write_pnm(const std::string& path, const std::vector<double>& image, int channels,
               int height, int width) {
    GF_REQUIRE(channels == 1 || channels == 3, "write_pnm: channels must be 1 or 3");
    GF_REQUIRE(image.size() == static_cast<size_t>(channels) * height * width,
               "write_pnm: image size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("write_pnm: cannot open " + path);
    f << (channels == 1 ? "P5" : "P6") << "\n" << width << " " << height << "\n255\n";
    // Planar [C,H,W] doubles to interleaved bytes.
    size_t plane = static_cast<size_t>(height) * width;
    std::vector<unsigned char> bytes(image.size());
    size_t o = 0;
    for (size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < channels; ++c) {
            double v = image[c * plane + i];
            int b = static_cast<int>(std::lround(v * 255.0));
            bytes[o++] = static_cast<unsigned char>(b < 0 ? 0 : (b > 255 ? 255 : b));
        }
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write_pnm: write failed for " + path);
}

namespace {

int read_pnm_int(std::istream& in) {
    // Skips whitespace and '#' comments per the PNM grammar.
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (!std::isspace(c)) {
            break;
        }
        c = in.get();
    }
    if (c == EOF) throw IoError("read_pnm: truncated header");
    int v = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        any = true;
        c = in.get();
    }
    if (!any) throw IoError("read_pnm: malformed header");
    return v;
}

}  // namespace

std::vector<double> read_pnm(const std::string& path, int* channels, int* height, int* width) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("read_pnm: cannot open " + path);
    char m0 = 0, m1 = 0;
    f.get(m0);
    f.get(m1);
    int ch;
    if (m0 == 'P' && m1 == '5') {
        ch = 1;
    } else if (m0 == 'P' && m1 == '6') {
        ch = 3;
    } else {
        throw IoError("read_pnm: unsupported magic in " + path);
    }
    int w = read_pnm_int(f);
    int h = read_pnm_int(f);
    int maxval = read_pnm_int(f);
    if (maxval != 255) throw IoError("read_pnm: only maxval 255 supported");
    size_t count = static_cast<size_t>(ch) * h * w;
    std::vector<unsigned char> bytes(count);
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
    if (f.gcount() != static_cast<std::streamsize>(count)) {
        throw IoError("read_pnm: truncated pixel data in " + path);
    }
    std::vector<double> out(count);
    size_t plane = static_cast<size_t>(h) * w;
    size_t o = 0;
    for (size_t i = 0; i < plane; ++i) {
        for (int c = 0; c < ch; ++c) out[c * plane + i] = bytes[o++] / 255.0;
    }
    *channels = ch;
    *height = h;
    *width = w;
    return out;
}

}  // namespace gridface
