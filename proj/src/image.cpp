#include "nighttrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace nighttrack {

std::array<double, 3> Image::channel_means() const {
    std::array<double, 3> m{0.0, 0.0, 0.0};
    const size_t n = static_cast<size_t>(width) * static_cast<size_t>(height);
    if (n == 0) return m;
    for (size_t i = 0; i < n; ++i) {
        m[0] += rgb[i * 3];
        m[1] += rgb[i * 3 + 1];
        m[2] += rgb[i * 3 + 2];
    }
    for (double& v : m) v /= static_cast<double>(n);
    return m;
}

void quantize8(Image& img) {
    for (double& v : img.rgb) {
        const double c = std::clamp(v, 0.0, 1.0);
        v = std::round(c * 255.0) / 255.0;
    }
}

void write_ppm(const Image& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("write_ppm: cannot open " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> bytes(img.rgb.size());
    for (size_t i = 0; i < img.rgb.size(); ++i) {
        const double c = std::clamp(img.rgb[i], 0.0, 1.0);
        bytes[i] = static_cast<unsigned char>(std::lround(c * 255.0));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw DataError("write_ppm: short write to " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("read_ppm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw ParseError("read_ppm: " + path + " is not a binary PPM");
    int w = 0, h = 0, maxval = 0;
    f >> w >> h >> maxval;
    if (!f || w <= 0 || h <= 0 || maxval != 255) {
        throw ParseError("read_ppm: bad header in " + path);
    }
    f.get();  // single whitespace after maxval
    Image img(w, h);
    std::vector<unsigned char> bytes(static_cast<size_t>(3 * w * h));
    f.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (f.gcount() != static_cast<std::streamsize>(bytes.size())) {
        throw ParseError("read_ppm: truncated pixel data in " + path);
    }
    for (size_t i = 0; i < bytes.size(); ++i) img.rgb[i] = bytes[i] / 255.0;
    return img;
}

Tensor to_tensor(const Image& img) {
    const int64_t h = img.height, w = img.width;
    std::vector<double> data(static_cast<size_t>(3 * h * w));
    for (int64_t c = 0; c < 3; ++c) {
        for (int64_t y = 0; y < h; ++y) {
            for (int64_t x = 0; x < w; ++x) {
                data[static_cast<size_t>(c * h * w + y * w + x)] =
                    img.rgb[static_cast<size_t>((y * w + x) * 3 + c)];
            }
        }
    }
    return Tensor::from_data({3, h, w}, std::move(data));
}

}  // namespace nighttrack
