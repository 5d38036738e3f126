#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace terra {

/// Row-major interleaved raster. Pixel centers sit at integer coordinates,
/// so the bilinear support of a WxH image is [0, W-1] x [0, H-1].
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, int c = 1, T fill = T(0))
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {}

    bool empty() const { return width <= 0 || height <= 0; }
    size_t size() const { return data.size(); }

    T& at(int x, int y, int c = 0) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    T at(int x, int y, int c = 0) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
};

using ImageU8 = Image<std::uint8_t>;
using ImageU16 = Image<std::uint16_t>;
using ImageF = Image<float>;

/// True when (x, y) lies inside the image's bilinear support.
template <typename T>
inline bool in_support(const Image<T>& im, double x, double y) {
    return x >= 0.0 && y >= 0.0 && x <= im.width - 1.0 && y <= im.height - 1.0;
}

/// Bilinear sample at continuous pixel coordinates. Caller guarantees support.
double bilinear(const ImageF& im, double x, double y, int c = 0);

/// All four texels contributing to a bilinear sample are nonzero in the mask.
bool mask_supports(const ImageU8& mask, double x, double y);

ImageF to_float(const ImageU8& im);   // maps [0,255] -> [0,1]
ImageU8 to_u8(const ImageF& im);      // clamps to [0,1], rounds to [0,255]

/// Separable Gaussian blur, kernels truncated at 3 sigma and renormalized at
/// the borders. Sigma <= 0 leaves that axis untouched.
ImageF gaussian_blur(const ImageF& im, double sigma_x, double sigma_y);

// PNG i/o. 8-bit readers accept gray or RGB (alpha stripped, palette expanded,
// 16-bit depth reduced). 16-bit variants are single-channel only.
ImageU8 read_png(const std::string& path);
void write_png(const std::string& path, const ImageU8& im);
ImageU16 read_png16(const std::string& path);
void write_png16(const std::string& path, const ImageU16& im);

}  // namespace terra
