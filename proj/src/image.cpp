#include "terra/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "terra/errors.hpp"

namespace terra {

double bilinear(const ImageF& im, double x, double y, int c) {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    // keep the 2x2 neighborhood inside the raster at the far edge
    x0 = std::clamp(x0, 0, im.width - 2 >= 0 ? im.width - 2 : 0);
    y0 = std::clamp(y0, 0, im.height - 2 >= 0 ? im.height - 2 : 0);
    const int x1 = std::min(x0 + 1, im.width - 1);
    const int y1 = std::min(y0 + 1, im.height - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double v00 = im.at(x0, y0, c);
    const double v10 = im.at(x1, y0, c);
    const double v01 = im.at(x0, y1, c);
    const double v11 = im.at(x1, y1, c);
    return (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) +
           fy * ((1.0 - fx) * v01 + fx * v11);
}

bool mask_supports(const ImageU8& mask, double x, double y) {
    if (!in_support(mask, x, y)) return false;
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    x0 = std::clamp(x0, 0, mask.width - 2 >= 0 ? mask.width - 2 : 0);
    y0 = std::clamp(y0, 0, mask.height - 2 >= 0 ? mask.height - 2 : 0);
    const int x1 = std::min(x0 + 1, mask.width - 1);
    const int y1 = std::min(y0 + 1, mask.height - 1);
    return mask.at(x0, y0) && mask.at(x1, y0) && mask.at(x0, y1) && mask.at(x1, y1);
}

ImageF to_float(const ImageU8& im) {
    ImageF out(im.width, im.height, im.channels);
    for (size_t i = 0; i < im.data.size(); ++i)
        out.data[i] = static_cast<float>(im.data[i] / 255.0);
    return out;
}

ImageU8 to_u8(const ImageF& im) {
    ImageU8 out(im.width, im.height, im.channels);
    for (size_t i = 0; i < im.data.size(); ++i) {
        const double v = std::clamp(static_cast<double>(im.data[i]), 0.0, 1.0);
        out.data[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return out;
}

namespace {

std::vector<double> gauss_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    }
    return k;
}

ImageF blur_axis(const ImageF& im, double sigma, bool horizontal) {
    if (sigma <= 0.0) return im;
    const std::vector<double> k = gauss_kernel(sigma);
    const int radius = static_cast<int>(k.size()) / 2;
    ImageF out(im.width, im.height, im.channels);
    for (int y = 0; y < im.height; ++y) {
        for (int x = 0; x < im.width; ++x) {
            for (int c = 0; c < im.channels; ++c) {
                double acc = 0, wsum = 0;
                for (int o = -radius; o <= radius; ++o) {
                    const int sx = horizontal ? x + o : x;
                    const int sy = horizontal ? y : y + o;
                    if (sx < 0 || sx >= im.width || sy < 0 || sy >= im.height) continue;
                    acc += k[o + radius] * im.at(sx, sy, c);
                    wsum += k[o + radius];
                }
                out.at(x, y, c) = static_cast<float>(acc / wsum);
            }
        }
    }
    return out;
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageF gaussian_blur(const ImageF& im, double sigma_x, double sigma_y) {
    return blur_axis(blur_axis(im, sigma_x, true), sigma_y, false);
}

ImageU8 read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    const png_byte depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    ImageU8 im(static_cast<int>(png_get_image_width(png, info)),
               static_cast<int>(png_get_image_height(png, info)),
               static_cast<int>(png_get_channels(png, info)));
    if (im.channels != 1 && im.channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": unsupported channel count");
    }

    std::vector<png_bytep> rows(im.height);
    for (int y = 0; y < im.height; ++y)
        rows[y] = im.data.data() + static_cast<size_t>(y) * im.width * im.channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return im;
}

void write_png(const std::string& path, const ImageU8& im) {
    if (im.empty() || (im.channels != 1 && im.channels != 3))
        throw IoError("write_png: bad image shape");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, im.width, im.height, 8,
                 im.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_bytep> rows(im.height);
    for (int y = 0; y < im.height; ++y)
        rows[y] = const_cast<png_bytep>(im.data.data() + static_cast<size_t>(y) * im.width * im.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

ImageU16 read_png16(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode " + path);
    }

    png_init_io(png, fp.get());
    png_read_info(png, info);
    if (png_get_bit_depth(png, info) != 16 ||
        png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path + ": expected 16-bit grayscale");
    }
    png_set_swap(png);  // PNG is big-endian on disk
    png_read_update_info(png, info);

    ImageU16 im(static_cast<int>(png_get_image_width(png, info)),
                static_cast<int>(png_get_image_height(png, info)), 1);
    std::vector<png_bytep> rows(im.height);
    for (int y = 0; y < im.height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(im.data.data() + static_cast<size_t>(y) * im.width);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return im;
}

void write_png16(const std::string& path, const ImageU16& im) {
    if (im.empty() || im.channels != 1)
        throw IoError("write_png16: expects single-channel image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode " + path);
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, im.width, im.height, 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);

    std::vector<png_bytep> rows(im.height);
    for (int y = 0; y < im.height; ++y)
        rows[y] = reinterpret_cast<png_bytep>(
            const_cast<std::uint16_t*>(im.data.data() + static_cast<size_t>(y) * im.width));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace terra
