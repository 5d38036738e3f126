#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "terra/errors.hpp"
#include "terra/image.hpp"

using namespace terra;

namespace {

std::string temp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("bilinear sampling at integer and fractional coordinates") {
    ImageF im(3, 3, 1);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 3; ++x) im.at(x, y) = static_cast<float>(x + 10 * y);
    CHECK(bilinear(im, 1.0, 1.0) == doctest::Approx(11.0));
    CHECK(bilinear(im, 0.5, 0.0) == doctest::Approx(0.5));
    CHECK(bilinear(im, 0.5, 0.5) == doctest::Approx(5.5));
    CHECK(in_support(im, 2.0, 2.0));
    CHECK_FALSE(in_support(im, 2.01, 1.0));
    CHECK_FALSE(in_support(im, -0.01, 1.0));
}

TEST_CASE("png round-trips: 8-bit gray, 8-bit rgb, 16-bit gray") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> byte(0, 255);
    std::uniform_int_distribution<int> word(0, 65535);

    ImageU8 gray(21, 13, 1);
    for (auto& v : gray.data) v = static_cast<std::uint8_t>(byte(rng));
    const std::string gray_path = temp_file("terra_test_gray.png");
    write_png(gray_path, gray);
    const ImageU8 gray_rt = read_png(gray_path);
    REQUIRE(gray_rt.width == gray.width);
    REQUIRE(gray_rt.channels == 1);
    CHECK(gray_rt.data == gray.data);

    ImageU8 rgb(9, 7, 3);
    for (auto& v : rgb.data) v = static_cast<std::uint8_t>(byte(rng));
    const std::string rgb_path = temp_file("terra_test_rgb.png");
    write_png(rgb_path, rgb);
    const ImageU8 rgb_rt = read_png(rgb_path);
    REQUIRE(rgb_rt.channels == 3);
    CHECK(rgb_rt.data == rgb.data);

    ImageU16 deep(15, 11, 1);
    for (auto& v : deep.data) v = static_cast<std::uint16_t>(word(rng));
    const std::string deep_path = temp_file("terra_test_16.png");
    write_png16(deep_path, deep);
    const ImageU16 deep_rt = read_png16(deep_path);
    CHECK(deep_rt.data == deep.data);

    CHECK_THROWS_AS(read_png(temp_file("terra_does_not_exist.png")), IoError);
    std::remove(gray_path.c_str());
    std::remove(rgb_path.c_str());
    std::remove(deep_path.c_str());
}

TEST_CASE("gaussian_blur: impulse response and anisotropy") {
    ImageF im(21, 21, 1, 0.0f);
    im.at(10, 10) = 1.0f;
    const ImageF blurred = gaussian_blur(im, 1.0, 1.0);

    // interior impulse response equals the normalized separable kernel
    double kernel_sum = 0;
    for (int i = -3; i <= 3; ++i) kernel_sum += std::exp(-0.5 * i * i);
    const auto k1 = [&](int i) { return std::exp(-0.5 * i * i) / kernel_sum; };
    for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
            CHECK(blurred.at(10 + dx, 10 + dy) ==
                  doctest::Approx(k1(dx) * k1(dy)).epsilon(1e-5));
        }
    }

    // vertical-only blur leaves rows crisp
    const ImageF vert = gaussian_blur(im, 0.0, 2.0);
    CHECK(vert.at(10, 13) > 0.0f);
    CHECK(vert.at(13, 10) == doctest::Approx(0.0));
}
