#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "afb/numerics.hpp"

namespace afb {

/// Interleaved 8-bit RGB image, row-major.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> data;

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h) : width(w), height(h), data(w * h * 3, 0) {}

    std::uint8_t* at(std::size_t y, std::size_t x) { return data.data() + 3 * (y * width + x); }
    const std::uint8_t* at(std::size_t y, std::size_t x) const { return data.data() + 3 * (y * width + x); }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

/// Binary PGM (P5, maxval 255); pixel value = object index.
void write_pgm(const std::filesystem::path& path, const LabelMap& labels);
LabelMap read_pgm(const std::filesystem::path& path);

}  // namespace afb
