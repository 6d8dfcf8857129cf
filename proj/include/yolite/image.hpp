#pragma once

#include <filesystem>
#include <vector>

#include "yolite/detect.hpp"
#include "yolite/tensor.hpp"

namespace yolite {

class ImageError : public Error {
public:
    using Error::Error;
};

// Interleaved RGB, row-major, values in [0,1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> rgb;

    float at(std::size_t y, std::size_t x, std::size_t c) const { return rgb[(y * width + x) * 3 + c]; }
};

// Binary PPM, P6, maxval 255. Comments (#...) in the header are allowed.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const Image& img, const std::filesystem::path& path);

// Raw tensor: "YLTI" | u32 height | u32 width | u32 channels (3) | f32 LE, HWC interleaved.
Image read_ylti(const std::filesystem::path& path);
void write_ylti(const Image& img, const std::filesystem::path& path);

// Picks the reader from the leading magic bytes.
Image read_image(const std::filesystem::path& path);

struct Letterbox {
    Tensor tensor;  // (1, 3, size, size), CHW
    std::size_t size = 0;
    std::size_t resized_w = 0, resized_h = 0;
    std::size_t pad_x = 0, pad_y = 0;
    std::size_t source_w = 0, source_h = 0;

    // Maps a box in network-input pixels back to source-image pixels.
    Box to_source(const Box& b) const;
};

inline constexpr float kLetterboxFill = 127.5f / 255.0f;

// Aspect-preserving bilinear resize into a square canvas filled with neutral gray.
// A source that already has the target size is copied unchanged.
Letterbox letterbox(const Image& img, std::size_t size);

}  // namespace yolite
