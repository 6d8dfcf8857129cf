#include "yolite/image.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace yolite {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open image '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class HeaderParser {
public:
    explicit HeaderParser(const std::vector<std::uint8_t>& b) : b_(b) {}

    std::size_t number() {
        skip_space();
        std::size_t v = 0;
        bool any = false;
        while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
            v = v * 10 + (b_[pos_++] - '0');
            any = true;
            if (v > (1u << 24)) throw ImageError("PPM header value out of range");
        }
        if (!any) throw ImageError("malformed PPM header");
        return v;
    }
    std::size_t pos() const { return pos_; }
    void advance() { ++pos_; }

private:
    void skip_space() {
        while (pos_ < b_.size()) {
            if (b_[pos_] == '#') {
                while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
            } else if (std::isspace(b_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 2;
};

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 24)};
    out.write(b, 4);
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
    const auto b = slurp(path);
    if (b.size() < 2 || b[0] != 'P' || b[1] != '6') throw ImageError("'" + path.string() + "' is not a P6 PPM");
    HeaderParser hp(b);
    const std::size_t w = hp.number();
    const std::size_t h = hp.number();
    const std::size_t maxval = hp.number();
    if (maxval != 255) throw ImageError("PPM maxval must be 255, got " + std::to_string(maxval));
    if (w == 0 || h == 0) throw ImageError("PPM has zero size");
    if (hp.pos() >= b.size() || !std::isspace(b[hp.pos()])) throw ImageError("malformed PPM header");
    hp.advance();
    const std::size_t need = w * h * 3;
    if (b.size() - hp.pos() < need) throw ImageError("PPM pixel data truncated");
    Image img{w, h, std::vector<float>(need)};
    for (std::size_t i = 0; i < need; ++i) img.rgb[i] = static_cast<float>(b[hp.pos() + i]) / 255.0f;
    return img;
}

void write_ppm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ImageError("cannot write '" + path.string() + "'");
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    for (float v : img.rgb) out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
}

Image read_ylti(const std::filesystem::path& path) {
    const auto b = slurp(path);
    if (b.size() < 16 || std::memcmp(b.data(), "YLTI", 4) != 0) throw ImageError("'" + path.string() + "' is not a YLTI tensor");
    const std::size_t h = read_u32(b, 4), w = read_u32(b, 8), c = read_u32(b, 12);
    if (c != 3) throw ImageError("YLTI tensor must have 3 channels, got " + std::to_string(c));
    if (w == 0 || h == 0) throw ImageError("YLTI tensor has zero size");
    const std::size_t n = h * w * c;
    if (b.size() != 16 + n * 4) throw ImageError("YLTI payload length does not match its header");
    Image img{w, h, std::vector<float>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        const float v = std::bit_cast<float>(read_u32(b, 16 + 4 * i));
        if (!std::isfinite(v)) throw ImageError("YLTI tensor holds a non-finite value");
        img.rgb[i] = std::clamp(v, 0.0f, 1.0f);
    }
    return img;
}

void write_ylti(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ImageError("cannot write '" + path.string() + "'");
    out.write("YLTI", 4);
    put_u32(out, static_cast<std::uint32_t>(img.height));
    put_u32(out, static_cast<std::uint32_t>(img.width));
    put_u32(out, 3);
    for (float v : img.rgb) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageError("cannot open image '" + path.string() + "'");
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '6') return read_ppm(path);
    if (in.gcount() == 4 && std::memcmp(magic, "YLTI", 4) == 0) return read_ylti(path);
    throw ImageError("'" + path.string() + "' is neither a P6 PPM nor a YLTI tensor");
}

Box Letterbox::to_source(const Box& b) const {
    const float sx = static_cast<float>(resized_w) / static_cast<float>(source_w);
    const float sy = static_cast<float>(resized_h) / static_cast<float>(source_h);
    return Box{(b.cx - static_cast<float>(pad_x)) / sx, (b.cy - static_cast<float>(pad_y)) / sy, b.w / sx, b.h / sy};
}

Letterbox letterbox(const Image& img, std::size_t size) {
    YOLITE_CHECK(img.width > 0 && img.height > 0 && img.rgb.size() == img.width * img.height * 3,
                 "letterbox: malformed image");
    const double scale = std::min(static_cast<double>(size) / img.width, static_cast<double>(size) / img.height);
    Letterbox lb;
    lb.size = size;
    lb.source_w = img.width;
    lb.source_h = img.height;
    lb.resized_w = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(img.width * scale)), 1, size);
    lb.resized_h = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(img.height * scale)), 1, size);
    lb.pad_x = (size - lb.resized_w) / 2;
    lb.pad_y = (size - lb.resized_h) / 2;
    lb.tensor = Tensor(Shape{1, 3, size, size}, kLetterboxFill);

    // Corner-aligned sampling: an unscaled axis maps every pixel onto itself.
    auto src_coord = [](std::size_t dst, std::size_t out_n, std::size_t in_n) {
        if (out_n <= 1 || in_n <= 1) return 0.0;
        return static_cast<double>(dst) * static_cast<double>(in_n - 1) / static_cast<double>(out_n - 1);
    };
    for (std::size_t y = 0; y < lb.resized_h; ++y) {
        const double sy = src_coord(y, lb.resized_h, img.height);
        const auto y0 = static_cast<std::size_t>(sy);
        const std::size_t y1 = std::min(y0 + 1, img.height - 1);
        const float fy = static_cast<float>(sy - static_cast<double>(y0));
        for (std::size_t x = 0; x < lb.resized_w; ++x) {
            const double sx = src_coord(x, lb.resized_w, img.width);
            const auto x0 = static_cast<std::size_t>(sx);
            const std::size_t x1 = std::min(x0 + 1, img.width - 1);
            const float fx = static_cast<float>(sx - static_cast<double>(x0));
            for (std::size_t c = 0; c < 3; ++c) {
                float v;
                if (fx == 0.0f && fy == 0.0f) {
                    v = img.at(y0, x0, c);
                } else {
                    const float top = img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx;
                    const float bot = img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx;
                    v = std::clamp(top * (1 - fy) + bot * fy, 0.0f, 1.0f);
                }
                lb.tensor.at(0, c, lb.pad_y + y, lb.pad_x + x) = v;
            }
        }
    }
    return lb;
}

}  // namespace yolite
