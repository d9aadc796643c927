#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dba {

// Dense H x W x C pixel grid, row-major with interleaved channels.
// Pixel values live in [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0);
    Image(int h, int w, int c, std::vector<double> data);

    std::size_t size() const { return pixels.size(); }
    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }

    double& at(int row, int col, int ch = 0) {
        return pixels[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    double at(int row, int col, int ch = 0) const {
        return pixels[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }

    double mean() const;
    std::string shape_string() const;

    friend bool operator==(const Image&, const Image&) = default;
};

// Throws std::invalid_argument unless dims are positive, channels is 1 or 3,
// the buffer length matches and every pixel is in [0, 1].
void validate_image(const Image& img);

// Displacement in pixels; positive dx moves content right, positive dy down.
struct Offset {
    int dx = 0;
    int dy = 0;
    friend bool operator==(const Offset&, const Offset&) = default;
};

enum class EdgeMode { Wrap, Zero, Replicate };

std::string to_string(EdgeMode mode);
EdgeMode parse_edge_mode(const std::string& text);

// out(r, c) = in(r - dy, c - dx); coordinates falling outside the grid are
// resolved by `mode`.
Image shift_image(const Image& img, Offset off, EdgeMode mode = EdgeMode::Wrap);

// Per-pixel convex combination sum_k weights[k] * images[k], accumulated in
// list order. Weights must be non-negative and sum to 1 within 1e-9.
Image weighted_blend(std::span<const Image> images, std::span<const double> weights);

// --- augmentation ---------------------------------------------------------

struct Rotate {
    double degrees = 0.0;
};

// Zero-pad by `pad` on every side, then crop an original-size window whose
// top-left corner sits at (crop_x, crop_y) in padded coordinates.
struct CropPad {
    int pad = 0;
    int crop_x = 0;
    int crop_y = 0;
};

struct Brightness {
    double delta = 0.0;
};

struct Augmentation;

struct Compose {
    std::vector<Augmentation> steps;
};

struct Augmentation {
    std::variant<Rotate, CropPad, Brightness, Compose> op;
};

// Human-readable, stable descriptor, e.g. "rot(12.5)+crop(4,2,6)+bright(-0.1)".
std::string describe(const Augmentation& aug);

// Applies a fully parameterized augmentation. Rotation is bilinear about the
// image center with zero fill. Output has the input's shape and every pixel
// clamped to [0, 1].
Image apply_augmentation(const Image& img, const Augmentation& aug);

}  // namespace dba
