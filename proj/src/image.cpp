#include "dba/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dba {

Image::Image(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      pixels(static_cast<std::size_t>(std::max(h, 0)) * std::max(w, 0) * std::max(c, 0), fill) {}

Image::Image(int h, int w, int c, std::vector<double> data)
    : height(h), width(w), channels(c), pixels(std::move(data)) {}

double Image::mean() const {
    if (pixels.empty()) return 0.0;
    return std::accumulate(pixels.begin(), pixels.end(), 0.0) / static_cast<double>(pixels.size());
}

std::string Image::shape_string() const {
    std::ostringstream os;
    os << height << "x" << width << "x" << channels;
    return os.str();
}

void validate_image(const Image& img) {
    if (img.height <= 0 || img.width <= 0) {
        throw std::invalid_argument("image dimensions must be positive, got " + img.shape_string());
    }
    if (img.channels != 1 && img.channels != 3) {
        throw std::invalid_argument("image channels must be 1 or 3, got " + std::to_string(img.channels));
    }
    const auto expected = static_cast<std::size_t>(img.height) * img.width * img.channels;
    if (img.pixels.size() != expected) {
        throw std::invalid_argument("pixel buffer holds " + std::to_string(img.pixels.size()) +
                                    " values, expected " + std::to_string(expected));
    }
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        const double v = img.pixels[i];
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("pixel " + std::to_string(i) + " = " + std::to_string(v) +
                                        " lies outside [0,1]");
        }
    }
}

std::string to_string(EdgeMode mode) {
    switch (mode) {
        case EdgeMode::Wrap: return "wrap";
        case EdgeMode::Zero: return "zero";
        case EdgeMode::Replicate: return "replicate";
    }
    return "?";
}

EdgeMode parse_edge_mode(const std::string& text) {
    if (text == "wrap") return EdgeMode::Wrap;
    if (text == "zero") return EdgeMode::Zero;
    if (text == "replicate") return EdgeMode::Replicate;
    throw std::invalid_argument("unknown edge mode '" + text + "' (expected wrap|zero|replicate)");
}

namespace {

// Maps a possibly out-of-range coordinate into [0, extent) or returns -1
// when the mode says the sample is zero.
int resolve(int coord, int extent, EdgeMode mode) {
    if (coord >= 0 && coord < extent) return coord;
    switch (mode) {
        case EdgeMode::Wrap: return ((coord % extent) + extent) % extent;
        case EdgeMode::Zero: return -1;
        case EdgeMode::Replicate: return std::clamp(coord, 0, extent - 1);
    }
    return -1;
}

}  // namespace

Image shift_image(const Image& img, Offset off, EdgeMode mode) {
    if (std::abs(off.dx) >= img.width || std::abs(off.dy) >= img.height) {
        std::ostringstream os;
        os << "offset (" << off.dx << "," << off.dy << ") out of range for " << img.shape_string()
           << " image; need |dx| < width and |dy| < height";
        throw std::invalid_argument(os.str());
    }
    Image out(img.height, img.width, img.channels);
    for (int r = 0; r < img.height; ++r) {
        const int sr = resolve(r - off.dy, img.height, mode);
        for (int c = 0; c < img.width; ++c) {
            const int sc = resolve(c - off.dx, img.width, mode);
            if (sr < 0 || sc < 0) continue;
            for (int ch = 0; ch < img.channels; ++ch) {
                out.at(r, c, ch) = img.at(sr, sc, ch);
            }
        }
    }
    return out;
}

Image weighted_blend(std::span<const Image> images, std::span<const double> weights) {
    if (images.empty()) throw std::invalid_argument("weighted_blend needs at least one image");
    if (images.size() != weights.size()) {
        throw std::invalid_argument("weighted_blend got " + std::to_string(images.size()) + " images but " +
                                    std::to_string(weights.size()) + " weights");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!(weights[k] >= 0.0)) {
            throw std::invalid_argument("weight " + std::to_string(k) + " is negative");
        }
        if (!images[k].same_shape(images[0])) {
            throw std::invalid_argument("image " + std::to_string(k) + " has shape " + images[k].shape_string() +
                                        ", expected " + images[0].shape_string());
        }
        total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("weights sum to " + std::to_string(total) + ", expected 1");
    }

    Image out(images[0].height, images[0].width, images[0].channels);
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < images.size(); ++k) {
            acc += weights[k] * images[k].pixels[i];
        }
        // A convex combination cannot leave [0,1] in exact arithmetic; the
        // clamp only absorbs last-ulp rounding.
        out.pixels[i] = std::clamp(acc, 0.0, 1.0);
    }
    return out;
}

namespace {

Image rotate(const Image& img, double degrees) {
    const double theta = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double cy = (img.height - 1) / 2.0;
    const double cx = (img.width - 1) / 2.0;

    auto sample = [&](int r, int c, int ch) -> double {
        if (r < 0 || r >= img.height || c < 0 || c >= img.width) return 0.0;
        return img.at(r, c, ch);
    };

    Image out(img.height, img.width, img.channels);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            // inverse map: rotate the output coordinate back by -theta
            const double yr = r - cy;
            const double xr = c - cx;
            const double sx = cs * xr + sn * yr + cx;
            const double sy = -sn * xr + cs * yr + cy;
            const double fx = std::floor(sx);
            const double fy = std::floor(sy);
            const double ax = sx - fx;
            const double ay = sy - fy;
            const int x0 = static_cast<int>(fx);
            const int y0 = static_cast<int>(fy);
            for (int ch = 0; ch < img.channels; ++ch) {
                const double top = (1.0 - ax) * sample(y0, x0, ch) + ax * sample(y0, x0 + 1, ch);
                const double bottom = (1.0 - ax) * sample(y0 + 1, x0, ch) + ax * sample(y0 + 1, x0 + 1, ch);
                out.at(r, c, ch) = std::clamp((1.0 - ay) * top + ay * bottom, 0.0, 1.0);
            }
        }
    }
    return out;
}

Image crop_pad(const Image& img, const CropPad& cp) {
    if (cp.pad < 0) throw std::invalid_argument("crop pad must be non-negative");
    const int max_origin = 2 * cp.pad;
    if (cp.crop_x < 0 || cp.crop_y < 0 || cp.crop_x > max_origin || cp.crop_y > max_origin) {
        std::ostringstream os;
        os << "crop window at (" << cp.crop_x << "," << cp.crop_y << ") leaves the padded bounds; origin must lie in [0,"
           << max_origin << "]";
        throw std::invalid_argument(os.str());
    }
    Image out(img.height, img.width, img.channels);
    for (int r = 0; r < img.height; ++r) {
        const int sr = r + cp.crop_y - cp.pad;
        if (sr < 0 || sr >= img.height) continue;
        for (int c = 0; c < img.width; ++c) {
            const int sc = c + cp.crop_x - cp.pad;
            if (sc < 0 || sc >= img.width) continue;
            for (int ch = 0; ch < img.channels; ++ch) out.at(r, c, ch) = img.at(sr, sc, ch);
        }
    }
    return out;
}

Image brightness(const Image& img, double delta) {
    Image out = img;
    for (double& v : out.pixels) v = std::clamp(v + delta, 0.0, 1.0);
    return out;
}

std::string fmt_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

std::string describe(const Augmentation& aug) {
    return std::visit(
        [](const auto& op) -> std::string {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, Rotate>) {
                return "rot(" + fmt_num(op.degrees) + ")";
            } else if constexpr (std::is_same_v<T, CropPad>) {
                return "crop(" + std::to_string(op.pad) + "," + std::to_string(op.crop_x) + "," +
                       std::to_string(op.crop_y) + ")";
            } else if constexpr (std::is_same_v<T, Brightness>) {
                return "bright(" + fmt_num(op.delta) + ")";
            } else {
                std::string s;
                for (const auto& step : op.steps) {
                    if (!s.empty()) s += "+";
                    s += describe(step);
                }
                return s;
            }
        },
        aug.op);
}

Image apply_augmentation(const Image& img, const Augmentation& aug) {
    return std::visit(
        [&](const auto& op) -> Image {
            using T = std::decay_t<decltype(op)>;
            if constexpr (std::is_same_v<T, Rotate>) {
                return rotate(img, op.degrees);
            } else if constexpr (std::is_same_v<T, CropPad>) {
                return crop_pad(img, op);
            } else if constexpr (std::is_same_v<T, Brightness>) {
                if (op.delta < -1.0 || op.delta > 1.0) {
                    throw std::invalid_argument("brightness delta must lie in [-1,1]");
                }
                return brightness(img, op.delta);
            } else {
                if (op.steps.empty()) throw std::invalid_argument("composed augmentation list is empty");
                Image cur = img;
                for (const auto& step : op.steps) cur = apply_augmentation(cur, step);
                return cur;
            }
        },
        aug.op);
}

}  // namespace dba
