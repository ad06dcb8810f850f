#pragma once

#include "ldae/patches.hpp"

#include <numbers>
#include <string>
#include <vector>

namespace ldae {

enum class TransformKind { Translation, Rotation, Scaling };

inline TransformKind parse_transform_kind(const std::string& s) {
    if (s == "translation") return TransformKind::Translation;
    if (s == "rotation") return TransformKind::Rotation;
    if (s == "scaling") return TransformKind::Scaling;
    throw InputError("unknown transformation '" + s + "'");
}

inline std::string to_string(TransformKind k) {
    switch (k) {
        case TransformKind::Translation: return "translation";
        case TransformKind::Rotation: return "rotation";
        case TransformKind::Scaling: return "scaling";
    }
    return "?";
}

inline constexpr int kTransformSetSize = 16;

/// Rotation angles in degrees: -32, -28, ..., 28.
inline std::vector<double> rotation_angles() {
    std::vector<double> out;
    for (int k = 0; k < kTransformSetSize; ++k) out.push_back(-32.0 + 4.0 * k);
    return out;
}

/// Zoom factors: 0.6, 0.65, ..., 1.35.
inline std::vector<double> zoom_factors() {
    std::vector<double> out;
    for (int k = 0; k < kTransformSetSize; ++k) out.push_back(0.6 + 0.05 * k);
    return out;
}

struct TransformOptions {
    int patch_size = 16;
    int grid_stride = 2;  // translation offsets {0, s, 2s, 3s} in both axes
};

/// Equal-size sets of model inputs; every member of a set comes from one source patch.
struct TransformSets {
    TransformKind kind = TransformKind::Translation;
    int set_size = kTransformSetSize;
    std::vector<double> parameters;  // angle, zoom factor or flattened grid offset per member
    std::vector<MatrixXd> sets;      // each set_size x input dim
    std::vector<std::size_t> source_images;

    std::size_t count() const { return sets.size(); }
};

/// Bilinear sample at continuous (row, col); outside the image the fill value is used.
inline double bilinear(const ImageSet& set, std::size_t image, double row, double col, int channel,
                       double fill) {
    const double r0f = std::floor(row);
    const double c0f = std::floor(col);
    const int r0 = static_cast<int>(r0f);
    const int c0 = static_cast<int>(c0f);
    const double fr = row - r0f;
    const double fc = col - c0f;
    auto px = [&](int r, int c) {
        if (r < 0 || c < 0 || r >= set.height || c >= set.width) return fill;
        return static_cast<double>(set.at(image, r, c, channel));
    };
    return (1 - fr) * ((1 - fc) * px(r0, c0) + fc * px(r0, c0 + 1)) +
           fr * ((1 - fc) * px(r0 + 1, c0) + fc * px(r0 + 1, c0 + 1));
}

/// Resamples a size x size patch centred at (center_row, center_col). `map_offset`
/// takes a patch-relative offset (dr, dc) from the centre to a source offset.
template <typename OffsetMap>
void resample_patch(const ImageSet& set, std::size_t image, double center_row, double center_col,
                    int size, OffsetMap map_offset, Eigen::Ref<VectorXd> out) {
    const double half = (size - 1) / 2.0;
    std::vector<double> fill(set.channels);
    for (int ch = 0; ch < set.channels; ++ch) fill[ch] = set.channel_mean(image, ch);
    Eigen::Index k = 0;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const auto [dr, dc] = map_offset(r - half, c - half);
            for (int ch = 0; ch < set.channels; ++ch)
                out(k++) = bilinear(set, image, center_row + dr, center_col + dc, ch, fill[ch]);
        }
}

inline TransformSets make_transform_sets(const ImageSet& set, const InputMap& map, TransformKind kind,
                                         Rng& rng, std::size_t count, TransformOptions opt = {}) {
    const int size = opt.patch_size;
    const int region = kind == TransformKind::Translation ? size + 3 * opt.grid_stride : size;
    if (opt.grid_stride < 0) throw InputError("make_transform_sets: negative grid stride");
    if (set.count() == 0) throw InputError("make_transform_sets: empty image set");
    if (region > set.height || region > set.width)
        throw InputError("make_transform_sets: source image " + std::to_string(set.height) + "x" +
                         std::to_string(set.width) + " too small for a " + std::to_string(region) +
                         "x" + std::to_string(region) + " region");

    TransformSets out;
    out.kind = kind;
    out.set_size = kTransformSetSize;
    switch (kind) {
        case TransformKind::Translation:
            for (int gy = 0; gy < 4; ++gy)
                for (int gx = 0; gx < 4; ++gx) out.parameters.push_back(gy * 4 + gx);
            break;
        case TransformKind::Rotation: out.parameters = rotation_angles(); break;
        case TransformKind::Scaling: out.parameters = zoom_factors(); break;
    }

    std::uniform_int_distribution<std::size_t> pick_image(0, set.count() - 1);
    std::uniform_int_distribution<int> pick_row(0, set.height - region);
    std::uniform_int_distribution<int> pick_col(0, set.width - region);
    const Eigen::Index dim = static_cast<Eigen::Index>(size) * size * set.channels;
    VectorXd patch(dim);

    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t img = pick_image(rng);
        const int row = pick_row(rng);
        const int col = pick_col(rng);
        MatrixXd pixels(kTransformSetSize, dim);
        for (int m = 0; m < kTransformSetSize; ++m) {
            if (kind == TransformKind::Translation) {
                const int dy = (m / 4) * opt.grid_stride;
                const int dx = (m % 4) * opt.grid_stride;
                extract_patch(set, img, row + dy, col + dx, size, patch);
            } else {
                const double cr = row + (size - 1) / 2.0;
                const double cc = col + (size - 1) / 2.0;
                if (kind == TransformKind::Rotation) {
                    const double theta = out.parameters[m] * std::numbers::pi / 180.0;
                    const double cs = std::cos(theta);
                    const double sn = std::sin(theta);
                    resample_patch(set, img, cr, cc, size,
                                   [&](double dr, double dc) {
                                       return std::pair{cs * dr - sn * dc, sn * dr + cs * dc};
                                   },
                                   patch);
                } else {
                    const double zoom = out.parameters[m];
                    resample_patch(set, img, cr, cc, size,
                                   [&](double dr, double dc) { return std::pair{dr / zoom, dc / zoom}; },
                                   patch);
                }
            }
            pixels.row(m) = patch.transpose();
        }
        out.sets.push_back(map.encode(pixels));
        out.source_images.push_back(img);
    }
    return out;
}

}  // namespace ldae
