#pragma once

#include "ldae/data.hpp"
#include "ldae/whitening.hpp"

#include <cmath>
#include <memory>
#include <random>

namespace ldae {

/// Clean inputs and their corrupted copies; corrupted = clean + noise.
struct PatchBatch {
    MatrixXd clean;
    MatrixXd corrupted;
    MatrixXd noise;
    bool in_whitened_space = false;
};

/// Copies a size x size patch at (row, col) into `out` in [row][col][channel] order.
inline void extract_patch(const ImageSet& set, std::size_t image, int row, int col, int size,
                          Eigen::Ref<VectorXd> out) {
    Eigen::Index k = 0;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            for (int ch = 0; ch < set.channels; ++ch) out(k++) = set.at(image, row + r, col + c, ch);
}

/// Pixel-space patches at uniformly random images and positions.
inline MatrixXd sample_pixel_patches(const ImageSet& set, Eigen::Index batch, int size, Rng& rng) {
    if (batch < 1) throw InputError("sample_patches: batch must be >= 1");
    if (size < 1 || size > std::min(set.height, set.width))
        throw InputError("sample_patches: patch size " + std::to_string(size) +
                         " exceeds image dimensions " + std::to_string(set.height) + "x" +
                         std::to_string(set.width));
    if (set.count() == 0) throw InputError("sample_patches: empty image set");
    std::uniform_int_distribution<std::size_t> pick_image(0, set.count() - 1);
    std::uniform_int_distribution<int> pick_row(0, set.height - size);
    std::uniform_int_distribution<int> pick_col(0, set.width - size);
    MatrixXd out(batch, static_cast<Eigen::Index>(size) * size * set.channels);
    VectorXd patch(out.cols());
    for (Eigen::Index b = 0; b < batch; ++b) {
        const std::size_t img = pick_image(rng);
        const int row = pick_row(rng);
        const int col = pick_col(rng);
        extract_patch(set, img, row, col, size, patch);
        out.row(b) = patch.transpose();
    }
    return out;
}

/// Clean batch of model inputs; `map` decides whether the stream is whitened.
inline PatchBatch sample_patches(const ImageSet& set, Eigen::Index batch, int size, Rng& rng,
                                 const InputMap* map = nullptr) {
    PatchBatch out;
    out.clean = sample_pixel_patches(set, batch, size, rng);
    if (map) {
        out.clean = map->encode(out.clean);
        out.in_whitened_space = map->whitener.has_value();
    }
    out.noise = MatrixXd::Zero(out.clean.rows(), out.clean.cols());
    out.corrupted = out.clean;
    return out;
}

/// Adds iid Gaussian noise of standard deviation sigma_n.
inline PatchBatch corrupt(PatchBatch batch, double sigma_n, Rng& rng) {
    if (!(sigma_n >= 0)) throw InputError("corrupt: sigma_n must be >= 0");
    if (sigma_n == 0) {
        batch.noise.setZero(batch.clean.rows(), batch.clean.cols());
        batch.corrupted = batch.clean;
        return batch;
    }
    std::normal_distribution<double> gauss(0.0, sigma_n);
    batch.noise.resize(batch.clean.rows(), batch.clean.cols());
    for (Eigen::Index i = 0; i < batch.noise.size(); ++i) batch.noise.data()[i] = gauss(rng);
    batch.corrupted = batch.clean + batch.noise;
    return batch;
}

/// Global standardization for streams that are not whitened (already-white datasets).
inline InputMap raw_input_map(const ImageSet& train) {
    InputMap map;
    double sum = 0.0;
    double sq = 0.0;
    for (float p : train.pixels) {
        sum += p;
        sq += static_cast<double>(p) * p;
    }
    const double n = static_cast<double>(train.pixels.size());
    map.offset = sum / n;
    const double var = sq / n - map.offset * map.offset;
    map.gain = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
    return map;
}

/// Source of clean training or validation inputs for the trainer.
class PatchStream {
public:
    virtual ~PatchStream() = default;
    virtual MatrixXd sample(Eigen::Index batch, Rng& rng) const = 0;
    virtual Eigen::Index dim() const = 0;
};

class ImagePatchStream final : public PatchStream {
public:
    ImagePatchStream(ImageSet images, InputMap map, int patch_size)
        : images_(std::move(images)), map_(std::move(map)), patch_size_(patch_size) {}

    MatrixXd sample(Eigen::Index batch, Rng& rng) const override {
        return map_.encode(sample_pixel_patches(images_, batch, patch_size_, rng));
    }
    Eigen::Index dim() const override {
        return map_.whitener ? map_.whitener->output_dim()
                             : static_cast<Eigen::Index>(patch_size_) * patch_size_ * images_.channels;
    }
    const InputMap& input_map() const { return map_; }
    const ImageSet& images() const { return images_; }

private:
    ImageSet images_;
    InputMap map_;
    int patch_size_;
};

/// White unit-variance Gaussian vectors.
class GaussianStream final : public PatchStream {
public:
    explicit GaussianStream(Eigen::Index dim) : dim_(dim) {}
    MatrixXd sample(Eigen::Index batch, Rng& rng) const override {
        std::normal_distribution<double> gauss(0.0, 1.0);
        MatrixXd out(batch, dim_);
        for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = gauss(rng);
        return out;
    }
    Eigen::Index dim() const override { return dim_; }

private:
    Eigen::Index dim_;
};

}  // namespace ldae
