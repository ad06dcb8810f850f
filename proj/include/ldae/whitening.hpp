#pragma once

#include "ldae/core.hpp"

#include <Eigen/Eigenvalues>

#include <optional>
#include <string>

namespace ldae {

inline constexpr double kDefaultEigenFloor = 1e-8;

/// PCA whitening truncated to the leading k components.
///
/// forward:  y = ((p - mean) * basis^T) .* scale
/// inverse:  p = mean + (y ./ scale) * basis   (least squares, basis rows are orthonormal)
struct Whitener {
    VectorXd mean;         // d_pixels
    MatrixXd basis;        // k x d_pixels, rows sorted by decreasing eigenvalue
    VectorXd eigenvalues;  // k
    VectorXd scale;        // k, 1 / sqrt(eigenvalue + floor)
    double floor = kDefaultEigenFloor;
    double retained_variance_fraction = 1.0;

    Eigen::Index input_dim() const { return basis.cols(); }
    Eigen::Index output_dim() const { return basis.rows(); }

    MatrixXd forward(const MatrixXd& patches) const {
        if (patches.cols() != input_dim())
            throw InputError("whiten: expected " + std::to_string(input_dim()) + " columns, got " +
                             std::to_string(patches.cols()));
        MatrixXd centered = patches.rowwise() - mean.transpose();
        return (centered * basis.transpose()) * scale.asDiagonal();
    }

    MatrixXd inverse(const MatrixXd& whitened) const {
        if (whitened.cols() != output_dim())
            throw InputError("dewhiten: expected " + std::to_string(output_dim()) + " columns, got " +
                             std::to_string(whitened.cols()));
        MatrixXd out = (whitened * scale.cwiseInverse().asDiagonal()) * basis;
        out.rowwise() += mean.transpose();
        return out;
    }

    /// Pixel-space pattern of a direction in whitened space (inverse without the mean).
    VectorXd dewhiten_direction(const VectorXd& direction) const {
        return basis.transpose() * direction.cwiseQuotient(scale);
    }
};

/// Eigendecomposition of the population covariance of `patches` (rows are samples).
inline Whitener fit_whitener(const MatrixXd& patches, Eigen::Index k, double floor = kDefaultEigenFloor) {
    const Eigen::Index n = patches.rows();
    const Eigen::Index d = patches.cols();
    if (!patches.allFinite()) throw InputError("fit_whitener: non-finite input");
    if (k < 1 || k > d)
        throw InputError("fit_whitener: k=" + std::to_string(k) + " outside [1, " + std::to_string(d) + "]");
    if (n < 2) throw InputError("fit_whitener: need at least two patches");
    if (floor < 0) throw InputError("fit_whitener: negative eigenvalue floor");

    Whitener w;
    w.floor = floor;
    w.mean = patches.colwise().mean().transpose();
    const MatrixXd centered = patches.rowwise() - w.mean.transpose();
    MatrixXd cov = MatrixXd::Zero(d, d);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n));
    cov = cov.selfadjointView<Eigen::Lower>();

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw InputError("fit_whitener: eigendecomposition failed");
    // Ascending order from Eigen; take the top k in descending order.
    const VectorXd values = eig.eigenvalues().cwiseMax(0.0);
    w.basis.resize(k, d);
    w.eigenvalues.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        w.basis.row(i) = eig.eigenvectors().col(d - 1 - i).transpose();
        w.eigenvalues(i) = values(d - 1 - i);
    }
    w.scale = (w.eigenvalues.array() + floor).rsqrt().matrix();
    const double total = values.sum();
    w.retained_variance_fraction = total > 0 ? w.eigenvalues.sum() / total : 1.0;
    return w;
}

/// Maps pixel patches to model inputs: optional whitening followed by a global
/// affine rescale that gives the stream unit per-element standard deviation.
struct InputMap {
    std::optional<Whitener> whitener;
    double offset = 0.0;
    double gain = 1.0;

    MatrixXd encode(const MatrixXd& pixel_patches) const {
        MatrixXd out = whitener ? whitener->forward(pixel_patches) : pixel_patches;
        return ((out.array() - offset) * gain).matrix();
    }

    MatrixXd decode(const MatrixXd& inputs) const {
        MatrixXd raw = ((inputs.array() / gain) + offset).matrix();
        return whitener ? whitener->inverse(raw) : raw;
    }
};

/// Whitened stream: components already have variance eig/(eig+floor) on the
/// fitting data, so the gain restores unit average variance exactly.
inline InputMap whitened_input_map(Whitener w) {
    InputMap map;
    const double mean_var =
        (w.eigenvalues.array() / (w.eigenvalues.array() + w.floor)).mean();
    map.gain = mean_var > 0 ? 1.0 / std::sqrt(mean_var) : 1.0;
    map.whitener = std::move(w);
    return map;
}

}  // namespace ldae
