#pragma once

#include "ldae/network.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace ldae {

template <typename Scalar>
using Grads = Weights<Scalar>;

namespace detail {

/// Backpropagates through (h + b_a) .* sigmoid(s) for one layer.
/// Returns d cost / d s so the caller can route it into a top-down input.
template <typename Scalar>
Matrix<Scalar> gate_backward(const Matrix<Scalar>& d_out, const Matrix<Scalar>& h, const Matrix<Scalar>& s,
                             const Vector<Scalar>& a, const Vector<Scalar>& b_a, Matrix<Scalar>& d_h,
                             Vector<Scalar>& g_a, Vector<Scalar>& g_ba, Vector<Scalar>& g_bb) {
    const Matrix<Scalar> sig = logistic<Scalar>(s);
    const Matrix<Scalar> shifted = h.rowwise() + b_a.transpose();
    const Matrix<Scalar> d_s =
        (d_out.array() * shifted.array() * sig.array() * (Scalar(1) - sig.array())).matrix();
    const Matrix<Scalar> d_shift = (d_out.array() * sig.array()).matrix();
    d_h += d_shift + (d_s.array().rowwise() * a.transpose().array()).matrix();
    g_ba += d_shift.colwise().sum().transpose();
    g_a += (d_s.array() * h.array()).matrix().colwise().sum().transpose();
    g_bb += d_s.colwise().sum().transpose();
    return d_s;
}

template <typename Scalar>
Matrix<Scalar> rectifier_mask(const Matrix<Scalar>& z) {
    return (z.array() > Scalar(0)).template cast<Scalar>().matrix();
}

}  // namespace detail

/// Exact gradient of the per-element squared reconstruction error with respect to
/// every trainable tensor. Tied encoder/decoder weights receive the sum of both uses.
template <typename Scalar>
Grads<Scalar> backward(const Params<Scalar>& p, const ModelSpec& spec, const Activations<Scalar>& act,
                       const Matrix<Scalar>& x) {
    Grads<Scalar> g = Grads<Scalar>::zeros(spec);
    const auto& w = p.w;
    const Matrix<Scalar> d_xhat =
        (act.x_hat - x) * static_cast<Scalar>(2.0 / static_cast<double>(x.size()));

    if (spec.variant == Variant::Linear) {
        g.W[0] = d_xhat.transpose() * act.h[0];
        g.b_g[0] = d_xhat.colwise().sum().transpose();
        if (!g.all_finite()) throw DivergenceError("backward: non-finite gradient");
        return g;
    }

    const int L = spec.depth();
    const bool lateral = has_lateral(spec.variant);
    std::vector<Matrix<Scalar>> d_h(L + 1);
    for (int l = 1; l <= L; ++l) d_h[l] = Matrix<Scalar>::Zero(act.h[l].rows(), act.h[l].cols());

    // Bottom affine decoder.
    g.b_g[0] = d_xhat.colwise().sum().transpose();
    g.W[0] = act.hhat[1].transpose() * d_xhat;
    Matrix<Scalar> d_hhat = d_xhat * w.W[0].transpose();

    // Middle decoders, bottom to top.
    for (int l = 1; l <= L - 1; ++l) {
        Matrix<Scalar> d_top_down;
        if (spec.variant == Variant::Mod) {
            d_top_down = detail::gate_backward<Scalar>(d_hhat, act.h[l], act.s[l], w.a[l - 1], w.b_a[l - 1],
                                                       d_h[l], g.a[l - 1], g.b_a[l - 1], g.b_b[l - 1]);
        } else {
            d_top_down = (d_hhat.array() * detail::rectifier_mask<Scalar>(act.u[l]).array()).matrix();
            g.b_g[l] = d_top_down.colwise().sum().transpose();
            if (lateral)
                detail::gate_backward<Scalar>(d_hhat, act.h[l], act.s[l], w.a[l - 1], w.b_a[l - 1], d_h[l],
                                              g.a[l - 1], g.b_a[l - 1], g.b_b[l - 1]);
        }
        g.W[l] += act.hhat[l + 1].transpose() * d_top_down;
        d_hhat = d_top_down * w.W[l].transpose();
    }

    // Top of the decoder.
    if (lateral)
        detail::gate_backward<Scalar>(d_hhat, act.h[L], act.s[L], w.a[L - 1], w.b_a[L - 1], d_h[L],
                                      g.a[L - 1], g.b_a[L - 1], g.b_b[L - 1]);
    else
        d_h[L] += d_hhat;

    // Encoder, top to bottom.
    Matrix<Scalar> d_cur = d_h[L];
    for (int l = L; l >= 1; --l) {
        const Matrix<Scalar> d_z = (d_cur.array() * detail::rectifier_mask<Scalar>(act.z[l]).array()).matrix();
        g.W[l - 1] += d_z.transpose() * act.h[l - 1];
        g.b_f[l - 1] = d_z.colwise().sum().transpose();
        if (l > 1) d_cur = d_h[l - 1] + d_z * w.W[l - 1];
    }
    if (!g.all_finite()) throw DivergenceError("backward: non-finite gradient");
    return g;
}

/// Reconstruction cost of `x` from the corrupted input `x_tilde`.
template <typename Scalar>
double cost(const Params<Scalar>& p, const ModelSpec& spec, const Matrix<Scalar>& x_tilde,
            const Matrix<Scalar>& x) {
    return reconstruction_cost(forward(p, spec, x_tilde).x_hat, x);
}

struct FiniteDiffReport {
    double max_relative_error = 0.0;
    Eigen::Index checked = 0;
    Eigen::Index skipped_kinks = 0;
    std::string worst_tensor;
    double worst_numeric = 0.0;
    double worst_analytic = 0.0;
};

namespace detail {

using Wide = long double;

/// Sign pattern of every rectifier input in a forward pass.
inline std::vector<bool> rectifier_pattern(const Activations<Wide>& act) {
    std::vector<bool> out;
    auto add = [&](const std::vector<Matrix<Wide>>& mats, std::size_t from) {
        for (std::size_t l = from; l < mats.size(); ++l)
            for (Eigen::Index i = 0; i < mats[l].size(); ++i) out.push_back(mats[l].data()[i] > 0);
    };
    add(act.z, 1);
    add(act.u, 1);
    return out;
}

/// (C(plus) - C(minus)) as a sum of factored differences of squares.
inline Wide cost_difference(const Matrix<Wide>& plus, const Matrix<Wide>& minus, const Matrix<Wide>& x) {
    const Wide sum = ((plus - minus).array() * (plus + minus - 2 * x).array()).sum();
    return sum / static_cast<Wide>(x.size());
}

}  // namespace detail

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

/// Central differences against the 64-bit `backward` for every trainable scalar.
/// The reference cost is evaluated in extended precision so cancellation in
/// C(theta + eps) - C(theta - eps) does not swamp small gradients. A tied weight
/// is one scalar driving both its encoder and decoder roles. Scalars whose
/// perturbation flips any rectifier input are skipped and counted.
inline FiniteDiffReport finite_diff_check(const Params<double>& p, const ModelSpec& spec, const MatrixXd& x_tilde,
                                          const MatrixXd& x, double epsilon = 1e-5) {
    using detail::Wide;
    if (!(epsilon > 0)) throw InputError("finite_diff_check: epsilon must be > 0");
    const Grads<double> analytic = backward(p, spec, forward(p, spec, x_tilde), x);
    const auto grad_views = analytic.views();
    Params<Wide> wide = p.template cast<Wide>();
    const Matrix<Wide> x_tilde_w = x_tilde.cast<Wide>();
    const Matrix<Wide> x_w = x.cast<Wide>();
    auto param_views = wide.w.views();
    const Wide eps = static_cast<Wide>(epsilon);

    FiniteDiffReport report;
    for (std::size_t t = 0; t < param_views.size(); ++t) {
        auto& view = param_views[t];
        for (Eigen::Index i = 0; i < view.size(); ++i) {
            const Wide saved = view.data[i];
            view.data[i] = saved + eps;
            const auto plus = forward(wide, spec, x_tilde_w);
            view.data[i] = saved - eps;
            const auto minus = forward(wide, spec, x_tilde_w);
            view.data[i] = saved;
            if (detail::rectifier_pattern(plus) != detail::rectifier_pattern(minus)) {
                ++report.skipped_kinks;
                continue;
            }
            const double numeric =
                static_cast<double>(detail::cost_difference(plus.x_hat, minus.x_hat, x_w) / (2 * eps));
            const double err = relative_error(numeric, grad_views[t].data[i]);
            ++report.checked;
            if (err > report.max_relative_error) {
                report.max_relative_error = err;
                report.worst_tensor = view.name;
                report.worst_numeric = numeric;
                report.worst_analytic = grad_views[t].data[i];
            }
        }
    }
    return report;
}

/// Every trainable tensor drawn N(0, scale^2) and every centering offset N(0, (scale / 10)^2).
inline Params<double> random_params(const ModelSpec& spec, Rng& rng, double scale = 0.5) {
    Params<double> p = Params<double>::zeros(spec);
    std::normal_distribution<double> gauss(0.0, scale);
    for (auto& v : p.w.views())
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data[i] = gauss(rng);
    for (auto& b : p.beta)
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.1 * gauss(rng);
    return p;
}

inline MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
    return m;
}

struct GradientSuiteResult {
    Variant variant = Variant::Mod;
    double max_relative_error = 0.0;
    Eigen::Index checked = 0;
    Eigen::Index skipped_kinks = 0;
};

/// Finite-difference checks of one variant on random models of every size in
/// `sizes`, seeds 1..seeds, batch 4 with sigma 0.5 corruption.
inline GradientSuiteResult gradient_suite(Variant variant, const std::vector<std::vector<Eigen::Index>>& sizes,
                                          int seeds, double epsilon = 1e-5) {
    GradientSuiteResult out;
    out.variant = variant;
    for (const auto& layers : sizes) {
        const ModelSpec spec{variant, layers, true};
        spec.validate();
        for (int seed = 1; seed <= seeds; ++seed) {
            Rng rng = substream(static_cast<std::uint64_t>(seed), "gradcheck");
            const auto p = random_params(spec, rng);
            const MatrixXd x = random_matrix(4, spec.input_dim(), rng);
            const MatrixXd x_tilde = x + random_matrix(4, spec.input_dim(), rng, 0.5);
            const auto r = finite_diff_check(p, spec, x_tilde, x, epsilon);
            out.max_relative_error = std::max(out.max_relative_error, r.max_relative_error);
            out.checked += r.checked;
            out.skipped_kinks += r.skipped_kinks;
        }
    }
    return out;
}

}  // namespace ldae
