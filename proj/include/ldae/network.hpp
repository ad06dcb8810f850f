#pragma once

#include "ldae/core.hpp"

#include <cmath>
#include <string>
#include <type_traits>
#include <vector>

namespace ldae {

/// Linear is the single affine denoiser x_hat = W x_tilde + b used as a baseline.
enum class Variant { Linear, NoLat, Add, Mod };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::Linear: return "linear";
        case Variant::NoLat: return "nolat";
        case Variant::Add: return "add";
        case Variant::Mod: return "mod";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "linear") return Variant::Linear;
    if (s == "nolat") return Variant::NoLat;
    if (s == "add") return Variant::Add;
    if (s == "mod") return Variant::Mod;
    throw InputError("unknown variant '" + s + "' (expected linear, nolat, add or mod)");
}

inline bool has_lateral(Variant v) { return v == Variant::Add || v == Variant::Mod; }

struct ModelSpec {
    Variant variant = Variant::Mod;
    std::vector<Eigen::Index> layer_sizes;  // [d, n1, ..., nL]; [d] for Linear
    bool tied = true;

    int depth() const { return static_cast<int>(layer_sizes.size()) - 1; }
    Eigen::Index input_dim() const { return layer_sizes.front(); }

    /// n2 / n1 for two-layer models, 0 otherwise.
    double alpha() const {
        return depth() >= 2 ? static_cast<double>(layer_sizes[2]) / static_cast<double>(layer_sizes[1]) : 0.0;
    }

    void validate() const {
        if (layer_sizes.empty()) throw InputError("model spec has no layers");
        for (auto n : layer_sizes)
            if (n < 1) throw InputError("model spec: layer sizes must be >= 1");
        if (variant == Variant::Linear) {
            if (depth() != 0) throw InputError("linear model takes a single size [d]");
        } else if (depth() < 1) {
            throw InputError("model spec needs at least one hidden layer");
        }
        if (!tied) throw InputError("untied weights are not supported");
    }

    std::string describe() const {
        std::string s = to_string(variant) + " ";
        for (std::size_t i = 0; i < layer_sizes.size(); ++i)
            s += (i ? "-" : "") + std::to_string(layer_sizes[i]);
        return s;
    }
};

/// Parameter count with tied decoder weights counted as separate parameters.
/// Centering offsets are excluded.
inline long long count_params(const ModelSpec& spec) {
    spec.validate();
    const auto& n = spec.layer_sizes;
    const long long d = n[0];
    if (spec.variant == Variant::Linear) return d * d + d;
    const int L = spec.depth();
    long long total = d;  // b_g^(0)
    for (int l = 1; l <= L; ++l) {
        total += 2 * static_cast<long long>(n[l]) * n[l - 1] + n[l];
        if (has_lateral(spec.variant)) total += 3 * static_cast<long long>(n[l]);
        if (l < L && spec.variant != Variant::Mod) total += n[l];  // b_g^(l)
    }
    return total;
}

/// Largest n1 (with n2 = round(alpha * n1) when L = 2) that fits the budget.
inline ModelSpec solve_layer_sizes(long long budget, double alpha, Variant variant, Eigen::Index d, int L) {
    if (budget <= 0) throw InputError("solve_layer_sizes: budget must be positive");
    if (d < 1) throw InputError("solve_layer_sizes: input dimension must be positive");
    ModelSpec spec{variant, {d}, true};
    if (variant == Variant::Linear) {
        if (count_params(spec) > budget) throw InputError("solve_layer_sizes: no feasible size");
        return spec;
    }
    if (L != 1 && L != 2) throw InputError("solve_layer_sizes: only 1 or 2 hidden layers");
    if (L == 2 && !(alpha > 0)) throw InputError("solve_layer_sizes: alpha must be > 0 for two layers");

    auto make = [&](Eigen::Index n1) {
        ModelSpec s{variant, {d, n1}, true};
        if (L == 2) s.layer_sizes.push_back(std::max<Eigen::Index>(1, std::llround(alpha * static_cast<double>(n1))));
        return s;
    };
    // count_params grows with n1, so scan down from an upper bound.
    Eigen::Index n1 = static_cast<Eigen::Index>(budget / (2 * d)) + 1;
    for (; n1 >= 1; --n1)
        if (count_params(make(n1)) <= budget) return make(n1);
    throw InputError("solve_layer_sizes: no feasible size for budget " + std::to_string(budget));
}

/// Largest n1 fitting the budget for a fixed top-layer size n2.
inline ModelSpec solve_first_layer(long long budget, Variant variant, Eigen::Index d, Eigen::Index n2) {
    Eigen::Index n1 = static_cast<Eigen::Index>(budget / (2 * d)) + 1;
    for (; n1 >= 1; --n1) {
        ModelSpec s{variant, {d, n1, n2}, true};
        if (count_params(s) <= budget) return s;
    }
    throw InputError("solve_first_layer: no feasible size");
}

/// A named view over one trainable tensor (column-major storage).
template <typename Scalar>
struct TensorView {
    std::string name;
    Scalar* data;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index size() const { return rows * cols; }
    using Plain = Vector<std::remove_const_t<Scalar>>;
    using Mapped = std::conditional_t<std::is_const_v<Scalar>, const Plain, Plain>;
    Eigen::Map<Mapped> flat() const { return {data, size()}; }
};

/// Trainable tensors. Index conventions follow the layer numbering:
///   W[l-1]  encoder weights W_f^(l)  (n_l x n_{l-1}); decoder weights are tied,
///           W_g^(l-1) = W[l-1]^T. For Linear, W[0] is the untied d x d map.
///   b_f[l-1]  encoder bias of layer l
///   b_g[l]    decoder bias of layer l (l = 0 always; 1..L-1 for NoLat and Add)
///   a, b_a, b_b [l-1]  lateral gate vectors of layer l (Add and Mod)
template <typename Scalar>
struct Weights {
    std::vector<Matrix<Scalar>> W;
    std::vector<Vector<Scalar>> b_f;
    std::vector<Vector<Scalar>> b_g;
    std::vector<Vector<Scalar>> a;
    std::vector<Vector<Scalar>> b_a;
    std::vector<Vector<Scalar>> b_b;

    /// Zero-filled tensors shaped for `spec`.
    static Weights zeros(const ModelSpec& spec) {
        spec.validate();
        Weights w;
        const auto& n = spec.layer_sizes;
        if (spec.variant == Variant::Linear) {
            w.W.push_back(Matrix<Scalar>::Zero(n[0], n[0]));
            w.b_g.push_back(Vector<Scalar>::Zero(n[0]));
            return w;
        }
        const int L = spec.depth();
        for (int l = 1; l <= L; ++l) {
            w.W.push_back(Matrix<Scalar>::Zero(n[l], n[l - 1]));
            w.b_f.push_back(Vector<Scalar>::Zero(n[l]));
        }
        for (int l = 0; l < L; ++l) {
            const bool used = l == 0 || spec.variant != Variant::Mod;
            w.b_g.push_back(Vector<Scalar>::Zero(used ? n[l] : 0));
        }
        if (has_lateral(spec.variant))
            for (int l = 1; l <= L; ++l) {
                w.a.push_back(Vector<Scalar>::Zero(n[l]));
                w.b_a.push_back(Vector<Scalar>::Zero(n[l]));
                w.b_b.push_back(Vector<Scalar>::Zero(n[l]));
            }
        return w;
    }

    /// Every non-empty tensor in a fixed order; used by the optimizer and serializer.
    std::vector<TensorView<Scalar>> views() {
        std::vector<TensorView<Scalar>> out;
        const bool linear = b_f.empty();
        for (std::size_t i = 0; i < W.size(); ++i)
            out.push_back({linear ? "W_lin" : "W_f" + std::to_string(i + 1), W[i].data(), W[i].rows(), W[i].cols()});
        for (std::size_t i = 0; i < b_f.size(); ++i)
            out.push_back({"b_f" + std::to_string(i + 1), b_f[i].data(), b_f[i].size(), 1});
        for (std::size_t i = 0; i < b_g.size(); ++i)
            if (b_g[i].size() > 0) out.push_back({"b_g" + std::to_string(i), b_g[i].data(), b_g[i].size(), 1});
        for (std::size_t i = 0; i < a.size(); ++i) {
            out.push_back({"a" + std::to_string(i + 1), a[i].data(), a[i].size(), 1});
            out.push_back({"b_a" + std::to_string(i + 1), b_a[i].data(), b_a[i].size(), 1});
            out.push_back({"b_b" + std::to_string(i + 1), b_b[i].data(), b_b[i].size(), 1});
        }
        return out;
    }

    std::vector<TensorView<const Scalar>> views() const {
        std::vector<TensorView<const Scalar>> out;
        for (auto& v : const_cast<Weights*>(this)->views()) out.push_back({v.name, v.data, v.rows, v.cols});
        return out;
    }

    Eigen::Index scalar_count() const {
        Eigen::Index n = 0;
        for (const auto& v : views()) n += v.size();
        return n;
    }

    bool all_finite() const {
        for (const auto& v : views())
            if (!Eigen::Map<const Vector<Scalar>>(v.data, v.size()).allFinite()) return false;
        return true;
    }
};

/// Trainable weights plus the centering offsets applied after each hidden nonlinearity.
template <typename Scalar>
struct Params {
    Weights<Scalar> w;
    std::vector<Vector<Scalar>> beta;  // beta[l-1] for layer l

    static Params zeros(const ModelSpec& spec) {
        Params p;
        p.w = Weights<Scalar>::zeros(spec);
        if (spec.variant != Variant::Linear)
            for (int l = 1; l <= spec.depth(); ++l) p.beta.push_back(Vector<Scalar>::Zero(spec.layer_sizes[l]));
        return p;
    }

    /// Decoder weights W_g^(l) as a tied transpose of W_f^(l+1).
    auto decoder_weight(int l) const { return w.W[static_cast<std::size_t>(l)].transpose(); }

    template <typename Other>
    Params<Other> cast() const {
        Params<Other> out;
        for (const auto& m : w.W) out.w.W.push_back(m.template cast<Other>());
        auto copy = [](const auto& from, auto& to) {
            for (const auto& v : from) to.push_back(v.template cast<Other>());
        };
        copy(w.b_f, out.w.b_f);
        copy(w.b_g, out.w.b_g);
        copy(w.a, out.w.a);
        copy(w.b_a, out.w.b_a);
        copy(w.b_b, out.w.b_b);
        copy(beta, out.beta);
        return out;
    }
};

/// Row-orthonormalization by modified Gram-Schmidt, two passes. When rows exceed
/// columns only the first `cols` rows are orthogonalized; the rest are normalized.
/// Returns the number of rows that could not be orthogonalized.
inline Eigen::Index orthonormalize_rows(MatrixXd& m) {
    const Eigen::Index limit = std::min(m.rows(), m.cols());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (i < limit)
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index j = 0; j < i; ++j) m.row(i) -= m.row(i).dot(m.row(j)) * m.row(j);
        const double norm = m.row(i).norm();
        if (norm > 0) m.row(i) /= norm;
    }
    return m.rows() - limit;
}

/// Gaussian weights with unit-norm, orthogonalized rows; all biases, lateral
/// vectors and centering offsets start at zero.
template <typename Scalar>
Params<Scalar> init_params(const ModelSpec& spec, Rng& rng, std::vector<std::string>* warnings = nullptr) {
    Params<Scalar> p = Params<Scalar>::zeros(spec);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < p.w.W.size(); ++i) {
        auto& target = p.w.W[i];
        MatrixXd draw(target.rows(), target.cols());
        // Row-major fill so the stream does not depend on the storage order.
        for (Eigen::Index r = 0; r < draw.rows(); ++r)
            for (Eigen::Index c = 0; c < draw.cols(); ++c) draw(r, c) = gauss(rng);
        for (Eigen::Index r = 0; r < draw.rows(); ++r) draw.row(r).normalize();
        const Eigen::Index leftover = orthonormalize_rows(draw);
        if (leftover > 0 && warnings)
            warnings->push_back("W_f" + std::to_string(i + 1) + ": " + std::to_string(leftover) +
                                " rows exceed the input width and are only normalized");
        target = draw.cast<Scalar>();
    }
    return p;
}

/// Per-layer intermediate values of one forward pass (rows are batch samples).
///   h[l]      encoder output, h[0] = x_tilde
///   z[l]      encoder pre-activation (l >= 1)
///   u[l]      rectifier input of a NoLat/Add middle decoder (1 <= l <= L-1)
///   s[l]      sigmoid argument of a lateral gate (Add/Mod, l >= 1)
///   hhat[l]   decoded value of layer l (l >= 1)
template <typename Scalar>
struct Activations {
    std::vector<Matrix<Scalar>> h, z, u, s, hhat;
    Matrix<Scalar> x_hat;

    Eigen::Index batch() const { return h.front().rows(); }
};

template <typename Scalar>
Matrix<Scalar> rectify(const Matrix<Scalar>& z) {
    return z.cwiseMax(Scalar(0));
}

template <typename Scalar>
Matrix<Scalar> logistic(const Matrix<Scalar>& s) {
    return (Scalar(1) + (-s.array()).exp()).inverse().matrix();
}

inline double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }

/// (h + b_a) .* sigmoid(a .* h + b_b + top_down), elementwise per unit.
template <typename Scalar>
Matrix<Scalar> gate_argument(const Matrix<Scalar>& h, const Vector<Scalar>& a, const Vector<Scalar>& b_b) {
    return ((h.array().rowwise() * a.transpose().array()).rowwise() + b_b.transpose().array()).matrix();
}

template <typename Scalar>
Activations<Scalar> forward(const Params<Scalar>& p, const ModelSpec& spec, const Matrix<Scalar>& x_tilde) {
    if (x_tilde.cols() != spec.input_dim())
        throw InputError("forward: input has " + std::to_string(x_tilde.cols()) + " columns, model expects " +
                         std::to_string(spec.input_dim()));
    Activations<Scalar> act;
    const auto& w = p.w;
    if (spec.variant == Variant::Linear) {
        act.h = {x_tilde};
        act.x_hat = (x_tilde * w.W[0].transpose()).rowwise() + w.b_g[0].transpose();
        return act;
    }
    const int L = spec.depth();
    act.h.resize(L + 1);
    act.z.resize(L + 1);
    act.u.resize(L + 1);
    act.s.resize(L + 1);
    act.hhat.resize(L + 1);
    act.h[0] = x_tilde;
    for (int l = 1; l <= L; ++l) {
        act.z[l] = (act.h[l - 1] * w.W[l - 1].transpose()).rowwise() + w.b_f[l - 1].transpose();
        act.h[l] = rectify<Scalar>(act.z[l]).rowwise() + p.beta[l - 1].transpose();
    }

    const bool lateral = has_lateral(spec.variant);
    if (lateral) {
        act.s[L] = gate_argument<Scalar>(act.h[L], w.a[L - 1], w.b_b[L - 1]);
        act.hhat[L] = ((act.h[L].rowwise() + w.b_a[L - 1].transpose()).array() *
                       logistic<Scalar>(act.s[L]).array()).matrix();
    } else {
        act.hhat[L] = act.h[L];
    }

    for (int l = L - 1; l >= 1; --l) {
        // W_g^(l) hhat^(l+1) in row-vector form is hhat^(l+1) * W_f^(l+1).
        Matrix<Scalar> top_down = act.hhat[l + 1] * w.W[l];
        if (spec.variant == Variant::Mod) {
            act.s[l] = gate_argument<Scalar>(act.h[l], w.a[l - 1], w.b_b[l - 1]) + top_down;
            act.hhat[l] = ((act.h[l].rowwise() + w.b_a[l - 1].transpose()).array() *
                           logistic<Scalar>(act.s[l]).array()).matrix();
        } else {
            act.u[l] = top_down.rowwise() + w.b_g[l].transpose();
            act.hhat[l] = rectify<Scalar>(act.u[l]);
            if (lateral) {
                act.s[l] = gate_argument<Scalar>(act.h[l], w.a[l - 1], w.b_b[l - 1]);
                act.hhat[l].array() += (act.h[l].rowwise() + w.b_a[l - 1].transpose()).array() *
                                       logistic<Scalar>(act.s[l]).array();
            }
        }
    }
    act.x_hat = (act.hhat[1] * w.W[0]).rowwise() + w.b_g[0].transpose();
    return act;
}

/// Mean over batch and elements of (x_hat - x)^2, accumulated in double.
template <typename DerivedA, typename DerivedB>
double reconstruction_cost(const Eigen::MatrixBase<DerivedA>& x_hat, const Eigen::MatrixBase<DerivedB>& x) {
    if (x_hat.rows() != x.rows() || x_hat.cols() != x.cols())
        throw InputError("reconstruction_cost: shape mismatch");
    if (x.size() == 0) return 0.0;
    return (x_hat.template cast<double>() - x.template cast<double>()).squaredNorm() /
           static_cast<double>(x.size());
}

inline constexpr double kDefaultCenteringRate = 0.99;

/// Drives the running mean of each centered hidden layer toward zero:
/// beta <- beta - rate * mean(h), where h already includes beta. Equivalent to
/// beta = -EMA(mean of rectifier outputs) with weight `rate` on the newest batch.
template <typename Scalar>
void update_centering(Params<Scalar>& p, const Activations<Scalar>& act, double rate = kDefaultCenteringRate) {
    if (!(rate > 0 && rate <= 1)) throw InputError("update_centering: rate must be in (0, 1]");
    for (std::size_t l = 0; l < p.beta.size(); ++l) {
        const Vector<Scalar> mean = act.h[l + 1].colwise().mean().transpose();
        p.beta[l] -= static_cast<Scalar>(rate) * mean;
    }
}

}  // namespace ldae
