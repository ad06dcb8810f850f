#pragma once

#include "ldae/network.hpp"
#include "ldae/whitening.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

namespace ldae {

inline constexpr double kMinTotalVariance = 1e-12;

struct GammaResult {
    VectorXd gamma;                      // NaN for excluded neurons
    std::vector<Eigen::Index> excluded;  // total variance below kMinTotalVariance
    double layer_mean = std::numeric_limits<double>::quiet_NaN();
};

/// Invariance per neuron: population variance of the per-set means over the
/// population variance of all samples. `sets` holds S matrices of T x n.
inline GammaResult compute_gamma(const std::vector<MatrixXd>& sets) {
    if (sets.size() < 2) throw InputError("compute_gamma: need at least two sets");
    const Eigen::Index T = sets.front().rows();
    const Eigen::Index n = sets.front().cols();
    if (T < 2) throw InputError("compute_gamma: sets need at least two members");
    for (const auto& s : sets)
        if (s.rows() != T || s.cols() != n) throw InputError("compute_gamma: sets must have equal sizes");

    const double S = static_cast<double>(sets.size());
    MatrixXd means(static_cast<Eigen::Index>(sets.size()), n);
    VectorXd grand = VectorXd::Zero(n);
    for (std::size_t s = 0; s < sets.size(); ++s) {
        means.row(static_cast<Eigen::Index>(s)) = sets[s].colwise().mean();
        grand += means.row(static_cast<Eigen::Index>(s)).transpose();
    }
    grand /= S;  // equal set sizes, so this is also the mean over all samples

    VectorXd between = (means.rowwise() - grand.transpose()).colwise().squaredNorm().transpose() / S;
    // Law of total variance: total = between + mean within-set variance. Summing
    // the two parts keeps gamma <= 1 under rounding.
    VectorXd within = VectorXd::Zero(n);
    for (std::size_t s = 0; s < sets.size(); ++s)
        within += (sets[s].rowwise() - means.row(static_cast<Eigen::Index>(s))).colwise().squaredNorm().transpose();
    within /= S * static_cast<double>(T);
    const VectorXd total = between + within;

    GammaResult out;
    out.gamma = VectorXd::Constant(n, std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    Eigen::Index included = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (total(i) < kMinTotalVariance) {
            out.excluded.push_back(i);
            continue;
        }
        out.gamma(i) = between(i) / total(i);
        sum += out.gamma(i);
        ++included;
    }
    if (included > 0) out.layer_mean = sum / static_cast<double>(included);
    return out;
}

/// h^(layer) for every member of every set, from uncorrupted inputs.
template <typename Scalar>
std::vector<MatrixXd> layer_activations(const Params<Scalar>& p, const ModelSpec& spec,
                                        const std::vector<MatrixXd>& inputs, int layer) {
    if (layer < 0 || layer > spec.depth()) throw InputError("layer index out of range");
    std::vector<MatrixXd> out;
    for (const auto& x : inputs) {
        if (layer == 0) {
            out.push_back(x);
            continue;
        }
        const auto act = forward(p, spec, x.cast<Scalar>().eval());
        out.push_back(act.h[static_cast<std::size_t>(layer)].template cast<double>());
    }
    return out;
}

/// Population variance of every encoder layer, var[0] being the input.
template <typename Scalar>
std::vector<VectorXd> layer_variances(const Params<Scalar>& p, const ModelSpec& spec, const MatrixXd& inputs) {
    std::vector<VectorXd> out;
    auto variance = [](const MatrixXd& m) {
        const VectorXd mean = m.colwise().mean().transpose();
        return VectorXd((m.rowwise() - mean.transpose()).colwise().squaredNorm().transpose() /
                        static_cast<double>(m.rows()));
    };
    out.push_back(variance(inputs));
    if (spec.variant == Variant::Linear) return out;
    const auto act = forward(p, spec, inputs.cast<Scalar>().eval());
    for (int l = 1; l <= spec.depth(); ++l) out.push_back(variance(act.h[l].template cast<double>()));
    return out;
}

/// Edge significances of every decoder mapping. edges[l] is n_l x n_{l+1}: entry
/// (j, i) is the share of var(h_j^(l)) attributed to upper neuron h_i^(l+1). Raw
/// shares W_g(j,i)^2 var(h_i^(l+1)) are rescaled so each row sums to var(h_j^(l)).
/// Upper neurons are treated as independent.
template <typename Scalar>
std::vector<MatrixXd> compute_significance(const Params<Scalar>& p, const ModelSpec& spec,
                                           const std::vector<VectorXd>& variances) {
    if (spec.variant == Variant::Linear) throw InputError("compute_significance: linear model has no hidden layers");
    if (static_cast<int>(variances.size()) != spec.depth() + 1)
        throw InputError("compute_significance: expected one variance vector per layer");
    std::vector<MatrixXd> edges;
    for (int l = 0; l < spec.depth(); ++l) {
        const MatrixXd w_g = p.decoder_weight(l).template cast<double>();  // n_l x n_{l+1}
        const VectorXd& upper = variances[static_cast<std::size_t>(l + 1)];
        const VectorXd& lower = variances[static_cast<std::size_t>(l)];
        if (upper.size() != w_g.cols() || lower.size() != w_g.rows())
            throw InputError("compute_significance: variance sizes do not match layer " + std::to_string(l));
        MatrixXd raw = w_g.array().square().rowwise() * upper.transpose().array();
        for (Eigen::Index j = 0; j < raw.rows(); ++j) {
            const double sum = raw.row(j).sum();
            if (sum > 0 && lower(j) > 0)
                raw.row(j) *= lower(j) / sum;
            else
                raw.row(j).setZero();
        }
        edges.push_back(std::move(raw));
    }
    return edges;
}

/// Sum of outgoing significances of each upper neuron of one decoder mapping.
inline VectorXd neuron_significance(const MatrixXd& edges) { return edges.colwise().sum().transpose(); }

/// Significance-weighted average sign of each upper neuron's decoder weights,
/// in [-1, 1]. Falls back to the plain average when all its edges are zero.
template <typename Scalar>
VectorXd mean_weight_sign(const Params<Scalar>& p, const MatrixXd& edges, int layer) {
    const MatrixXd w_g = p.decoder_weight(layer).template cast<double>();
    VectorXd out(w_g.cols());
    for (Eigen::Index i = 0; i < w_g.cols(); ++i) {
        const VectorXd sign = w_g.col(i).array().sign();
        const double total = edges.col(i).sum();
        out(i) = total > 0 ? edges.col(i).dot(sign) / total : sign.mean();
    }
    return out;
}

/// Indices of `values` sorted by descending value, ties broken by ascending index.
inline std::vector<Eigen::Index> rank_descending(const Eigen::Ref<const VectorXd>& values) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
    return idx;
}

struct PoolingMember {
    Eigen::Index neuron = 0;
    double strength = 0.0;
};

struct PoolingGroup {
    Eigen::Index upper = 0;  // layer-2 neuron
    double link = 0.0;       // significance of anchor -> upper
    std::vector<PoolingMember> members;
};

struct PoolingReport {
    Eigen::Index anchor = 0;
    bool empty = false;  // anchor has no outgoing significance
    std::vector<PoolingGroup> groups;
    std::map<Eigen::Index, VectorXd> features;  // layer-1 neuron -> pixel-space pattern
};

/// From a layer-1 anchor, follows its strongest nonzero links to layer 2, then walks
/// back from each of those to its strongest layer-1 contributors.
template <typename Scalar>
PoolingReport extract_poolings(const Params<Scalar>& p, const ModelSpec& spec, const std::vector<MatrixXd>& edges,
                               Eigen::Index anchor, std::size_t k_groups = 3, std::size_t k_members = 20,
                               const InputMap* map = nullptr) {
    if (spec.depth() < 2 || edges.size() < 2) throw InputError("extract_poolings: needs a two-layer model");
    const MatrixXd& e = edges[1];  // n1 x n2
    if (anchor < 0 || anchor >= e.rows()) throw InputError("extract_poolings: anchor out of range");
    PoolingReport report;
    report.anchor = anchor;
    if (!(e.row(anchor).sum() > 0)) {
        report.empty = true;
        return report;
    }
    const auto uppers = rank_descending(e.row(anchor).transpose());
    for (std::size_t g = 0; g < std::min(k_groups, uppers.size()); ++g) {
        if (!(e(anchor, uppers[g]) > 0)) break;
        PoolingGroup group;
        group.upper = uppers[g];
        group.link = e(anchor, group.upper);
        const auto lowers = rank_descending(e.col(group.upper));
        for (std::size_t m = 0; m < std::min(k_members, lowers.size()); ++m)
            group.members.push_back({lowers[m], e(lowers[m], group.upper)});
        report.groups.push_back(std::move(group));
    }

    auto feature = [&](Eigen::Index neuron) {
        VectorXd row = p.w.W[0].row(neuron).transpose().template cast<double>();
        if (!map) return row;
        row /= map->gain;
        return map->whitener ? map->whitener->dewhiten_direction(row) : row;
    };
    report.features[anchor] = feature(anchor);
    for (const auto& g : report.groups)
        for (const auto& m : g.members) report.features.emplace(m.neuron, feature(m.neuron));
    return report;
}

/// Positions of neurons when ordered by ascending gamma (ties and excluded
/// neurons by index; excluded neurons last).
inline std::vector<Eigen::Index> order_by_gamma(const VectorXd& gamma) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(gamma.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    auto key = [&](Eigen::Index i) {
        return std::isnan(gamma(i)) ? std::numeric_limits<double>::infinity() : gamma(i);
    };
    std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return key(a) < key(b); });
    return idx;
}

/// Edge list `upper,lower,sign,significance` for decoder mapping `layer`, rows
/// ordered by the upper neuron's gamma and then the lower neuron's gamma.
template <typename Scalar>
void write_connection_csv(std::ostream& out, const Params<Scalar>& p, const MatrixXd& edges, int layer,
                          const VectorXd& gamma_upper, const VectorXd& gamma_lower) {
    const MatrixXd w_g = p.decoder_weight(layer).template cast<double>();
    if (gamma_upper.size() != w_g.cols() || gamma_lower.size() != w_g.rows())
        throw InputError("connection graph: gamma sizes do not match layer " + std::to_string(layer));
    out << "upper,lower,sign,significance\n";
    out.precision(17);
    for (Eigen::Index i : order_by_gamma(gamma_upper))
        for (Eigen::Index j : order_by_gamma(gamma_lower)) {
            const double w = w_g(j, i);
            const int sign = w > 0 ? 1 : (w < 0 ? -1 : 0);
            out << i << ',' << j << ',' << sign << ',' << edges(j, i) << '\n';
        }
}

template <typename Scalar>
void export_connection_graph(const std::string& path, const Params<Scalar>& p, const MatrixXd& edges, int layer,
                             const VectorXd& gamma_upper, const VectorXd& gamma_lower) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    write_connection_csv(out, p, edges, layer, gamma_upper, gamma_lower);
}

struct InvarianceReport {
    int layer = 0;
    GammaResult gamma;
    VectorXd significance;  // outgoing significance (empty for layer 0)
    VectorXd mean_sign;     // empty for layer 0
};

/// Gamma report rows `layer,neuron,gamma,significance,mean_sign`.
inline void write_gamma_csv(std::ostream& out, const std::vector<InvarianceReport>& reports) {
    out << "layer,neuron,gamma,significance,mean_sign\n";
    out.precision(17);
    for (const auto& r : reports)
        for (Eigen::Index i = 0; i < r.gamma.gamma.size(); ++i) {
            out << r.layer << ',' << i << ',';
            if (!std::isnan(r.gamma.gamma(i))) out << r.gamma.gamma(i);
            out << ',';
            if (i < r.significance.size()) out << r.significance(i);
            out << ',';
            if (i < r.mean_sign.size()) out << r.mean_sign(i);
            out << '\n';
        }
}

}  // namespace ldae
