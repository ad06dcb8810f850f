#pragma once

#include "ldae/gradients.hpp"

namespace ldae {

/// ADADELTA with per-scalar accumulators. A tied weight pair is stored once, so it
/// has one accumulator and one update and both roles see the new value.
template <typename Scalar>
struct AdaDelta {
    double rho = 0.99;
    double epsilon = 1e-8;
    Weights<Scalar> sq_grad;    // E[g^2]
    Weights<Scalar> sq_update;  // E[delta^2]

    AdaDelta() = default;
    AdaDelta(const ModelSpec& spec, double rho_, double epsilon_)
        : rho(rho_), epsilon(epsilon_), sq_grad(Weights<Scalar>::zeros(spec)), sq_update(Weights<Scalar>::zeros(spec)) {}

    void step(Params<Scalar>& p, const Grads<Scalar>& g) {
        auto params = p.w.views();
        auto grads = g.views();
        auto eg = sq_grad.views();
        auto ed = sq_update.views();
        if (params.size() != grads.size() || params.size() != eg.size())
            throw InputError("adadelta: optimizer state does not match the model");
        const Scalar r = static_cast<Scalar>(rho);
        const Scalar one_minus_r = static_cast<Scalar>(1.0 - rho);
        const Scalar eps = static_cast<Scalar>(epsilon);
        for (std::size_t t = 0; t < params.size(); ++t) {
            if (params[t].size() != grads[t].size() || params[t].size() != eg[t].size())
                throw InputError("adadelta: shape mismatch in " + params[t].name);
            auto theta = params[t].flat().array();
            const auto grad = Eigen::Map<const Vector<Scalar>>(grads[t].data, grads[t].size()).array();
            auto acc_g = eg[t].flat().array();
            auto acc_d = ed[t].flat().array();
            acc_g = r * acc_g + one_minus_r * grad.square();
            const Vector<Scalar> delta = (-((acc_d + eps).sqrt() / (acc_g + eps).sqrt()) * grad).matrix();
            acc_d = r * acc_d + one_minus_r * delta.array().square();
            theta += delta.array();
        }
    }
};

}  // namespace ldae
