#pragma once

#include "ldae/optimizer.hpp"
#include "ldae/patches.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ldae {

enum class Precision { F32, F64 };

inline std::string to_string(Precision p) { return p == Precision::F32 ? "f32" : "f64"; }

inline Precision parse_precision(const std::string& s) {
    if (s == "f32" || s == "32") return Precision::F32;
    if (s == "f64" || s == "64") return Precision::F64;
    throw InputError("unknown precision '" + s + "' (expected f32 or f64)");
}

struct TrainConfig {
    ModelSpec spec;
    std::string dataset = "synthetic";
    double sigma_n = 0.5;
    Eigen::Index batch = 50;
    long long updates = 0;
    std::uint64_t seed = 1;
    long long validation_interval = 1000;
    Eigen::Index validation_batches = 200;
    double rho = 0.99;
    double epsilon = 1e-8;
    double centering_rate = kDefaultCenteringRate;
    bool centering = true;
    Precision precision = Precision::F32;

    void validate() const {
        spec.validate();
        if (!(sigma_n >= 0)) throw InputError("sigma_n must be >= 0");
        if (batch < 1) throw InputError("batch must be >= 1");
        if (updates < 0) throw InputError("updates must be >= 0");
        if (validation_interval < 1) throw InputError("validation interval must be >= 1");
        if (validation_batches < 1) throw InputError("validation batches must be >= 1");
        if (!(rho > 0 && rho < 1)) throw InputError("rho must be in (0, 1)");
        if (!(epsilon > 0)) throw InputError("epsilon must be > 0");
    }
};

struct HistoryRecord {
    long long update = 0;
    double cost = 0.0;
};

struct TrainHistory {
    std::vector<HistoryRecord> records;
    double wall_seconds = 0.0;  // not persisted; checkpoints stay bit-reproducible

    /// Minimum validation cost over the run (NaN when empty).
    double best_cost() const {
        double best = std::numeric_limits<double>::quiet_NaN();
        for (const auto& r : records)
            if (!(r.cost >= best)) best = r.cost;
        return best;
    }
};

/// Held-out inputs with a fixed corruption, reused at every evaluation.
struct ValidationSet {
    std::vector<MatrixXd> clean;
    std::vector<MatrixXd> corrupted;
};

inline ValidationSet make_validation_set(const PatchStream& stream, Eigen::Index n_batches, Eigen::Index batch,
                                         double sigma_n, std::uint64_t seed) {
    if (n_batches < 1) throw InputError("evaluate: n_batches must be >= 1");
    Rng sample_rng = substream(seed, "validation");
    Rng noise_rng = substream(seed, "validation-noise");
    ValidationSet set;
    for (Eigen::Index b = 0; b < n_batches; ++b) {
        PatchBatch pb;
        pb.clean = stream.sample(batch, sample_rng);
        pb.noise = MatrixXd::Zero(pb.clean.rows(), pb.clean.cols());
        pb = corrupt(std::move(pb), sigma_n, noise_rng);
        set.clean.push_back(std::move(pb.clean));
        set.corrupted.push_back(std::move(pb.corrupted));
    }
    return set;
}

/// Mean per-element cost of an arbitrary reconstructor `(corrupted, clean) -> x_hat`.
template <typename Reconstruct>
double evaluate_with(Reconstruct&& reconstruct, const ValidationSet& set) {
    double total = 0.0;
    double elements = 0.0;
    for (std::size_t b = 0; b < set.clean.size(); ++b) {
        const MatrixXd x_hat = reconstruct(set.corrupted[b], set.clean[b]);
        total += reconstruction_cost(x_hat, set.clean[b]) * static_cast<double>(set.clean[b].size());
        elements += static_cast<double>(set.clean[b].size());
    }
    return total / elements;
}

template <typename Scalar>
double evaluate(const Params<Scalar>& p, const ModelSpec& spec, const ValidationSet& set) {
    return evaluate_with(
        [&](const MatrixXd& corrupted, const MatrixXd&) {
            return forward(p, spec, corrupted.cast<Scalar>().eval()).x_hat.template cast<double>().eval();
        },
        set);
}

template <typename Scalar>
double evaluate(const Params<Scalar>& p, const ModelSpec& spec, const PatchStream& validation_stream,
                Eigen::Index n_batches, double sigma_n, std::uint64_t seed, Eigen::Index batch = 50) {
    return evaluate(p, spec, make_validation_set(validation_stream, n_batches, batch, sigma_n, seed));
}

template <typename Scalar>
struct TrainResult {
    Params<Scalar> params;
    AdaDelta<Scalar> optimizer;
    TrainHistory history;
    bool diverged = false;
    std::string message;
};

/// Called after every validation with (update, validation cost).
using ProgressFn = std::function<void(long long, double)>;

/// Mini-batch loop: sample, corrupt, forward, cost against the clean input,
/// backward, ADADELTA step, centering update. Validation runs at update 0, every
/// `validation_interval` updates and at the end. On a non-finite cost the
/// parameters from the last validation are returned with `diverged` set.
template <typename Scalar>
TrainResult<Scalar> train(const TrainConfig& cfg, const PatchStream& train_stream,
                          const PatchStream& validation_stream, const ProgressFn& progress = {}) {
    cfg.validate();
    if (train_stream.dim() != cfg.spec.input_dim())
        throw InputError("train: data dimension " + std::to_string(train_stream.dim()) +
                         " does not match the model input " + std::to_string(cfg.spec.input_dim()));
    const auto start = std::chrono::steady_clock::now();

    Rng init_rng = substream(cfg.seed, "init");
    Rng sample_rng = substream(cfg.seed, "sampling");
    Rng noise_rng = substream(cfg.seed, "corruption");
    const ValidationSet validation =
        make_validation_set(validation_stream, cfg.validation_batches, cfg.batch, cfg.sigma_n, cfg.seed);

    TrainResult<Scalar> result;
    result.params = init_params<Scalar>(cfg.spec, init_rng);
    result.optimizer = AdaDelta<Scalar>(cfg.spec, cfg.rho, cfg.epsilon);

    Params<Scalar> last_good = result.params;
    auto validate_now = [&](long long update) {
        const double c = evaluate(result.params, cfg.spec, validation);
        result.history.records.push_back({update, c});
        last_good = result.params;
        if (progress) progress(update, c);
    };
    validate_now(0);

    std::normal_distribution<double> gauss(0.0, cfg.sigma_n > 0 ? cfg.sigma_n : 1.0);
    for (long long t = 1; t <= cfg.updates; ++t) {
        const Matrix<Scalar> x = train_stream.sample(cfg.batch, sample_rng).template cast<Scalar>();
        Matrix<Scalar> x_tilde = x;
        if (cfg.sigma_n > 0)
            for (Eigen::Index i = 0; i < x_tilde.size(); ++i)
                x_tilde.data()[i] += static_cast<Scalar>(gauss(noise_rng));
        const auto act = forward(result.params, cfg.spec, x_tilde);
        const double c = reconstruction_cost(act.x_hat, x);
        bool ok = std::isfinite(c);
        if (ok) {
            try {
                const auto g = backward(result.params, cfg.spec, act, x);
                result.optimizer.step(result.params, g);
                if (cfg.centering) update_centering(result.params, act, cfg.centering_rate);
                ok = result.params.w.all_finite();
            } catch (const DivergenceError&) {
                ok = false;
            }
        }
        if (!ok) {
            result.diverged = true;
            result.message = "non-finite cost or parameters at update " + std::to_string(t);
            result.params = last_good;
            break;
        }
        if (t % cfg.validation_interval == 0 || t == cfg.updates) validate_now(t);
    }
    result.history.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace ldae
