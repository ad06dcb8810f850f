#pragma once

#include "ldae/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace ldae {

/// Worker count for replica-parallel work, from LDAE_THREADS (default 1).
inline unsigned thread_count() {
    if (const char* env = std::getenv("LDAE_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n >= 1) return static_cast<unsigned>(n);
    }
    return 1;
}

/// Runs job(i) for i in [0, n) on `threads` workers. Jobs must be independent.
template <typename Job>
void parallel_for(std::size_t n, unsigned threads, Job&& job) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) job(i);
        });
    for (auto& th : pool) th.join();
}

/// alpha = 0 means a single hidden layer; alpha > 0 a second layer of round(alpha * n1).
inline ModelSpec spec_for_alpha(long long budget, double alpha, Variant variant, Eigen::Index d) {
    return solve_layer_sizes(budget, alpha, variant, d, alpha > 0 ? 2 : 1);
}

struct SweepRow {
    std::string dataset;
    Variant variant = Variant::Mod;
    double alpha = 0.0;
    Eigen::Index n1 = 0;
    Eigen::Index n2 = 0;
    std::uint64_t seed = 0;
    double min_cost = 0.0;
    long long updates = 0;
    bool diverged = false;
};

struct SweepSummary {
    double alpha = 0.0;
    Eigen::Index n1 = 0;
    Eigen::Index n2 = 0;
    std::size_t replicas = 0;
    double mean = 0.0;
    double median = 0.0;
    double min = 0.0;
    std::optional<double> std;  // corrected sample std; absent for one replica
};

/// Trains `seeds` replicas (seeds 1..N) for each alpha and records the minimum
/// validation cost of each. A diverged replica keeps its best cost so far.
template <typename Scalar>
std::vector<SweepRow> run_alpha_sweep(const TrainConfig& base, const std::vector<double>& alphas, long long budget,
                                      const PatchStream& train_stream, const PatchStream& validation_stream,
                                      int seeds, unsigned threads = thread_count()) {
    if (seeds < 1) throw InputError("sweep: seeds must be >= 1");
    if (alphas.empty()) throw InputError("sweep: no alpha values");
    std::vector<SweepRow> rows(alphas.size() * static_cast<std::size_t>(seeds));
    std::vector<TrainConfig> configs(rows.size());
    for (std::size_t a = 0; a < alphas.size(); ++a)
        for (int s = 0; s < seeds; ++s) {
            const std::size_t i = a * seeds + s;
            configs[i] = base;
            configs[i].spec = spec_for_alpha(budget, alphas[a], base.spec.variant, train_stream.dim());
            configs[i].seed = static_cast<std::uint64_t>(s + 1);
            const auto& n = configs[i].spec.layer_sizes;
            rows[i] = {base.dataset, base.spec.variant, alphas[a],
                       n.size() > 1 ? n[1] : 0, n.size() > 2 ? n[2] : 0,
                       configs[i].seed, 0.0, base.updates, false};
        }
    parallel_for(rows.size(), threads, [&](std::size_t i) {
        const auto result = train<Scalar>(configs[i], train_stream, validation_stream);
        rows[i].min_cost = result.history.best_cost();
        rows[i].diverged = result.diverged;
    });
    return rows;
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Corrected (n - 1) sample standard deviation; nullopt for fewer than two values.
inline std::optional<double> sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return std::nullopt;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline std::vector<SweepSummary> summarize_sweep(const std::vector<SweepRow>& rows) {
    std::vector<SweepSummary> out;
    std::vector<double> order;
    for (const auto& r : rows)
        if (std::find(order.begin(), order.end(), r.alpha) == order.end()) order.push_back(r.alpha);
    for (double alpha : order) {
        SweepSummary s;
        s.alpha = alpha;
        std::vector<double> costs;
        for (const auto& r : rows)
            if (r.alpha == alpha) {
                costs.push_back(r.min_cost);
                s.n1 = r.n1;
                s.n2 = r.n2;
            }
        s.replicas = costs.size();
        double sum = 0.0;
        for (double c : costs) sum += c;
        s.mean = sum / static_cast<double>(costs.size());
        s.median = median_of(costs);
        s.min = *std::min_element(costs.begin(), costs.end());
        s.std = sample_std(costs);
        out.push_back(s);
    }
    return out;
}

/// Shortest text that reads back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "dataset,variant,alpha,n1,n2,seed,min_cost,updates\n";
    for (const auto& r : rows)
        out << r.dataset << ',' << to_string(r.variant) << ',' << format_number(r.alpha) << ',' << r.n1 << ','
            << r.n2 << ',' << r.seed << ',' << format_number(r.min_cost) << ',' << r.updates << '\n';
}

inline void write_sweep_summary_csv(std::ostream& out, const std::vector<SweepSummary>& rows) {
    out << "alpha,n1,n2,replicas,mean_cost,median_cost,min_cost,std\n";
    for (const auto& s : rows)
        out << format_number(s.alpha) << ',' << s.n1 << ',' << s.n2 << ',' << s.replicas << ','
            << format_number(s.mean) << ',' << format_number(s.median) << ',' << format_number(s.min) << ','
            << (s.std ? format_number(*s.std) : "") << '\n';
}

}  // namespace ldae
