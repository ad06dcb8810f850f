#pragma once

#include "ldae/data.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace ldae {

struct ConfigKey {
    std::string section;
    std::string name;
    std::string default_value;
    std::string help;
    std::string full() const { return section + "." + name; }
};

/// Every recognised key. Flag names (`--name`) are unique across sections.
inline const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> keys = {
        {"data", "dataset", "synthetic", "cifar10, raw or synthetic"},
        {"data", "cifar10_dir", "", "directory with the CIFAR-10 binary batches"},
        {"data", "raw_data", "", "little-endian float32 image file"},
        {"data", "raw_sidecar", "", "sidecar describing the raw image file"},
        {"data", "synthetic_dim", "256", "dimension of the white Gaussian stream"},
        {"data", "whitener", "", "input map written by `prepare` (fitted on the fly when empty)"},
        {"data", "whiten", "auto", "auto, yes or no (auto whitens cifar10 only)"},
        {"data", "patch_size", "16", "patch side in pixels"},
        {"data", "whiten_dim", "256", "retained PCA components"},
        {"data", "whiten_samples", "50000", "training patches used to fit the whitener"},
        {"data", "eigen_floor", "1e-8", "added to eigenvalues before inversion"},
        {"model", "variant", "mod", "linear, nolat, add or mod"},
        {"model", "alpha", "0", "n2/n1 ratio; 0 for a single hidden layer"},
        {"model", "budget", "1000000", "parameter budget"},
        {"model", "layers", "", "explicit sizes such as 256-1622-50 (overrides alpha/budget)"},
        {"training", "sigma_n", "0.5", "corruption noise standard deviation"},
        {"training", "batch", "50", "mini-batch size"},
        {"training", "updates", "1000", "mini-batch updates"},
        {"training", "seed", "1", "master seed"},
        {"training", "validation_interval", "1000", "updates between validations"},
        {"training", "validation_batches", "200", "validation batches per evaluation"},
        {"training", "rho", "0.99", "ADADELTA decay"},
        {"training", "epsilon", "1e-8", "ADADELTA epsilon"},
        {"training", "centering_rate", "0.99", "weight of the newest batch in the centering average"},
        {"training", "precision", "f32", "f32 or f64"},
        {"sweep", "alphas", "0,0.03,0.1,0.3,1", "comma-separated alpha values"},
        {"sweep", "seeds", "5", "replicas per alpha"},
        {"gradcheck", "check_seeds", "20", "random models per variant and size"},
        {"gradcheck", "fd_epsilon", "1e-5", "central-difference step"},
        {"gradcheck", "threshold", "1e-4", "maximum relative error"},
        {"analysis", "checkpoint", "checkpoint.ldae", "model checkpoint to analyze"},
        {"analysis", "transform", "translation", "translation, rotation or scaling"},
        {"analysis", "sets", "1000", "transformation sets"},
        {"analysis", "grid_stride", "2", "translation grid stride in pixels"},
        {"analysis", "variance_samples", "10000", "clean patches used for variances"},
        {"analysis", "anchor", "-1", "layer-1 anchor neuron for pooling extraction (-1: most significant)"},
        {"analysis", "groups", "3", "pooling groups"},
        {"analysis", "members", "20", "members per pooling group"},
        {"output", "out", "", "output path (checkpoint, whitener or SVG)"},
        {"output", "history", "history.csv", "training history CSV"},
        {"output", "sweep_csv", "sweep.csv", "per-replica sweep table"},
        {"output", "summary_csv", "sweep_summary.csv", "per-alpha sweep summary"},
        {"output", "out_dir", "analysis", "analysis output directory"},
        {"report", "gamma_csv", "", "gamma report to plot"},
        {"report", "layer", "2", "layer of the gamma report to plot"},
        {"report", "sweep_input", "", "sweep CSV to plot"},
    };
    return keys;
}

/// Resolved key/value configuration: schema defaults, then a config file, then flags.
class RunConfig {
public:
    RunConfig() {
        for (const auto& k : config_schema()) values_[k.full()] = k.default_value;
    }

    /// `[section]` headers followed by `key = value` lines; `#` starts a comment.
    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open config " + path);
        load(in, path);
    }

    void load(std::istream& in, const std::string& origin = "<config>") {
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const std::string where = origin + ":" + std::to_string(lineno);
            if (t.front() == '[') {
                if (t.back() != ']') throw InputError(where + ": malformed section header");
                section = trim(std::string_view(t).substr(1, t.size() - 2));
                continue;
            }
            const auto eq = t.find('=');
            if (eq == std::string::npos) throw InputError(where + ": expected key = value");
            const std::string key = trim(std::string_view(t).substr(0, eq));
            set((section.empty() ? "" : section + ".") + key, trim(std::string_view(t).substr(eq + 1)), where);
        }
    }

    void set(const std::string& full_key, const std::string& value, const std::string& where = "") {
        if (!values_.count(full_key))
            throw InputError((where.empty() ? "" : where + ": ") + "unknown config key '" + full_key + "'");
        values_[full_key] = value;
    }

    const std::string& get(const std::string& full_key) const {
        auto it = values_.find(full_key);
        if (it == values_.end()) throw InputError("unknown config key '" + full_key + "'");
        return it->second;
    }

    double number(const std::string& key) const {
        const auto& s = get(key);
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw InputError("config key '" + key + "' is not a number: '" + s + "'");
    }

    long long integer(const std::string& key) const {
        const auto& s = get(key);
        long long v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec == std::errc{} && res.ptr == s.data() + s.size()) return v;
        // Accept integral values written in floating point, e.g. 1e6.
        const double d = number(key);
        if (d == static_cast<double>(static_cast<long long>(d))) return static_cast<long long>(d);
        throw InputError("config key '" + key + "' is not an integer: '" + s + "'");
    }

    std::vector<double> numbers(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            try {
                out.push_back(std::stod(item));
            } catch (const std::exception&) {
                throw InputError("config key '" + key + "' has a non-numeric entry '" + item + "'");
            }
        }
        return out;
    }

    /// Canonical text of every key, grouped by section in schema order.
    std::string resolved() const {
        std::ostringstream os;
        std::string section;
        for (const auto& k : config_schema()) {
            if (k.section != section) {
                os << (section.empty() ? "" : "\n") << '[' << k.section << "]\n";
                section = k.section;
            }
            os << k.name << " = " << values_.at(k.full()) << '\n';
        }
        return os.str();
    }

private:
    std::map<std::string, std::string> values_;
};

/// Prefixes every line of `text` with `prefix` (for embedding configs in CSV/SVG).
inline std::string prefix_lines(const std::string& text, const std::string& prefix) {
    std::ostringstream os;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) os << prefix << line << '\n';
    return os.str();
}

}  // namespace ldae
