#pragma once

#include "ldae/checkpoint.hpp"
#include "ldae/config.hpp"
#include "ldae/sweep.hpp"

#include <memory>
#include <sstream>

namespace ldae {

/// Training and validation streams built from a resolved config.
struct Dataset {
    std::string name;
    std::optional<ImageSet> train_images;
    std::optional<ImageSet> validation_images;
    std::optional<InputMap> input_map;
    std::unique_ptr<PatchStream> train;
    std::unique_ptr<PatchStream> validation;
};

/// Images of the configured dataset with pixels scaled to [0, 1] for CIFAR-10.
inline ImageSet load_images(const RunConfig& cfg) {
    const auto& kind = cfg.get("data.dataset");
    if (kind == "cifar10") {
        const auto& dir = cfg.get("data.cifar10_dir");
        if (dir.empty()) throw InputError("data.cifar10_dir is required for the cifar10 dataset");
        ImageSet set = load_cifar10(dir);
        set.scale(1.0f / 255.0f);
        return set;
    }
    if (kind == "raw") {
        if (cfg.get("data.raw_data").empty() || cfg.get("data.raw_sidecar").empty())
            throw InputError("data.raw_data and data.raw_sidecar are required for the raw dataset");
        return load_raw_images(cfg.get("data.raw_data"), cfg.get("data.raw_sidecar"));
    }
    throw InputError("dataset '" + kind + "' has no images (expected cifar10 or raw)");
}

inline bool wants_whitening(const RunConfig& cfg) {
    const auto& w = cfg.get("data.whiten");
    if (w == "auto") return cfg.get("data.dataset") == "cifar10";
    if (w == "yes" || w == "true") return true;
    if (w == "no" || w == "false") return false;
    throw InputError("data.whiten must be auto, yes or no");
}

/// Fits the configured preprocessing on training patches only.
inline InputMap fit_input_map(const RunConfig& cfg, const ImageSet& train) {
    if (!wants_whitening(cfg)) return raw_input_map(train);
    const int size = static_cast<int>(cfg.integer("data.patch_size"));
    Rng rng = substream(static_cast<std::uint64_t>(cfg.integer("training.seed")), "whitening");
    const MatrixXd patches = sample_pixel_patches(train, cfg.integer("data.whiten_samples"), size, rng);
    return whitened_input_map(fit_whitener(patches, cfg.integer("data.whiten_dim"), cfg.number("data.eigen_floor")));
}

inline Dataset make_dataset(const RunConfig& cfg) {
    Dataset ds;
    ds.name = cfg.get("data.dataset");
    if (ds.name == "synthetic") {
        const auto d = cfg.integer("data.synthetic_dim");
        if (d < 1) throw InputError("data.synthetic_dim must be >= 1");
        ds.train = std::make_unique<GaussianStream>(d);
        ds.validation = std::make_unique<GaussianStream>(d);
        return ds;
    }
    const ImageSet all = load_images(cfg);
    ds.train_images = all.select(Split::Train);
    ds.validation_images = all.select(Split::Validation);
    if (ds.train_images->count() == 0 || ds.validation_images->count() == 0)
        throw InputError("dataset needs both training and validation images");
    const auto& path = cfg.get("data.whitener");
    ds.input_map = path.empty() ? fit_input_map(cfg, *ds.train_images) : load_input_map(path);
    const int size = static_cast<int>(cfg.integer("data.patch_size"));
    ds.train = std::make_unique<ImagePatchStream>(*ds.train_images, *ds.input_map, size);
    ds.validation = std::make_unique<ImagePatchStream>(*ds.validation_images, *ds.input_map, size);
    return ds;
}

/// "256-1622-50" -> {256, 1622, 50}.
inline std::vector<Eigen::Index> parse_layer_sizes(const std::string& text) {
    std::vector<Eigen::Index> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, '-')) {
        long long v = 0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (res.ec != std::errc{} || res.ptr != item.data() + item.size() || v < 1)
            throw InputError("bad layer sizes '" + text + "'");
        out.push_back(v);
    }
    if (out.empty()) throw InputError("bad layer sizes '" + text + "'");
    return out;
}

inline ModelSpec model_spec(const RunConfig& cfg, Eigen::Index input_dim) {
    const Variant variant = parse_variant(cfg.get("model.variant"));
    const auto& layers = cfg.get("model.layers");
    if (!layers.empty()) {
        ModelSpec spec{variant, parse_layer_sizes(layers), true};
        spec.validate();
        if (spec.input_dim() != input_dim)
            throw InputError("model.layers input size " + std::to_string(spec.input_dim()) +
                             " does not match the data dimension " + std::to_string(input_dim));
        return spec;
    }
    return spec_for_alpha(cfg.integer("model.budget"), cfg.number("model.alpha"), variant, input_dim);
}

inline TrainConfig train_config(const RunConfig& cfg, const ModelSpec& spec, const std::string& dataset) {
    TrainConfig tc;
    tc.spec = spec;
    tc.dataset = dataset;
    tc.sigma_n = cfg.number("training.sigma_n");
    tc.batch = cfg.integer("training.batch");
    tc.updates = cfg.integer("training.updates");
    const auto seed = cfg.integer("training.seed");
    if (seed < 0) throw InputError("training.seed must be >= 0");
    tc.seed = static_cast<std::uint64_t>(seed);
    tc.validation_interval = cfg.integer("training.validation_interval");
    tc.validation_batches = cfg.integer("training.validation_batches");
    tc.rho = cfg.number("training.rho");
    tc.epsilon = cfg.number("training.epsilon");
    tc.centering_rate = cfg.number("training.centering_rate");
    if (!(tc.centering_rate > 0 && tc.centering_rate <= 1))
        throw InputError("training.centering_rate must be in (0, 1]");
    tc.precision = parse_precision(cfg.get("training.precision"));
    tc.validate();
    return tc;
}

inline void write_history_csv(std::ostream& out, const TrainHistory& history, const std::string& config) {
    out << prefix_lines(config, "# ");
    out << "update,validation_cost\n";
    for (const auto& r : history.records) out << r.update << ',' << format_number(r.cost) << '\n';
}

}  // namespace ldae
