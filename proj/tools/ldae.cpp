#include "ldae/ldae.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

namespace fs = std::filesystem;
using namespace ldae;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitBadInput = 2;

std::ofstream open_output(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    return out;
}

std::string output_path(const RunConfig& cfg, const std::string& fallback) {
    const auto& out = cfg.get("output.out");
    return out.empty() ? fallback : out;
}

int run_prepare(const RunConfig& cfg) {
    const ImageSet all = load_images(cfg);
    const ImageSet train = all.select(Split::Train);
    if (train.count() == 0) throw InputError("dataset has no training images");
    const InputMap map = fit_input_map(cfg, train);
    const auto path = output_path(cfg, "whitener.ldae");
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    save_input_map(path, map, cfg.resolved());
    std::cout << "input map: " << path << '\n';
    if (map.whitener)
        std::cout << "whitened dim " << map.whitener->output_dim() << ", retained variance fraction "
                  << map.whitener->retained_variance_fraction << ", gain " << map.gain << '\n';
    else
        std::cout << "global standardization: offset " << map.offset << ", gain " << map.gain << '\n';
    return kExitOk;
}

template <typename Scalar>
int train_with(const RunConfig& cfg, const TrainConfig& tc, const Dataset& ds) {
    const auto result = train<Scalar>(tc, *ds.train, *ds.validation, [](long long update, double c) {
        std::cerr << "update " << update << "  validation cost " << c << '\n';
    });
    Checkpoint<Scalar> ck;
    ck.spec = tc.spec;
    ck.params = result.params;
    ck.input_map = ds.input_map;
    ck.optimizer = result.optimizer;
    ck.history = result.history;
    ck.config = cfg.resolved();
    const auto path = output_path(cfg, "checkpoint.ldae");
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    save_checkpoint(path, ck);
    auto history = open_output(cfg.get("output.history"));
    write_history_csv(history, result.history, ck.config);
    std::cout << tc.spec.describe() << " (" << count_params(tc.spec) << " parameters)\n"
              << "best validation cost " << result.history.best_cost() << '\n'
              << "checkpoint: " << path << "\nhistory: " << cfg.get("output.history") << '\n';
    if (result.diverged) {
        std::cerr << "training diverged: " << result.message << '\n';
        return kExitFailed;
    }
    return kExitOk;
}

int run_train(const RunConfig& cfg) {
    const Dataset ds = make_dataset(cfg);
    const TrainConfig tc = train_config(cfg, model_spec(cfg, ds.train->dim()), ds.name);
    return tc.precision == Precision::F32 ? train_with<float>(cfg, tc, ds) : train_with<double>(cfg, tc, ds);
}

int run_sweep(const RunConfig& cfg) {
    const Dataset ds = make_dataset(cfg);
    const auto alphas = cfg.numbers("sweep.alphas");
    const auto seeds = cfg.integer("sweep.seeds");
    const auto budget = cfg.integer("model.budget");
    // Layer sizes are solved per alpha; this spec only carries the variant.
    const Variant variant = parse_variant(cfg.get("model.variant"));
    const TrainConfig tc = train_config(cfg, spec_for_alpha(budget, 0.0, variant, ds.train->dim()), ds.name);
    for (double a : alphas) spec_for_alpha(budget, a, variant, ds.train->dim());

    const auto rows = tc.precision == Precision::F32
                          ? run_alpha_sweep<float>(tc, alphas, budget, *ds.train, *ds.validation, static_cast<int>(seeds))
                          : run_alpha_sweep<double>(tc, alphas, budget, *ds.train, *ds.validation, static_cast<int>(seeds));
    const auto summary = summarize_sweep(rows);
    const std::string config = prefix_lines(cfg.resolved(), "# ");
    auto out = open_output(cfg.get("output.sweep_csv"));
    out << config;
    write_sweep_csv(out, rows);
    auto sum = open_output(cfg.get("output.summary_csv"));
    sum << config;
    write_sweep_summary_csv(sum, summary);
    write_sweep_summary_csv(std::cout, summary);
    for (const auto& r : rows)
        if (r.diverged) std::cerr << "warning: alpha " << r.alpha << " seed " << r.seed << " diverged\n";
    return kExitOk;
}

int run_gradcheck(const RunConfig& cfg) {
    const auto seeds = static_cast<int>(cfg.integer("gradcheck.check_seeds"));
    const double eps = cfg.number("gradcheck.fd_epsilon");
    const double threshold = cfg.number("gradcheck.threshold");
    if (seeds < 1) throw InputError("gradcheck.check_seeds must be >= 1");
    bool ok = true;
    for (Variant v : {Variant::NoLat, Variant::Add, Variant::Mod}) {
        const auto r = gradient_suite(v, {{8, 6}, {8, 6, 3}}, seeds, eps);
        const bool pass = r.max_relative_error < threshold;
        ok = ok && pass;
        std::cout << to_string(v) << " max_relative_error " << r.max_relative_error << " checked " << r.checked
                  << " kinks_skipped " << r.skipped_kinks << (pass ? " ok" : " FAIL") << '\n';
    }
    return ok ? kExitOk : kExitFailed;
}

void write_poolings(const fs::path& dir, const PoolingReport& report, const std::string& config) {
    auto out = open_output((dir / "poolings.csv").string());
    out << config << "anchor,group,upper,link,rank,neuron,strength\n";
    out.precision(17);
    for (std::size_t g = 0; g < report.groups.size(); ++g)
        for (std::size_t m = 0; m < report.groups[g].members.size(); ++m)
            out << report.anchor << ',' << g << ',' << report.groups[g].upper << ',' << report.groups[g].link << ','
                << m << ',' << report.groups[g].members[m].neuron << ',' << report.groups[g].members[m].strength
                << '\n';
    auto feat = open_output((dir / "features.csv").string());
    feat << config << "neuron,component,value\n";
    feat.precision(17);
    for (const auto& [neuron, values] : report.features)
        for (Eigen::Index k = 0; k < values.size(); ++k) feat << neuron << ',' << k << ',' << values(k) << '\n';
}

template <typename Scalar>
int analyze_with(const RunConfig& cfg, const std::string& path) {
    const auto ck = load_checkpoint<Scalar>(path);
    if (ck.spec.variant == Variant::Linear) throw InputError("analyze: the linear model has no hidden layers");
    if (!ck.input_map) throw InputError("analyze: checkpoint was not trained on image data");
    const ImageSet images = load_images(cfg).select(Split::Validation);
    if (images.count() == 0) throw InputError("analyze: dataset has no validation images");

    TransformOptions opt;
    opt.patch_size = static_cast<int>(cfg.integer("data.patch_size"));
    opt.grid_stride = static_cast<int>(cfg.integer("analysis.grid_stride"));
    const auto seed = static_cast<std::uint64_t>(cfg.integer("training.seed"));
    Rng set_rng = substream(seed, "analysis-sets");
    const auto sets = make_transform_sets(images, *ck.input_map, parse_transform_kind(cfg.get("analysis.transform")),
                                          set_rng, static_cast<std::size_t>(cfg.integer("analysis.sets")), opt);
    Rng var_rng = substream(seed, "analysis-variance");
    const auto batch = sample_patches(images, cfg.integer("analysis.variance_samples"), opt.patch_size, var_rng,
                                      &*ck.input_map);
    if (batch.clean.cols() != ck.spec.input_dim())
        throw InputError("analyze: data dimension does not match the checkpoint");
    const auto variances = layer_variances(ck.params, ck.spec, batch.clean);
    const auto edges = compute_significance(ck.params, ck.spec, variances);

    std::vector<InvarianceReport> reports;
    for (int l = 0; l <= ck.spec.depth(); ++l) {
        InvarianceReport r;
        r.layer = l;
        r.gamma = compute_gamma(layer_activations(ck.params, ck.spec, sets.sets, l));
        if (l >= 1) {
            r.significance = neuron_significance(edges[static_cast<std::size_t>(l - 1)]);
            r.mean_sign = mean_weight_sign(ck.params, edges[static_cast<std::size_t>(l - 1)], l - 1);
        }
        reports.push_back(std::move(r));
    }

    const fs::path dir = cfg.get("output.out_dir");
    fs::create_directories(dir);
    const std::string config = prefix_lines(cfg.resolved(), "# ");
    auto gamma = open_output((dir / "gamma.csv").string());
    gamma << config;
    write_gamma_csv(gamma, reports);
    for (int l = 0; l < ck.spec.depth(); ++l) {
        auto e = open_output((dir / ("edges_" + std::to_string(l + 1) + "_" + std::to_string(l) + ".csv")).string());
        e << config;
        write_connection_csv(e, ck.params, edges[static_cast<std::size_t>(l)], l, reports[l + 1].gamma.gamma,
                             reports[l].gamma.gamma);
    }
    for (const auto& r : reports) {
        std::cout << "layer " << r.layer << " mean gamma " << r.gamma.layer_mean;
        if (!r.gamma.excluded.empty()) std::cout << " (" << r.gamma.excluded.size() << " zero-variance neurons excluded)";
        std::cout << '\n';
    }

    if (ck.spec.depth() >= 2) {
        Eigen::Index anchor = cfg.integer("analysis.anchor");
        if (anchor < 0) anchor = rank_descending(edges[1].rowwise().sum()).front();
        const auto pooling = extract_poolings(ck.params, ck.spec, edges, anchor,
                                              static_cast<std::size_t>(cfg.integer("analysis.groups")),
                                              static_cast<std::size_t>(cfg.integer("analysis.members")),
                                              &*ck.input_map);
        if (pooling.empty) std::cout << "anchor " << anchor << " has no outgoing significance\n";
        write_poolings(dir, pooling, config);
    }
    std::cout << "reports written to " << dir.string() << '\n';
    return kExitOk;
}

int run_analyze(const RunConfig& cfg) {
    const auto& path = cfg.get("analysis.checkpoint");
    return checkpoint_precision(path) == Precision::F32 ? analyze_with<float>(cfg, path)
                                                        : analyze_with<double>(cfg, path);
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_csv(in);
}

std::vector<double> column_values(const CsvTable& t, const std::string& name, long long layer, std::size_t layer_col) {
    std::vector<double> out;
    const auto c = t.column(name);
    for (const auto& row : t.rows) {
        if (std::stoll(row[layer_col]) != layer) continue;
        out.push_back(row[c].empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(row[c]));
    }
    return out;
}

int run_report(const RunConfig& cfg) {
    const auto& gamma_csv = cfg.get("report.gamma_csv");
    const auto& sweep_csv = cfg.get("report.sweep_input");
    if (gamma_csv.empty() == sweep_csv.empty())
        throw InputError("report: give exactly one of --gamma_csv or --sweep_input");
    const auto path = output_path(cfg, "report.svg");
    std::ostringstream svg;
    if (!gamma_csv.empty()) {
        const auto t = read_csv_file(gamma_csv);
        const auto layer = cfg.integer("report.layer");
        const auto lc = t.column("layer");
        const auto sig = column_values(t, "significance", layer, lc);
        const auto gam = column_values(t, "gamma", layer, lc);
        const auto sign = column_values(t, "mean_sign", layer, lc);
        if (sig.empty()) throw InputError("report: no rows for layer " + std::to_string(layer));
        write_scatter_svg(svg, sig, gam, sign, "layer " + std::to_string(layer) + " invariance vs significance");
    } else {
        const auto t = read_csv_file(sweep_csv);
        const auto vc = t.column("variant");
        const auto ac = t.column("alpha");
        const auto cc = t.column("min_cost");
        std::map<std::string, std::map<double, std::vector<double>>> grouped;
        for (const auto& row : t.rows) grouped[row[vc]][std::stod(row[ac])].push_back(std::stod(row[cc]));
        std::vector<CostSeries> series;
        for (const auto& [variant, by_alpha] : grouped) {
            CostSeries s{variant, {}};
            for (const auto& [alpha, costs] : by_alpha) s.points.emplace_back(alpha, median_of(costs));
            series.push_back(std::move(s));
        }
        write_cost_plot_svg(svg, series, "median best validation cost");
    }
    std::string config = cfg.resolved();
    for (std::size_t pos; (pos = config.find("--")) != std::string::npos;) config.replace(pos, 2, "- -");
    auto out = open_output(path);
    out << "<!--\n" << config << "-->\n" << svg.str();
    std::cout << "wrote " << path << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Denoising autoencoders with lateral connections: training, sweeps and invariance analysis"};
    app.require_subcommand(1);
    app.footer("Exit status: 0 success, 1 failed check or diverged training, 2 bad input or usage.\n"
               "LDAE_THREADS sets the number of parallel sweep replicas.");

    const std::map<std::string, int (*)(const RunConfig&)> commands = {
        {"prepare", run_prepare}, {"train", run_train},     {"sweep", run_sweep},
        {"gradcheck", run_gradcheck}, {"analyze", run_analyze}, {"report", run_report}};
    const std::map<std::string, std::string> descriptions = {
        {"prepare", "fit the input whitening on training patches and save it"},
        {"train", "train one model and write a checkpoint and history CSV"},
        {"sweep", "train replicas over a list of alpha values and tabulate the best costs"},
        {"gradcheck", "finite-difference gradient checks of every variant on toy sizes"},
        {"analyze", "invariance, significance and pooling reports for a checkpoint"},
        {"report", "render a gamma or sweep CSV as SVG"}};

    std::string config_file;
    std::map<std::string, std::string> overrides;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, fn] : commands) {
        auto* sub = app.add_subcommand(name, descriptions.at(name));
        sub->add_option("--config", config_file, "key = value config file");
        for (const auto& key : config_schema())
            sub->add_option("--" + key.name, overrides[key.full()], key.help + " [" + key.default_value + "]");
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kExitBadInput;
    }

    try {
        RunConfig cfg;
        if (!config_file.empty()) cfg.load_file(config_file);
        for (const auto& [name, sub] : subs) {
            if (!sub->parsed()) continue;
            for (const auto& key : config_schema())
                if (sub->get_option("--" + key.name)->count() > 0) cfg.set(key.full(), overrides[key.full()]);
            return commands.at(name)(cfg);
        }
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailed;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitBadInput;
    }
    return kExitBadInput;
}
