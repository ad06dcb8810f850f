#include "ldae/pipeline.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ldae;

TEST(RunConfig, DefaultsFileAndOverrides) {
    RunConfig cfg;
    EXPECT_EQ(cfg.get("training.sigma_n"), "0.5");
    std::istringstream in("# experiment\n[model]\nvariant = nolat   # inline comment\nbudget = 1e6\n\n[training]\nseed=3\n");
    cfg.load(in);
    EXPECT_EQ(cfg.get("model.variant"), "nolat");
    EXPECT_EQ(cfg.integer("model.budget"), 1000000);
    EXPECT_EQ(cfg.integer("training.seed"), 3);
    cfg.set("training.seed", "4");
    EXPECT_EQ(cfg.integer("training.seed"), 4);
}

TEST(RunConfig, UnknownKeysAndMalformedLinesRejected) {
    RunConfig cfg;
    std::istringstream unknown("[model]\nwidth = 3\n");
    EXPECT_THROW(cfg.load(unknown), InputError);
    std::istringstream wrong_section("[training]\nvariant = mod\n");
    EXPECT_THROW(cfg.load(wrong_section), InputError);
    std::istringstream no_equals("[model]\nvariant mod\n");
    EXPECT_THROW(cfg.load(no_equals), InputError);
    std::istringstream bad_header("[model\n");
    EXPECT_THROW(cfg.load(bad_header), InputError);
    cfg.set("training.updates", "12x");
    EXPECT_THROW(cfg.integer("training.updates"), InputError);
    cfg.set("training.updates", "1.5");
    EXPECT_THROW(cfg.integer("training.updates"), InputError);
}

TEST(RunConfig, ResolvedTextReloadsToSameConfig) {
    RunConfig a;
    a.set("sweep.alphas", "0.5,1,2");
    a.set("data.dataset", "raw");
    RunConfig b;
    std::istringstream in(a.resolved());
    b.load(in);
    EXPECT_EQ(a.resolved(), b.resolved());
    EXPECT_EQ(b.numbers("sweep.alphas"), (std::vector<double>{0.5, 1.0, 2.0}));
}

TEST(RunConfig, FlagNamesAreUnique) {
    std::set<std::string> names;
    for (const auto& k : config_schema()) EXPECT_TRUE(names.insert(k.name).second) << k.name;
}

TEST(Pipeline, ModelSpecFromAlphaOrExplicitLayers) {
    RunConfig cfg;
    cfg.set("model.variant", "mod");
    cfg.set("model.alpha", "0");
    EXPECT_EQ(model_spec(cfg, 256).layer_sizes, (std::vector<Eigen::Index>{256, 1937}));
    cfg.set("model.layers", "256-1622-50");
    EXPECT_EQ(count_params(model_spec(cfg, 256)), 999608);
    EXPECT_THROW(model_spec(cfg, 128), InputError);
    EXPECT_THROW(parse_layer_sizes("256--3"), InputError);
    EXPECT_THROW(parse_layer_sizes("256-x"), InputError);
}

TEST(Pipeline, SyntheticDatasetAndTrainConfig) {
    RunConfig cfg;
    cfg.set("data.synthetic_dim", "12");
    const auto ds = make_dataset(cfg);
    EXPECT_EQ(ds.train->dim(), 12);
    EXPECT_FALSE(ds.input_map.has_value());
    const auto tc = train_config(cfg, model_spec(cfg, 12), ds.name);
    EXPECT_EQ(tc.precision, Precision::F32);
    EXPECT_EQ(tc.batch, 50);
    cfg.set("training.centering_rate", "0");
    EXPECT_THROW(train_config(cfg, model_spec(cfg, 12), ds.name), InputError);
    cfg.set("data.dataset", "cifar10");
    EXPECT_THROW(make_dataset(cfg), InputError);
}

TEST(Pipeline, HistoryCsvEmbedsConfig) {
    TrainHistory h;
    h.records = {{0, 1.5}, {10, 0.25}};
    std::ostringstream os;
    write_history_csv(os, h, "[training]\nseed = 7\n");
    EXPECT_EQ(os.str(), "# [training]\n# seed = 7\nupdate,validation_cost\n0,1.5\n10,0.25\n");
}
