#include "ldae/checkpoint.hpp"
#include "ldae/sweep.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace ldae;
using ldae::testing::temp_dir;

namespace fs = std::filesystem;

namespace {

TrainConfig small_config(ModelSpec spec, long long updates, std::uint64_t seed = 1) {
    TrainConfig cfg;
    cfg.spec = std::move(spec);
    cfg.updates = updates;
    cfg.seed = seed;
    cfg.validation_interval = 50;
    cfg.validation_batches = 4;
    cfg.batch = 20;
    return cfg;
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

template <typename Scalar>
bool same_bits(const Params<Scalar>& a, const Params<Scalar>& b) {
    const auto va = a.w.views();
    const auto vb = b.w.views();
    for (std::size_t t = 0; t < va.size(); ++t)
        if (va[t].size() != vb[t].size() ||
            std::memcmp(va[t].data, vb[t].data, sizeof(Scalar) * static_cast<std::size_t>(va[t].size())) != 0)
            return false;
    for (std::size_t l = 0; l < a.beta.size(); ++l)
        if (a.beta[l] != b.beta[l]) return false;
    return true;
}

}  // namespace

TEST(Evaluate, OracleStubs) {
    const GaussianStream stream(32);
    const auto set = make_validation_set(stream, 40, 50, 0.5, 3);
    EXPECT_EQ(evaluate_with([](const MatrixXd&, const MatrixXd& clean) { return clean; }, set), 0.0);
    const double pass_through = evaluate_with([](const MatrixXd& corrupted, const MatrixXd&) { return corrupted; }, set);
    EXPECT_NEAR(pass_through, 0.25, 0.01);
}

TEST(Evaluate, SameSeedSameCostToTheBit) {
    const GaussianStream stream(8);
    Rng rng(1);
    const ModelSpec spec{Variant::Mod, {8, 6, 3}, true};
    const auto p = ldae::random_params(spec, rng);
    const double a = evaluate(p, spec, stream, 5, 0.5, 11);
    const double b = evaluate(p, spec, stream, 5, 0.5, 11);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a), std::bit_cast<std::uint64_t>(b));
    EXPECT_NE(a, evaluate(p, spec, stream, 5, 0.5, 12));
    EXPECT_THROW(evaluate(p, spec, stream, 0, 0.5, 11), InputError);
}

TEST(Train, ZeroUpdatesRecordsInitialCost) {
    const GaussianStream stream(8);
    const auto cfg = small_config({Variant::Add, {8, 10, 3}, true}, 0);
    const auto r = train<double>(cfg, stream, stream);
    ASSERT_EQ(r.history.records.size(), 1u);
    Rng init = substream(cfg.seed, "init");
    const auto p0 = init_params<double>(cfg.spec, init);
    EXPECT_TRUE(same_bits(r.params, p0));
    EXPECT_EQ(r.history.records[0].cost, evaluate(p0, cfg.spec, stream, cfg.validation_batches, 0.5, cfg.seed, cfg.batch));
    EXPECT_EQ(train<double>(cfg, stream, stream).history.records[0].cost, r.history.records[0].cost);
}

TEST(Train, DeterministicAndSeedSensitive) {
    const GaussianStream stream(10);
    const auto cfg = small_config({Variant::Mod, {10, 12, 4}, true}, 120);
    const auto a = train<float>(cfg, stream, stream);
    const auto b = train<float>(cfg, stream, stream);
    EXPECT_TRUE(same_bits(a.params, b.params));
    auto other = cfg;
    other.seed = 2;
    EXPECT_FALSE(same_bits(a.params, train<float>(other, stream, stream).params));
    // Validation at 0, every 50 updates and at the end.
    ASSERT_EQ(a.history.records.size(), 4u);
    EXPECT_EQ(a.history.records.back().update, 120);
}

TEST(Train, AddAndModOneLayerTrajectoriesCoincide) {
    const GaussianStream stream(6);
    const auto add = train<double>(small_config({Variant::Add, {6, 9}, true}, 100), stream, stream);
    const auto mod = train<double>(small_config({Variant::Mod, {6, 9}, true}, 100), stream, stream);
    EXPECT_TRUE(same_bits(add.params, mod.params));
    ASSERT_EQ(add.history.records.size(), mod.history.records.size());
    for (std::size_t i = 0; i < add.history.records.size(); ++i)
        EXPECT_EQ(add.history.records[i].cost, mod.history.records[i].cost);
}

TEST(Train, LinearApproachesWienerBoundOnSmallInput) {
    const GaussianStream stream(8);
    auto cfg = small_config({Variant::Linear, {8}, true}, 4000);
    cfg.validation_interval = 1000;
    cfg.validation_batches = 40;
    cfg.batch = 50;
    const auto r = train<double>(cfg, stream, stream);
    EXPECT_LT(r.history.best_cost(), 0.225);
    EXPECT_GT(r.history.best_cost(), 0.18);
}

TEST(Train, RejectsMismatchedDimensionAndBadConfig) {
    const GaussianStream stream(5);
    EXPECT_THROW(train<double>(small_config({Variant::Mod, {6, 3}, true}, 1), stream, stream), InputError);
    auto cfg = small_config({Variant::Mod, {5, 3}, true}, 1);
    cfg.rho = 1.0;
    EXPECT_THROW(train<double>(cfg, stream, stream), InputError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    const auto dir = temp_dir("ckpt_rt");
    const GaussianStream stream(8);
    const auto cfg = small_config({Variant::Mod, {8, 6, 3}, true}, 60);
    const auto r = train<float>(cfg, stream, stream);
    Checkpoint<float> ck{cfg.spec, r.params, std::nullopt, r.optimizer, r.history, "[training]\nseed = 1\n"};
    Rng rng(1);
    ck.input_map = whitened_input_map(fit_whitener(ldae::random_matrix(100, 12, rng), 8));
    save_checkpoint(dir / "a.ldae", ck);
    const auto loaded = load_checkpoint<float>(dir / "a.ldae");
    save_checkpoint(dir / "b.ldae", loaded);
    EXPECT_EQ(file_bytes(dir / "a.ldae"), file_bytes(dir / "b.ldae"));
    EXPECT_TRUE(same_bits(loaded.params, r.params));
    EXPECT_EQ(loaded.config, ck.config);
    EXPECT_EQ(loaded.input_map->whitener->basis, ck.input_map->whitener->basis);
    EXPECT_EQ(checkpoint_precision(dir / "a.ldae"), Precision::F32);
    EXPECT_THROW(load_checkpoint<double>(dir / "a.ldae"), InputError);
}

TEST(Checkpoint, ReloadReproducesValidationCost) {
    const auto dir = temp_dir("ckpt_cost");
    const GaussianStream stream(8);
    const auto cfg = small_config({Variant::Mod, {8, 6, 3}, true}, 80);
    const auto r = train<double>(cfg, stream, stream);
    save_checkpoint(dir / "m.ldae", Checkpoint<double>{cfg.spec, r.params, std::nullopt, r.optimizer, r.history, ""});
    const auto ck = load_checkpoint<double>(dir / "m.ldae");
    const auto set = make_validation_set(stream, 10, 20, 0.5, 99);
    EXPECT_EQ(evaluate(ck.params, ck.spec, set), evaluate(r.params, cfg.spec, set));
    EXPECT_EQ(ck.history.records.size(), r.history.records.size());
}

TEST(Checkpoint, IdenticalRunsGiveIdenticalFiles) {
    const auto dir = temp_dir("ckpt_det");
    const GaussianStream stream(8);
    const auto cfg = small_config({Variant::NoLat, {8, 7, 4}, true}, 50);
    for (const char* name : {"x.ldae", "y.ldae"}) {
        const auto r = train<float>(cfg, stream, stream);
        save_checkpoint(dir / name, Checkpoint<float>{cfg.spec, r.params, std::nullopt, r.optimizer, r.history, "c"});
    }
    EXPECT_EQ(file_bytes(dir / "x.ldae"), file_bytes(dir / "y.ldae"));
}

TEST(Checkpoint, TruncatedPayloadNamesTensor) {
    const auto dir = temp_dir("ckpt_trunc");
    const ModelSpec spec{Variant::Mod, {8, 6, 3}, true};
    Rng rng(2);
    save_checkpoint(dir / "m.ldae", Checkpoint<double>{spec, ldae::random_params(spec, rng), {}, {}, {}, ""});
    const auto bytes = file_bytes(dir / "m.ldae");
    std::ofstream(dir / "cut.ldae", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
    try {
        load_checkpoint<double>(dir / "cut.ldae");
        FAIL() << "expected an error";
    } catch (const InputError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("length mismatch"), std::string::npos) << msg;
        EXPECT_NE(msg.find("tensor '"), std::string::npos) << msg;
    }
}

TEST(Checkpoint, BadMagicAndVersion) {
    const auto dir = temp_dir("ckpt_magic");
    std::ofstream(dir / "x.ldae", std::ios::binary) << "NOPE\x01\x00\x00\x00";
    EXPECT_THROW(load_checkpoint<double>(dir / "x.ldae"), InputError);
    const ModelSpec spec{Variant::NoLat, {3, 2}, true};
    save_checkpoint(dir / "v.ldae", Checkpoint<double>{spec, Params<double>::zeros(spec), {}, {}, {}, ""});
    auto bytes = file_bytes(dir / "v.ldae");
    bytes[4] = 9;
    std::ofstream(dir / "v9.ldae", std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    EXPECT_THROW(load_checkpoint<double>(dir / "v9.ldae"), InputError);
}

TEST(Sweep, TwoSeedStdMatchesHandFormula) {
    const GaussianStream stream(6);
    auto base = small_config({Variant::NoLat, {6, 1}, true}, 40);
    const auto rows = run_alpha_sweep<double>(base, {0.5}, 300, stream, stream, 2, 2);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].seed, 1u);
    EXPECT_EQ(rows[1].seed, 2u);
    const auto summary = summarize_sweep(rows);
    ASSERT_EQ(summary.size(), 1u);
    ASSERT_TRUE(summary[0].std.has_value());
    const double hand = std::abs(rows[0].min_cost - rows[1].min_cost) / std::sqrt(2.0);
    EXPECT_NEAR(*summary[0].std, hand, 1e-15);
}

TEST(Sweep, SingleRowHasNoStd) {
    const GaussianStream stream(6);
    const auto rows = run_alpha_sweep<float>(small_config({Variant::Mod, {6, 1}, true}, 10), {0.0}, 300, stream, stream, 1);
    ASSERT_EQ(rows.size(), 1u);
    const auto summary = summarize_sweep(rows);
    EXPECT_FALSE(summary[0].std.has_value());
    std::ostringstream os;
    write_sweep_summary_csv(os, summary);
    const std::string csv = os.str();
    EXPECT_EQ(csv.back(), '\n');
    EXPECT_EQ(csv[csv.size() - 2], ',');
}

TEST(Sweep, CardinalityAndParallelMatchesSerial) {
    const GaussianStream stream(6);
    const auto base = small_config({Variant::NoLat, {6, 1}, true}, 20);
    const auto serial = run_alpha_sweep<float>(base, {0.5, 1.0, 2.0}, 400, stream, stream, 2, 1);
    const auto parallel = run_alpha_sweep<float>(base, {0.5, 1.0, 2.0}, 400, stream, stream, 2, 4);
    ASSERT_EQ(serial.size(), 6u);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        EXPECT_EQ(serial[i].min_cost, parallel[i].min_cost);
        EXPECT_LE(count_params({Variant::NoLat, {6, serial[i].n1, serial[i].n2}, true}), 400);
    }
    std::ostringstream os;
    write_sweep_csv(os, serial);
    const std::string csv = os.str();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "dataset,variant,alpha,n1,n2,seed,min_cost,updates");
}
