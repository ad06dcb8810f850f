#include "ldae/gradients.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace ldae;

namespace {

// One-unit models: d = 1, n1 = 1 (and n2 = 1) with every tensor set by hand.
Params<double> unit_params(const ModelSpec& spec) { return Params<double>::zeros(spec); }

Matrix<double> scalar(double v) { return Matrix<double>::Constant(1, 1, v); }

}  // namespace

TEST(CountParams, MillionBudgetSpecs) {
    EXPECT_EQ(count_params({Variant::NoLat, {256, 1948}, true}), 999580);
    EXPECT_EQ(count_params({Variant::Add, {256, 1937}, true}), 999748);
    EXPECT_EQ(count_params({Variant::Mod, {256, 1937}, true}), 999748);
    EXPECT_EQ(count_params({Variant::Mod, {256, 1622, 50}, true}), 999608);
    EXPECT_EQ(count_params({Variant::Linear, {256}, true}), 256 * 256 + 256);
}

TEST(SolveLayerSizes, SingleLayerMillionBudget) {
    EXPECT_EQ(solve_layer_sizes(1000000, 0, Variant::NoLat, 256, 1).layer_sizes, (std::vector<Eigen::Index>{256, 1948}));
    EXPECT_EQ(solve_layer_sizes(1000000, 0, Variant::Mod, 256, 1).layer_sizes, (std::vector<Eigen::Index>{256, 1937}));
}

TEST(SolveLayerSizes, TwoLayerRuleIsLargestFeasibleFirstLayer) {
    const auto spec = solve_layer_sizes(1000000, 0.03, Variant::Mod, 256, 2);
    const auto n1 = spec.layer_sizes[1];
    const auto n2 = spec.layer_sizes[2];
    EXPECT_EQ(n2, std::llround(0.03 * n1));
    EXPECT_LE(count_params(spec), 1000000);
    ModelSpec bigger{Variant::Mod, {256, n1 + 1, std::llround(0.03 * (n1 + 1))}, true};
    EXPECT_GT(count_params(bigger), 1000000);
    // 256-1622-50 comes from holding n2 = 50 fixed and maximizing n1.
    EXPECT_NEAR(n1, 1622, 6);
    EXPECT_LE(std::abs(n2 - 50), 1);
}

TEST(SolveLayerSizes, FixedTopLayerKnownSizes) {
    struct Row { Variant v; Eigen::Index n1, n2; };
    const std::vector<Row> rows = {{Variant::Mod, 1622, 50},  {Variant::NoLat, 590, 589}, {Variant::Add, 839, 336},
                                   {Variant::Mod, 1395, 100}, {Variant::Add, 1061, 212},  {Variant::NoLat, 512, 718}};
    for (const auto& r : rows) {
        const auto spec = solve_first_layer(1000000, r.v, 256, r.n2);
        EXPECT_EQ(spec.layer_sizes[1], r.n1) << to_string(r.v) << " n2=" << r.n2;
    }
}

TEST(SolveLayerSizes, InfeasibleBudget) {
    EXPECT_THROW(solve_layer_sizes(100, 0, Variant::NoLat, 256, 1), InputError);
    EXPECT_THROW(solve_layer_sizes(1000, 0, Variant::Linear, 256, 1), InputError);
    EXPECT_THROW(solve_layer_sizes(1000000, 0, Variant::Mod, 256, 2), InputError);
}

TEST(Init, OrthonormalRowsAndZeroBiases) {
    Rng rng = substream(1, "init");
    const ModelSpec spec{Variant::Mod, {256, 256, 40}, true};
    const auto p = init_params<double>(spec, rng);
    const MatrixXd gram = p.w.W[0] * p.w.W[0].transpose();
    EXPECT_LT((gram - MatrixXd::Identity(256, 256)).cwiseAbs().maxCoeff(), 1e-6);
    for (const auto& W : p.w.W)
        for (Eigen::Index r = 0; r < W.rows(); ++r) EXPECT_NEAR(W.row(r).norm(), 1.0, 1e-9);
    for (const auto& v : p.w.views())
        if (v.name.rfind("W_", 0) != 0) {
            EXPECT_EQ(v.flat().cwiseAbs().maxCoeff(), 0.0) << v.name;
        }
    for (const auto& b : p.beta) EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Init, OvercompleteLayerWarnsAndNormalizes) {
    Rng rng(3);
    std::vector<std::string> warnings;
    const auto p = init_params<double>({Variant::NoLat, {4, 6}, true}, rng, &warnings);
    EXPECT_EQ(warnings.size(), 1u);
    const MatrixXd top = p.w.W[0].topRows(4);
    EXPECT_LT((top * top.transpose() - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-9);
    for (Eigen::Index r = 0; r < 6; ++r) EXPECT_NEAR(p.w.W[0].row(r).norm(), 1.0, 1e-9);
}

TEST(Init, SameSeedBitIdentical) {
    const ModelSpec spec{Variant::Add, {20, 12, 5}, true};
    Rng a = substream(7, "init");
    Rng b = substream(7, "init");
    const auto pa = init_params<float>(spec, a);
    const auto pb = init_params<float>(spec, b);
    const auto va = pa.w.views();
    const auto vb = pb.w.views();
    for (std::size_t t = 0; t < va.size(); ++t)
        EXPECT_EQ(0, std::memcmp(va[t].data, vb[t].data, sizeof(float) * va[t].size())) << va[t].name;
}

TEST(Forward, ModMiddleUnitHandExamples) {
    const ModelSpec spec{Variant::Mod, {1, 1, 1}, true};
    auto p = unit_params(spec);
    // Layer 1 encoder passes the input: z1 = x. Top-down term is hhat2 * W[1] with W[1] = 0.
    p.w.W[0](0, 0) = 1.0;
    p.w.b_a[0](0) = 1.0;
    auto act = forward(p, spec, scalar(2.0));
    EXPECT_DOUBLE_EQ(act.hhat[1](0, 0), 1.5);

    p.w.b_a[0](0) = 0.0;
    p.w.a[0](0) = 1.0;
    act = forward(p, spec, scalar(1.0));
    EXPECT_NEAR(act.hhat[1](0, 0), 0.7310585786300049, 1e-15);
}

TEST(Forward, AddMiddleUnitHandExample) {
    const ModelSpec spec{Variant::Add, {1, 1, 1}, true};
    auto p = unit_params(spec);
    // x = 0 gives h1 = 0; the top unit h2 = b_f2 = 1, gated to 0.5 * 1, and W[1] = -2 makes top-down -1.
    p.w.b_f[1](0) = 1.0;
    p.w.W[1](0, 0) = -2.0;
    const auto act = forward(p, spec, scalar(0.0));
    ASSERT_DOUBLE_EQ(act.hhat[2](0, 0), 0.5);
    EXPECT_DOUBLE_EQ(act.u[1](0, 0), -1.0);
    EXPECT_DOUBLE_EQ(act.hhat[1](0, 0), 0.0);
}

TEST(Forward, ZeroNoLatIsZeroMap) {
    const ModelSpec spec{Variant::NoLat, {5, 4, 3}, true};
    const auto p = Params<double>::zeros(spec);
    Rng rng(1);
    const MatrixXd x = ldae::random_matrix(7, 5, rng);
    const auto act = forward(p, spec, x);
    EXPECT_EQ(act.x_hat.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(reconstruction_cost(act.x_hat, x), x.squaredNorm() / 35.0);
}

TEST(Forward, AddAndModCoincideForOneLayer) {
    Rng rng(5);
    const ModelSpec add{Variant::Add, {6, 9}, true};
    const ModelSpec mod{Variant::Mod, {6, 9}, true};
    const auto p = ldae::random_params(add, rng);
    const MatrixXd x = ldae::random_matrix(8, 6, rng);
    const auto a = forward(p, add, x);
    const auto m = forward(p, mod, x);
    EXPECT_EQ(a.x_hat, m.x_hat);
    const auto ga = backward(p, add, a, x);
    const auto gm = backward(p, mod, m, x);
    const auto va = ga.views();
    const auto vm = gm.views();
    for (std::size_t t = 0; t < va.size(); ++t) EXPECT_EQ(va[t].flat(), vm[t].flat()) << va[t].name;
}

TEST(Forward, ModGateIsSignConditionallyMonotone) {
    Rng rng(9);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 500; ++trial) {
        const double h = u(rng), b_a = u(rng), a = u(rng), b_b = u(rng);
        const double t1 = u(rng), t2 = t1 + std::abs(u(rng));
        const double g1 = (h + b_a) * logistic(a * h + b_b + t1);
        const double g2 = (h + b_a) * logistic(a * h + b_b + t2);
        if (h + b_a > 0) {
            EXPECT_GE(g2, g1);
        } else if (h + b_a < 0) {
            EXPECT_LE(g2, g1);
        }
    }
}

TEST(Rectifier, LogicTables) {
    for (int a = 0; a <= 1; ++a)
        for (int b = 0; b <= 1; ++b)
            for (int c = 0; c <= 1; ++c) {
                const double and_unit = std::max(0.0, a + b + c - 2.0);
                const double or_unit = 1.0 - std::max(0.0, 1.0 - a - b - c);
                EXPECT_EQ(and_unit, (a && b && c) ? 1.0 : 0.0);
                EXPECT_EQ(or_unit, (a || b || c) ? 1.0 : 0.0);
            }
}

TEST(Cost, Examples) {
    Rng rng(2);
    const MatrixXd x = ldae::random_matrix(500, 200, rng);
    EXPECT_EQ(reconstruction_cost(x, x), 0.0);
    EXPECT_NEAR(reconstruction_cost(MatrixXd::Zero(500, 200), x), 1.0, 0.02);
    const MatrixXd x_tilde = x + ldae::random_matrix(500, 200, rng, 0.5);
    EXPECT_NEAR(reconstruction_cost(0.8 * x_tilde, x), 0.2, 0.005);
    EXPECT_THROW(reconstruction_cost(x, x.leftCols(3)), InputError);
}

TEST(Centering, ZeroMeanIsFixedPoint) {
    const ModelSpec spec{Variant::NoLat, {2, 2}, true};
    auto p = Params<double>::zeros(spec);
    Activations<double> act;
    act.h = {MatrixXd::Zero(2, 2), (MatrixXd(2, 2) << 1, -2, -1, 2).finished()};
    update_centering(p, act, 0.99);
    EXPECT_EQ(p.beta[0], VectorXd::Zero(2));
}

TEST(Centering, FullReplacementAndGeometricLimit) {
    const ModelSpec spec{Variant::NoLat, {3, 2}, true};
    auto p = Params<double>::zeros(spec);
    p.w.b_f[0].setConstant(1.7);  // rectifier output is the constant 1.7
    const MatrixXd x = MatrixXd::Zero(4, 3);
    update_centering(p, forward(p, spec, x), 1.0);
    EXPECT_DOUBLE_EQ(p.beta[0](0), -1.7);

    p.w.b_f[0].setConstant(1.0);
    p.beta[0].setZero();
    for (int t = 0; t < 1000; ++t) update_centering(p, forward(p, spec, x), 0.99);
    EXPECT_NEAR(p.beta[0](1), -1.0, 1e-4);
    EXPECT_THROW(update_centering(p, forward(p, spec, x), 0.0), InputError);
}
