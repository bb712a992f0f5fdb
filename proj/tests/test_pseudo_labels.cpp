#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clair/error.hpp"
#include "clair/pseudo_labels.hpp"
#include "clair/synthetic.hpp"
#include "test_util.hpp"

using namespace clair;

namespace {

constexpr double kPsiPeak = 199.471140200716339;   // 1e4 / (20 √(2π))
constexpr double kPsiAtZero = 199.408815208190899; // peak · exp(-0.25 / 800)

Matrix eye_rows(std::size_t k, std::size_t d) {
    Matrix m(k, d);
    for (std::size_t j = 0; j < k; ++j) m(j, j) = 1.0;
    return m;
}

RefineConfig default_cfg(std::size_t n_r = 1) { return RefineConfig{1e4, 20.0, n_r}; }

} // namespace

TEST(InitPseudoLabels, AnchorItselfIsOneHot) {
    const Matrix anchors = eye_rows(3, 4);
    const PseudoLabelMatrix l = init_pseudo_labels(Matrix(1, 4, std::vector<double>{1, 0, 0, 0}), anchors);
    EXPECT_EQ(l.weights, Matrix(1, 3, std::vector<double>{1, 0, 0}));
    EXPECT_EQ(l.assignments[0], 0u);
}

TEST(InitPseudoLabels, OrthogonalFeatureGivesZerosAndLowestIndex) {
    const PseudoLabelMatrix l = init_pseudo_labels(Matrix(1, 4, std::vector<double>{0, 0, 0, 1}), eye_rows(3, 4));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(l.weights(0, j), 0.0);
    EXPECT_EQ(l.assignments[0], 0u);
}

TEST(InitPseudoLabels, MidpointOfTwoAnchors) {
    const double r = 1.0 / std::sqrt(2.0);
    const PseudoLabelMatrix l = init_pseudo_labels(Matrix(1, 4, std::vector<double>{r, r, 0, 0}), eye_rows(3, 4));
    EXPECT_NEAR(l.weights(0, 0), 0.70710678, 1e-8);
    EXPECT_NEAR(l.weights(0, 1), 0.70710678, 1e-8);
    EXPECT_NEAR(l.weights(0, 2), 0.0, 1e-15);
    EXPECT_EQ(l.assignments[0], 0u);
}

TEST(InitPseudoLabels, DimensionMismatch) {
    try {
        init_pseudo_labels(Matrix(2, 3, 1.0), eye_rows(2, 4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(Psi, PeakValue) {
    EXPECT_NEAR(psi(Vector{0.5}, default_cfg())[0], kPsiPeak, 1e-9);
    EXPECT_NEAR(psi(Vector{0.5}, default_cfg())[0], 199.4711, 1e-4);
}

TEST(Psi, SymmetricAndPeakedAtHalf) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1e-3, 50.0);
    for (int t = 0; t < 200; ++t) {
        const double d = u(rng);
        const Vector v = psi(Vector{0.5 + d, 0.5 - d, 0.5}, default_cfg());
        EXPECT_NEAR(v[0], v[1], 1e-12 * v[2]);
        EXPECT_LT(v[0], v[2]);
        EXPECT_GT(v[0], 0.0);
    }
}

TEST(Psi, Elementwise) {
    const Vector a = psi(Vector{0.1, -3.0, 7.0}, default_cfg());
    const Vector b = psi(Vector{7.0, 0.1, 100.0}, default_cfg());
    EXPECT_EQ(a[0], b[1]);
    EXPECT_EQ(a[2], b[0]);
}

TEST(RefinementKl, GradientMatchesCentralDifferences) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_int_distribution<int> kdist(2, 8);
    const double h = 1e-5;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t k = static_cast<std::size_t>(kdist(rng));
        Vector y(k), x(k);
        for (std::size_t j = 0; j < k; ++j) y[j] = u(rng), x[j] = u(rng);
        const Vector g = refinement_gradient(y, x);
        for (std::size_t j = 0; j < k; ++j) {
            Vector yp = y, ym = y;
            yp[j] += h;
            ym[j] -= h;
            const double num = (refinement_kl(yp, x) - refinement_kl(ym, x)) / (2 * h);
            worst = std::max(worst, std::abs(num - g[j]) / std::max({std::abs(num), std::abs(g[j]), 1e-6}));
        }
    }
    EXPECT_LE(worst, 1e-4);
}

TEST(RefinementStep, MatchedDistributionsLeaveRowUnchanged) {
    const Vector y{0.3, -0.2, 0.9};
    const Vector shifted{1.3, 0.8, 1.9};
    const Vector out = refine_row(y, shifted, default_cfg());
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(out[j], y[j], 1e-12);
}

TEST(RefinementStep, TwoClassExample) {
    const Vector target{std::log(9.0), 0.0};
    const Vector s = softmax(target);
    ASSERT_NEAR(s[0], 0.9, 1e-15);
    EXPECT_NEAR(psi(Vector{0.0}, default_cfg())[0], kPsiAtZero, 1e-9);
    const Vector out = refine_row(Vector{0.0, 0.0}, target, default_cfg());
    EXPECT_NEAR(out[0], 79.76, 5e-3);
    EXPECT_NEAR(out[1], -79.76, 5e-3);
    EXPECT_NEAR(out[0], 0.4 * kPsiAtZero, 1e-9);
}

TEST(RefinementStep, SmallScaleDescendsKl) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const RefineConfig cfg{0.1, 20.0, 1};
    for (int t = 0; t < 100; ++t) {
        Vector y(5), x(5);
        for (std::size_t j = 0; j < 5; ++j) y[j] = u(rng), x[j] = u(rng);
        const Vector next = refine_row(y, x, cfg);
        EXPECT_LT(refinement_kl(next, x), refinement_kl(y, x));
    }
}

TEST(RefinementStep, VanishingScaleIsIdentity) {
    std::mt19937_64 rng(14);
    const Matrix bank = test::random_unit_rows(20, 6, rng);
    const Matrix anchors = test::random_unit_rows(4, 6, rng);
    const PseudoLabelMatrix l = init_pseudo_labels(test::random_unit_rows(20, 6, rng), anchors);
    const PseudoLabelMatrix out = refinement_step(l, bank, anchors, RefineConfig{1e-14, 20.0, 1});
    EXPECT_LT(test::max_abs_diff(out.weights, l.weights), 1e-12);
}

TEST(RefinementStep, UsesBankCosinesAsTarget) {
    std::mt19937_64 rng(15);
    const Matrix bank = test::random_unit_rows(7, 5, rng);
    const Matrix anchors = test::random_unit_rows(3, 5, rng);
    const PseudoLabelMatrix l = from_weights(test::random_matrix(7, 3, rng));
    const PseudoLabelMatrix out = refinement_step(l, bank, anchors, default_cfg());
    for (std::size_t i = 0; i < 7; ++i) {
        Vector target(3);
        for (std::size_t j = 0; j < 3; ++j) target[j] = cosine_similarity(bank.row(i), anchors.row(j));
        const Vector expect = refine_row(l.weights.row(i), target, default_cfg());
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.weights(i, j), expect[j]);
        EXPECT_EQ(out.assignments[i], argmax(out.weights.row(i)));
    }
}

TEST(RefinementStep, ShapeErrors) {
    const PseudoLabelMatrix l = from_weights(Matrix(3, 2, 0.0));
    for (auto fn : std::vector<std::function<void()>>{
             [&] { refinement_step(l, Matrix(4, 5, 1.0), Matrix(2, 5, 1.0), default_cfg()); },
             [&] { refinement_step(l, Matrix(3, 5, 1.0), Matrix(2, 4, 1.0), default_cfg()); },
             [&] { refinement_step(l, Matrix(3, 5, 1.0), Matrix(3, 5, 1.0), default_cfg()); }}) {
        try {
            fn();
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
        }
    }
}

TEST(Refine, ZeroStepsIsIdentityAndThreeStepsCompose) {
    std::mt19937_64 rng(16);
    const Matrix bank = test::random_unit_rows(30, 8, rng);
    const Matrix anchors = test::random_unit_rows(4, 8, rng);
    const PseudoLabelMatrix l = init_pseudo_labels(test::random_unit_rows(30, 8, rng), anchors);
    const PseudoLabelMatrix same = refine(l, bank, anchors, default_cfg(0));
    EXPECT_EQ(same.weights, l.weights);
    EXPECT_EQ(same.assignments, l.assignments);

    PseudoLabelMatrix manual = l;
    for (int s = 0; s < 3; ++s) manual = refinement_step(manual, bank, anchors, default_cfg());
    const PseudoLabelMatrix three = refine(l, bank, anchors, default_cfg(3));
    EXPECT_EQ(three.weights, manual.weights);
    EXPECT_EQ(three.assignments, manual.assignments);
}

TEST(Refine, ThreadCountDoesNotChangeResult) {
    std::mt19937_64 rng(17);
    const Matrix bank = test::random_unit_rows(101, 8, rng);
    const Matrix anchors = test::random_unit_rows(5, 8, rng);
    const PseudoLabelMatrix l = init_pseudo_labels(test::random_unit_rows(101, 8, rng), anchors);
    EXPECT_EQ(refine(l, bank, anchors, default_cfg(4), 1).weights, refine(l, bank, anchors, default_cfg(4), 4).weights);
}

TEST(Refine, ZeroNoiseSyntheticStaysPerfect) {
    SyntheticConfig cfg{8, 0, 20, 16, 0.0, 0.0, 0.0, 0.08, false, 8};
    const SyntheticData d = generate_synthetic_pair(cfg);
    PseudoLabelMatrix l = init_pseudo_labels(d.a, d.anchors_a);
    ASSERT_DOUBLE_EQ(label_accuracy(l, d.a.labels), 1.0);
    l = refine(l, d.a.vectors, d.anchors_a.anchors, default_cfg(10));
    EXPECT_DOUBLE_EQ(label_accuracy(l, d.a.labels), 1.0);
    for (std::size_t i = 0; i < l.rows(); ++i) EXPECT_EQ(l.assignments[i], argmax(l.weights.row(i)));
}

TEST(LabelAccuracy, Examples) {
    const PseudoLabelMatrix l = from_weights(Matrix(4, 3, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0}));
    EXPECT_DOUBLE_EQ(label_accuracy(l, {0, 1, 2, 0}), 1.0);
    EXPECT_DOUBLE_EQ(label_accuracy(l, {1, 2, 0, 1}), 0.0);
    EXPECT_DOUBLE_EQ(label_accuracy(l, {0, 1, 2, 2}), 0.75);
    try {
        label_accuracy(l, {0, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(RefineConfig, Validation) {
    for (RefineConfig bad : {RefineConfig{0.0, 20.0, 1}, RefineConfig{1.0, -1.0, 1}}) {
        try {
            bad.validate();
            ADD_FAILURE();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
        }
    }
}
