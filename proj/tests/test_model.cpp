#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "clair/error.hpp"
#include "clair/model.hpp"
#include "test_util.hpp"

using namespace clair;

namespace {

ProjectionHead identity_head(std::size_t d) { return ProjectionHead{{Layer{Matrix::identity(d), Vector(d, 0.0)}}}; }

ProjectionHead scalar_head(double v) { return ProjectionHead{{Layer{Matrix(1, 1, v), Vector{0.0}}}}; }

Encoder random_encoder(std::mt19937_64& rng, std::size_t d_in, std::size_t d_out, std::vector<std::size_t> hidden,
                       bool with_map) {
    HeadConfig hc{d_out, std::move(hidden), HeadInit::Gaussian};
    Encoder e{make_head(d_in, hc, rng()), {}, true};
    for (Layer& l : e.head.layers)
        for (double& b : l.bias) b = std::uniform_real_distribution<double>(-0.3, 0.3)(rng);
    if (with_map) e.omega = test::random_matrix(d_in, d_in, rng);
    return e;
}

} // namespace

TEST(Forward, IdentityHeadReturnsUnitInput) {
    const Vector f = l2_normalize(Vector{0.3, -0.4, 1.2});
    const Vector x = forward(identity_head(3), f);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(x[k], f[k], 1e-15);
}

TEST(Forward, OutputAlwaysUnitNorm) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 100; ++t) {
        const Encoder e = random_encoder(rng, 9, 5, t % 3 == 0 ? std::vector<std::size_t>{7} : std::vector<std::size_t>{}, false);
        const Matrix f = test::random_matrix(1, 9, rng);
        EXPECT_NEAR(norm(forward(e.head, f.row(0))), 1.0, 1e-12);
    }
}

TEST(Forward, ZeroHeadRaisesZeroVector) {
    ProjectionHead h{{Layer{Matrix(2, 3, 0.0), Vector(2, 0.0)}}};
    try {
        forward(h, Vector{1, 2, 3});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroVector);
    }
}

TEST(Forward, DimensionChecked) {
    try {
        forward(identity_head(3), Vector{1, 2});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(MakeHead, OrthogonalInitPreservesCosines) {
    std::mt19937_64 rng(2);
    const ProjectionHead h = make_head(16, HeadConfig{64, {}, HeadInit::Orthogonal}, 3);
    const Matrix w = h.layers[0].weight;
    EXPECT_LT(test::gram_error(w), 1e-12);
    const Matrix f = test::random_unit_rows(2, 16, rng);
    EXPECT_NEAR(dot(forward(h, f.row(0)), forward(h, f.row(1))), dot(f.row(0), f.row(1)), 1e-12);
    const ProjectionHead narrow = make_head(16, HeadConfig{4, {}, HeadInit::Orthogonal}, 3);
    EXPECT_LT(test::gram_error(narrow.layers[0].weight.transposed()), 1e-12);
}

TEST(MakeHead, SeededAndScaled) {
    const HeadConfig g{64, {}, HeadInit::Gaussian};
    EXPECT_EQ(make_head(32, g, 5).layers[0].weight, make_head(32, g, 5).layers[0].weight);
    EXPECT_NE(make_head(32, g, 5).layers[0].weight, make_head(32, g, 6).layers[0].weight);
    const ProjectionHead h = make_head(400, g, 7);
    double s = 0.0;
    for (double x : h.layers[0].weight.data()) s += x * x;
    EXPECT_NEAR(s / static_cast<double>(h.layers[0].weight.data().size()), 1.0 / 400.0, 0.1 / 400.0);
    for (double b : h.layers[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(Flatten, RoundTripAndLayout) {
    std::mt19937_64 rng(3);
    Encoder e = random_encoder(rng, 4, 3, {5}, true);
    const Vector p = flatten(e);
    ASSERT_EQ(p.size(), 5u * 4 + 5 + 3u * 5 + 3 + 16);
    EXPECT_EQ(p[0], e.head.layers[0].weight(0, 0));
    EXPECT_EQ(p[20], e.head.layers[0].bias[0]);
    EXPECT_EQ(p[p.size() - 1], e.omega(3, 3));
    Encoder z = e;
    unflatten(z, Vector(p.size(), 0.0));
    unflatten(z, p);
    EXPECT_EQ(flatten(z), p);
    e.omega_trainable = false;
    EXPECT_EQ(flatten(e).size(), p.size() - 16);
}

TEST(Momentum, ScalarExamples) {
    ProjectionHead k = scalar_head(1.0);
    momentum_update(k, scalar_head(0.0), 0.9);
    EXPECT_EQ(k.layers[0].weight(0, 0), 0.9);
    momentum_update(k, scalar_head(0.0), 0.9);
    EXPECT_NEAR(k.layers[0].weight(0, 0), 0.81, 1e-15);

    ProjectionHead same = scalar_head(0.37);
    momentum_update(same, scalar_head(0.37), 0.9);
    EXPECT_NEAR(same.layers[0].weight(0, 0), 0.37, 1e-16);
}

TEST(Momentum, LinearOverFlatParameters) {
    std::mt19937_64 rng(4);
    Encoder k = random_encoder(rng, 6, 4, {}, true);
    const Encoder q = random_encoder(rng, 6, 4, {}, true);
    const Vector pk = flatten(k), pq = flatten(q);
    momentum_update(k, q, 0.7);
    const Vector out = flatten(k);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 0.7 * pk[i] + (1.0 - 0.7) * pq[i]);
}

TEST(Momentum, GeometricContraction) {
    std::mt19937_64 rng(5);
    Encoder k = random_encoder(rng, 6, 4, {}, true);
    const Encoder q = random_encoder(rng, 6, 4, {}, true);
    auto dist = [&] {
        const Vector a = flatten(k), b = flatten(q);
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };
    for (int e = 0; e < 10; ++e) {
        const double before = dist();
        momentum_update(k, q, 0.9);
        EXPECT_NEAR(dist(), 0.9 * before, 1e-12);
    }
}

TEST(Momentum, FrozenOmegaUntouched) {
    std::mt19937_64 rng(6);
    Encoder k = random_encoder(rng, 3, 2, {}, true);
    Encoder q = k;
    q.omega = test::random_matrix(3, 3, rng);
    k.omega_trainable = q.omega_trainable = false;
    const Matrix before = k.omega;
    momentum_update(k, q, 0.5);
    EXPECT_EQ(k.omega, before);
}

TEST(Momentum, ShapeMismatch) {
    ProjectionHead a = scalar_head(1.0), b = identity_head(2);
    try {
        momentum_update(a, b, 0.9);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
}

TEST(Sgd, Examples) {
    Encoder e{scalar_head(1.0), {}, true};
    sgd_step(e, Vector{2.0, 0.0}, 0.0);
    EXPECT_EQ(e.head.layers[0].weight(0, 0), 1.0);
    sgd_step(e, Vector{2.0, 0.0}, 0.5);
    EXPECT_EQ(e.head.layers[0].weight(0, 0), 0.0);

    std::mt19937_64 rng(7);
    Encoder a = random_encoder(rng, 5, 3, {}, true), b = a;
    Vector g(a.parameter_count());
    for (double& x : g) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    sgd_step(a, g, 0.125);
    sgd_step(a, g, 0.125);
    sgd_step(b, g, 0.25);
    const Vector pa = flatten(a), pb = flatten(b);
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-15);
    try {
        sgd_step(a, Vector{1.0}, 0.1);
        FAIL();
    } catch (const Error& ex) {
        EXPECT_EQ(ex.kind(), ErrorKind::ShapeMismatch);
    }
}

TEST(Backward, MatchesFiniteDifferences) {
    std::mt19937_64 rng(8);
    const double h = 1e-5;
    for (int t = 0; t < 10; ++t) {
        const bool mapped = t % 2 == 0;
        Encoder e = random_encoder(rng, 5, 4, t % 3 == 0 ? std::vector<std::size_t>{6} : std::vector<std::size_t>{}, true);
        const Matrix f = test::random_matrix(1, 5, rng);
        const Matrix c = test::random_matrix(1, 4, rng);
        auto objective = [&](const Encoder& enc) { return dot(encode(enc, f.row(0), mapped), c.row(0)); };
        ForwardCache cache;
        encode(e, f.row(0), mapped, &cache);
        Vector grad(e.parameter_count(), 0.0);
        backward(e, cache, c.row(0), mapped, grad);
        const Vector p = flatten(e);
        for (std::size_t i = 0; i < p.size(); ++i) {
            Vector pp = p, pm = p;
            pp[i] += h;
            pm[i] -= h;
            Encoder ep = e, em = e;
            unflatten(ep, pp);
            unflatten(em, pm);
            const double num = (objective(ep) - objective(em)) / (2 * h);
            EXPECT_NEAR(grad[i], num, 1e-4 * std::max({std::abs(num), std::abs(grad[i]), 1e-3})) << "param " << i;
        }
    }
}

TEST(MemoryBank, IdentityHeadReproducesInputs) {
    std::mt19937_64 rng(9);
    const Matrix x = test::random_unit_rows(12, 5, rng);
    const PseudoLabelMatrix labels = from_weights(test::random_matrix(12, 3, rng));
    const Encoder e{identity_head(5), {}, true};
    const MemoryBank bank = rebuild_memory_bank(e, x, false, labels, "A");
    EXPECT_EQ(bank.size(), 12u);
    EXPECT_LT(test::max_abs_diff(bank.features, x), 1e-15);
    EXPECT_EQ(bank.assignments, labels.assignments);
}

TEST(MemoryBank, UnchangedAfterFullMomentum) {
    std::mt19937_64 rng(10);
    const Matrix x = test::random_matrix(20, 6, rng);
    const PseudoLabelMatrix labels = from_weights(test::random_matrix(20, 3, rng));
    Encoder k = random_encoder(rng, 6, 4, {}, true);
    const Encoder q = random_encoder(rng, 6, 4, {}, true);
    const MemoryBank before = rebuild_memory_bank(k, x, true, labels, "A");
    momentum_update(k, q, 1.0);
    const MemoryBank after = rebuild_memory_bank(k, x, true, labels, "A", 3);
    EXPECT_EQ(after.features, before.features);
    for (std::size_t i = 0; i < after.size(); ++i) EXPECT_NEAR(norm(after.features.row(i)), 1.0, 1e-10);
}

TEST(MemoryBank, MappingAppliedFirst) {
    std::mt19937_64 rng(11);
    const Matrix x = test::random_matrix(5, 3, rng);
    const PseudoLabelMatrix labels = from_weights(Matrix(5, 2, 0.0));
    Encoder e{identity_head(3), Matrix::from_rows({{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}), false};
    const MemoryBank bank = rebuild_memory_bank(e, x, true, labels, "A");
    for (std::size_t i = 0; i < 5; ++i) {
        const Vector expect = l2_normalize(Vector{-x(i, 1), x(i, 0), x(i, 2)});
        for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(bank.features(i, k), expect[k], 1e-15);
    }
}

TEST(Augment, NoOpNormalizes) {
    const Vector f{3.0, 4.0};
    const Vector out = augment_embedding(f, AugmentConfig{0.0, 0.0}, 1);
    EXPECT_DOUBLE_EQ(out[0], 0.6);
    EXPECT_DOUBLE_EQ(out[1], 0.8);
}

TEST(Augment, DeterministicInSeed) {
    const Vector f{0.1, 0.2, 0.3, 0.4};
    const AugmentConfig cfg{0.3, 0.2};
    EXPECT_EQ(augment_embedding(f, cfg, 77), augment_embedding(f, cfg, 77));
    EXPECT_NE(augment_embedding(f, cfg, 77), augment_embedding(f, cfg, 78));
}

TEST(Augment, SmallNoiseKeepsDirection) {
    std::mt19937_64 rng(12);
    const Matrix f = test::random_unit_rows(1000, 64, rng);
    double mean = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) mean += dot(f.row(i), augment_embedding(f.row(i), AugmentConfig{0.01, 0.0}, i));
    EXPECT_GT(mean / 1000.0, 0.99);
}

TEST(Augment, DropoutRateAndErrors) {
    const Vector f(2000, 1.0);
    const Vector out = augment_embedding(f, AugmentConfig{0.0, 0.25}, 5);
    std::size_t zeros = 0;
    for (double v : out) zeros += v == 0.0;
    EXPECT_NEAR(static_cast<double>(zeros) / 2000.0, 0.25, 0.04);
    try {
        augment_embedding(Vector(4, 0.0), AugmentConfig{0.0, 0.5}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ZeroVector);
    }
    try {
        augment_embedding(f, AugmentConfig{0.0, 1.0}, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
    }
}
