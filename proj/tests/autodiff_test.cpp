#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mapnn/ops.hpp"
#include "mapnn/param_store.hpp"
#include "support/gradcheck.hpp"
#include "support/primitive_cases.hpp"

using namespace mapnn;
using ad::Var;
using oracle::gradcheck;
using oracle::away_from_kinks;
using oracle::random_tensor;

namespace {

using V = Var<double>;
using T = Tensor<double>;

V leaf(const T& t, bool grad = false) { return V::leaf(t, grad); }

T nested_loop_conv(const T& x, const T& w, const T& b) {
    const Index B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const Index O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    T y(Shape{B, O, H - kh + 1, W - kw + 1});
    for (Index n = 0; n < B; ++n)
        for (Index o = 0; o < O; ++o)
            for (Index i = 0; i + kh <= H; ++i)
                for (Index j = 0; j + kw <= W; ++j) {
                    double acc = b[o];
                    for (Index c = 0; c < C; ++c)
                        for (Index p = 0; p < kh; ++p)
                            for (Index q = 0; q < kw; ++q) acc += x.at(n, c, i + p, j + q) * w.at(o, c, p, q);
                    y.at(n, o, i, j) = acc;
                }
    return y;
}

double inner(const T& a, const T& b) { return (a.array() * b.array()).sum(); }

}  // namespace

TEST(Conv2dValid, AllOnesGivesNine) {
    auto y = ad::conv2d_valid(leaf(T::constant({1, 1, 3, 3}, 1.0)), leaf(T::constant({1, 1, 3, 3}, 1.0)),
                              leaf(T::zeros({1})));
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_EQ(y.value()[0], 9.0);
}

TEST(Conv2dValid, CenterDeltaCropsInput) {
    std::mt19937_64 rng(3);
    T x = random_tensor({1, 1, 5, 5}, rng);
    T k({1, 1, 3, 3});
    k.at(0, 0, 1, 1) = 1.0;
    auto y = ad::conv2d_valid(leaf(x), leaf(k), leaf(T::zeros({1})));
    ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 3; ++j) EXPECT_EQ(y.value().at(0, 0, i, j), x.at(0, 0, i + 1, j + 1));
}

TEST(Conv2dValid, MatchesNestedLoopOracle) {
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        T x = random_tensor({2, 3, 4 + seed % 3, 5}, rng);
        T w = random_tensor({4, 3, 3, 3}, rng);
        T b = random_tensor({4}, rng);
        auto y = ad::conv2d_valid(leaf(x), leaf(w), leaf(b));
        EXPECT_LE(max_abs_diff(y.value(), nested_loop_conv(x, w, b)), 1e-12);
    }
}

TEST(Conv2dValid, ShapeMismatchNamesDimension) {
    try {
        ad::conv2d_valid(leaf(T({1, 2, 5, 5})), leaf(T({1, 3, 3, 3})), leaf(T({1})));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_EQ(e.dimension(), "input channels");
        EXPECT_EQ(e.expected(), 3);
        EXPECT_EQ(e.actual(), 2);
    }
    EXPECT_THROW(ad::conv2d_valid(leaf(T({1, 1, 2, 5})), leaf(T({1, 1, 3, 3})), leaf(T({1}))), ShapeError);
}

TEST(Tconv2dValid, SinglePixelSpreadsKernel) {
    std::mt19937_64 rng(5);
    T k = random_tensor({1, 1, 3, 3}, rng);
    auto y = ad::tconv2d_valid(leaf(T::constant({1, 1, 1, 1}, 2.5)), leaf(k), leaf(T::zeros({1})));
    ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
    for (Index i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(y.value()[i], 2.5 * k[i]);
}

TEST(Tconv2dValid, ZeroInputBroadcastsBias) {
    std::mt19937_64 rng(6);
    T b = random_tensor({3}, rng);
    auto y = ad::tconv2d_valid(leaf(T({2, 2, 4, 4})), leaf(random_tensor({2, 3, 3, 3}, rng)), leaf(b));
    ASSERT_EQ(y.shape(), (Shape{2, 3, 6, 6}));
    for (Index n = 0; n < 2; ++n)
        for (Index c = 0; c < 3; ++c)
            for (Index i = 0; i < 6; ++i)
                for (Index j = 0; j < 6; ++j) EXPECT_EQ(y.value().at(n, c, i, j), b[c]);
}

TEST(Tconv2dValid, AdjointIdentity) {
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(100 + seed);
        const Index cin = 1 + seed % 3, cout = 2, h = 5 + seed % 4, w = 6;
        T x = random_tensor({2, cin, h, w}, rng);
        T k = random_tensor({cout, cin, 3, 3}, rng);
        T y = random_tensor({2, cout, h - 2, w - 2}, rng);
        // conv weight [cout,cin,..] reads as a transposed-conv weight mapping cout -> cin.
        double lhs = inner(ad::conv2d_valid(leaf(x), leaf(k), leaf(T::zeros({cout}))).value(), y);
        double rhs = inner(x, ad::tconv2d_valid(leaf(y), leaf(k), leaf(T::zeros({cin}))).value());
        EXPECT_LE(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300), 1e-12);
    }
}

TEST(Activation, PointValues) {
    T x({4});
    x.array() << -1.0, 2.0, 1.3, -0.2;
    auto relu = ad::activation(leaf(x), ad::Activation::relu).value();
    auto leaky = ad::activation(leaf(x), ad::Activation::leaky_relu).value();
    auto clip = ad::activation(leaf(x), ad::Activation::clip01).value();
    EXPECT_EQ(relu[0], 0.0);
    EXPECT_EQ(relu[1], 2.0);
    EXPECT_DOUBLE_EQ(leaky[0], -0.2);
    EXPECT_EQ(leaky[1], 2.0);
    EXPECT_EQ(clip[2], 1.0);
    EXPECT_EQ(clip[3], 0.0);
}

TEST(Activation, ClipSubgradientIsOneOnClosedInterval) {
    T x({4});
    x.array() << 0.0, 1.0, -1e-9, 1.0 + 1e-9;
    auto v = leaf(x, true);
    auto g = ad::grad(ad::sum(ad::activation(v, ad::Activation::clip01)), {v}).front().value();
    EXPECT_EQ(g[0], 1.0);
    EXPECT_EQ(g[1], 1.0);
    EXPECT_EQ(g[2], 0.0);
    EXPECT_EQ(g[3], 0.0);
}

TEST(Dense, IdentityAndBias) {
    std::mt19937_64 rng(8);
    T x = random_tensor({2, 3}, rng);
    T eye({3, 3});
    for (Index i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0;
    EXPECT_EQ(max_abs_diff(ad::dense(leaf(x), leaf(eye), leaf(T({3}))).value(), x), 0.0);

    T b({3});
    b.array() << 1.0, -2.0, 0.5;
    auto y = ad::dense(leaf(x), leaf(T({3, 3})), leaf(b)).value();
    for (Index r = 0; r < 2; ++r)
        for (Index c = 0; c < 3; ++c) EXPECT_EQ(y[r * 3 + c], b[c]);
}

TEST(Dense, MatchesNaiveMatmul) {
    std::mt19937_64 rng(9);
    T x = random_tensor({2, 3}, rng), w = random_tensor({3, 2}, rng);
    auto y = ad::dense(leaf(x), leaf(w), leaf(T({2}))).value();
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) {
            double acc = 0;
            for (Index k = 0; k < 3; ++k) acc += x[i * 3 + k] * w[k * 2 + j];
            EXPECT_LE(std::abs(y[i * 2 + j] - acc), 1e-12);
        }
    EXPECT_THROW(ad::dense(leaf(x), leaf(T({2, 2})), leaf(T({2}))), ShapeError);
}

TEST(Backward, UnreachableParameterGetsZero) {
    ParamStore<double> params;
    params.bind("used", T::constant({3}, 2.0));
    params.bind("unused", T::constant({2, 2}, 7.0));
    auto root = ad::sum(ad::mul(params.at("used"), params.at("used")));
    auto grads = backward(root, params);
    EXPECT_EQ(grads.at("unused").shape(), (Shape{2, 2}));
    EXPECT_EQ(grads.at("unused").array().abs().maxCoeff(), 0.0);
    EXPECT_EQ(grads.at("used")[0], 4.0);
}

TEST(Backward, MeanSquaredDifferenceClosedForm) {
    std::mt19937_64 rng(10);
    T x = random_tensor({2, 1, 3, 4}, rng), y = random_tensor({2, 1, 3, 4}, rng);
    auto xv = leaf(x, true);
    auto root = ad::mean(ad::square(ad::sub(xv, leaf(y))));
    auto g = ad::grad(root, {xv}).front().value();
    T expected(x.shape(), 2.0 * (x.array() - y.array()) / double(x.size()));
    EXPECT_LE(max_abs_diff(g, expected), 1e-12);
}

TEST(Backward, NonScalarRootThrows) {
    auto v = leaf(T({2}), true);
    EXPECT_THROW(ad::grad(ad::scale(v, 2.0), {v}), ShapeError);
}

TEST(Backward, MicroNetworkMatchesFiniteDifferences) {
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(200 + seed);
        std::vector<T> inputs{away_from_kinks(random_tensor({2, 1, 5, 5}, rng)), random_tensor({2, 1, 3, 3}, rng),
                              random_tensor({2}, rng), random_tensor({18, 3}, rng), random_tensor({3}, rng)};
        auto f = [](const std::vector<V>& v) {
            auto h = ad::activation(ad::conv2d_valid(v[0], v[1], v[2]), ad::Activation::relu);
            auto flat = ad::reshape(h, Shape{2, 18});
            return ad::mean(ad::square(ad::dense(flat, v[3], v[4])));
        };
        EXPECT_LE(gradcheck(f, inputs).max_rel_error, 1e-5) << "seed " << seed;
    }
}

TEST(Backward, IsBitwiseDeterministic) {
    std::mt19937_64 rng(11);
    T x = random_tensor({2, 2, 6, 6}, rng), w = random_tensor({3, 2, 3, 3}, rng);
    auto run = [&] {
        auto wv = leaf(w, true);
        auto y = ad::activation(ad::conv2d(leaf(x), wv, {2, 1}), ad::Activation::leaky_relu);
        return ad::grad(ad::sum(ad::square(y)), {wv}).front().value();
    };
    EXPECT_TRUE(identical(run(), run()));
}

// One finite-difference check per primitive, each across 10 seeds.
class PrimitiveGradient : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveGradient, MatchesFiniteDifferences) {
    const int which = GetParam();
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(1000 * which + seed);
        const auto c = oracle::primitive_case(which, rng);
        auto check = gradcheck(c.f, c.inputs);
        EXPECT_LE(check.max_rel_error, 1e-5) << oracle::primitive_case_name(which) << " seed " << seed << " input "
                                             << check.worst_input << " index " << check.worst_index;
    }
}

INSTANTIATE_TEST_SUITE_P(AllPrimitives, PrimitiveGradient, ::testing::Range(0, oracle::kPrimitiveCaseCount));

TEST(ShapeArithmetic, ClosedFormsHold) {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> ext(3, 12), ch(1, 4), ks(1, 3), st(1, 2), pd(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        const Index h = ext(rng), w = ext(rng), c = ch(rng), o = ch(rng), k = ks(rng), s = st(rng), p = pd(rng);
        T x({1, c, h, w}), kernel({o, c, k, k});
        EXPECT_EQ(ad::conv2d_valid(leaf(x), leaf(kernel), leaf(T({o}))).shape(), (Shape{1, o, h - k + 1, w - k + 1}));
        EXPECT_EQ(ad::tconv2d_valid(leaf(T({1, o, h, w})), leaf(kernel), leaf(T({c}))).shape(),
                  (Shape{1, c, h + k - 1, w + k - 1}));
        EXPECT_EQ(ad::conv2d(leaf(x), leaf(kernel), {s, p}).shape(),
                  (Shape{1, o, (h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1}));
    }
}

TEST(InputGradientNode, LinearCriticHasConstantGradient) {
    std::mt19937_64 rng(13);
    T w = random_tensor({6, 1}, rng);
    for (int trial = 0; trial < 3; ++trial) {
        auto x = leaf(random_tensor({1, 6}, rng), true);
        auto d = ad::matmul(x, leaf(w));
        auto g = ad::input_gradient_node(d, x).value();
        for (Index i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(g[i], w[i]);
    }
}

TEST(InputGradientNode, QuadraticCriticGivesTwoX) {
    std::mt19937_64 rng(14);
    T x0 = random_tensor({2, 1, 3, 3}, rng);
    auto x = leaf(x0, true);
    auto g = ad::input_gradient_node(ad::sum_per_sample(ad::square(x)), x).value();
    EXPECT_LE(max_abs_diff(g, T(x0.shape(), 2.0 * x0.array())), 1e-15);
}

TEST(InputGradientNode, RejectsNonAncestor) {
    auto x = leaf(T({1, 3}), true);
    auto other = leaf(T({1, 3}), true);
    EXPECT_THROW(ad::input_gradient_node(ad::sum_per_sample(ad::square(other)), x), InvalidArgument);
}

TEST(InputGradientNode, PenaltyParameterGradientMatchesFiniteDifferences) {
    for (unsigned seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(300 + seed);
        const T xbar = random_tensor({2, 1, 6, 6}, rng);
        std::vector<T> inputs{random_tensor({3, 1, 3, 3}, rng, -0.6, 0.6), random_tensor({3}, rng, -0.3, 0.3),
                              random_tensor({27, 1}, rng, -0.4, 0.4), random_tensor({1}, rng)};
        auto f = [&xbar](const std::vector<V>& v) {
            ad::GradModeGuard on(true);
            auto x = V::leaf(xbar, true);
            auto h = ad::activation(ad::add_channel_bias(ad::conv2d(x, v[0], {2, 1}), v[1]),
                                    ad::Activation::leaky_relu);
            auto d = ad::dense(ad::reshape(h, Shape{2, 27}), v[2], v[3]);
            auto g = ad::input_gradient_node(d, x);
            auto norm = ad::pow(ad::add_scalar(ad::sum_per_sample(ad::square(g)), 1e-12), 0.5);
            return ad::mean(ad::square(ad::add_scalar(norm, -1.0)));
        };
        EXPECT_LE(gradcheck(f, inputs).max_rel_error, 1e-4) << "seed " << seed;
    }
}

TEST(ActivationPatternTrace, ChangesOnlyWhenABranchFlips) {
    const auto run = [](double v) {
        ad::ActivationPatternTrace trace;
        ad::activation(ad::Var<double>::leaf(Tensor<double>::constant({2}, v)), ad::Activation::clip01);
        return trace.fingerprint();
    };
    EXPECT_EQ(run(0.3), run(0.7));
    EXPECT_NE(run(0.3), run(-0.1));
    EXPECT_NE(run(0.3), run(1.2));
    EXPECT_NE(run(0.0), run(0.5));
    const auto outside = run(0.3);
    ad::ActivationPatternTrace outer;
    const auto before = outer.fingerprint();
    EXPECT_EQ(run(0.3), outside);
    EXPECT_EQ(outer.fingerprint(), before);
}
