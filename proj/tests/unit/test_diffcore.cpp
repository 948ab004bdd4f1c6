#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "protofs/core/errors.hpp"
#include "protofs/core/rng.hpp"
#include "protofs/diff/gradcheck.hpp"
#include "protofs/diff/ops.hpp"

using namespace protofs;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = true) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.normal();
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

// Direct nested-loop zero-padded 3x3 cross-correlation, independent of im2col.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& k, const Tensor& b) {
    const auto B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3), Co = k.dim(0);
    std::vector<double> out(B * Co * H * W, 0.0);
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t o = 0; o < Co; ++o)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t xx = 0; xx < W; ++xx) {
                    double s = b[o];
                    for (std::size_t c = 0; c < Ci; ++c)
                        for (int dy = -1; dy <= 1; ++dy)
                            for (int dx = -1; dx <= 1; ++dx) {
                                const long sy = static_cast<long>(y) + dy, sx = static_cast<long>(xx) + dx;
                                if (sy < 0 || sx < 0 || sy >= static_cast<long>(H) || sx >= static_cast<long>(W)) continue;
                                s += x[((n * Ci + c) * H + sy) * W + sx] *
                                     k[((o * Ci + c) * 3 + (dy + 1)) * 3 + (dx + 1)];
                            }
                    out[((n * Co + o) * H + y) * W + xx] = s;
                }
    return out;
}

// Fixed random weighting turns any tensor into a well-conditioned scalar loss.
Tensor weighted_loss(Tape& tape, const Tensor& y, const Tensor& weights) { return sum(tape, mul(tape, y, weights)); }

} // namespace

TEST_CASE("linear matches hand matrix products") {
    Tape tape;
    auto y = linear(tape, Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0}));
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{1, 2});
    y = linear(tape, Tensor::matrix({{1, 2}}), Tensor::matrix({{0, 0}, {0, 0}}), Tensor::vector({3, 4}));
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{3, 4});
    y = linear(tape, Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{1, 1}, {1, 1}}), Tensor::vector({0, 0}));
    CHECK(y.shape() == Shape{2, 2});
    CHECK(std::vector<double>(y.data().begin(), y.data().end()) == std::vector<double>{3, 3, 7, 7});
}

TEST_CASE("linear rejects mismatched shapes naming both") {
    Tape tape;
    try {
        linear(tape, Tensor::matrix({{1, 2, 3}}), Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0}));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[1,3]") != std::string::npos);
        CHECK(msg.find("[2,2]") != std::string::npos);
    }
}

TEST_CASE("conv2d_3x3 small cases") {
    Tape tape;
    SUBCASE("zero kernel passes bias") {
        auto y = conv2d_3x3(tape, Tensor::filled({1, 1, 3, 3}, 1.0), Tensor::zeros({1, 1, 3, 3}), Tensor::vector({5}));
        for (double v : y.data()) CHECK(v == 5.0);
    }
    SUBCASE("ones kernel on 2x2 sums the in-bounds neighbourhood") {
        const Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
        const Tensor k = Tensor::filled({1, 1, 3, 3}, 1.0);
        const Tensor b = Tensor::vector({0});
        auto y = conv2d_3x3(tape, x, k, b);
        const auto expected = conv_oracle(x, k, b);
        CHECK(expected == std::vector<double>{10, 10, 10, 10});
        CHECK(std::vector<double>(y.data().begin(), y.data().end()) == expected);
    }
    SUBCASE("random multi-channel agrees with the direct oracle") {
        Rng rng(3);
        const auto x = random_tensor({2, 3, 5, 4}, rng, false);
        const auto k = random_tensor({4, 3, 3, 3}, rng, false);
        const auto b = random_tensor({4}, rng, false);
        auto y = conv2d_3x3(tape, x, k, b);
        const auto expected = conv_oracle(x, k, b);
        for (std::size_t i = 0; i < expected.size(); ++i) CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-12));
    }
    SUBCASE("channel mismatch") {
        CHECK_THROWS_AS(conv2d_3x3(tape, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1})),
                        DimensionError);
    }
}

TEST_CASE("conv2d with a delta kernel is the identity, bit for bit") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        const auto x = random_tensor({2, 1, 6, 7}, rng, false);
        Tensor k = Tensor::zeros({1, 1, 3, 3});
        k.data()[4] = 1.0;
        Tape tape(Tape::Mode::NoGrad);
        auto y = conv2d_3x3(tape, x, k, Tensor::zeros({1}));
        CHECK(std::equal(y.data().begin(), y.data().end(), x.data().begin()));
    }
}

TEST_CASE("batchnorm examples") {
    Tape tape;
    SUBCASE("two values normalize to about -1 and 1") {
        auto stats = BatchNormStats::fresh(1);
        auto y = batchnorm_train(tape, Tensor({2, 1}, {2, 4}), Tensor::vector({1}), Tensor::vector({0}), stats);
        const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
        CHECK(y[0] == doctest::Approx(-expected).epsilon(1e-14));
        CHECK(y[1] == doctest::Approx(expected).epsilon(1e-14));
        // running stats: momentum 0.1 towards mean 3 and unbiased variance 2
        CHECK(stats.running_mean[0] == doctest::Approx(0.3));
        CHECK(stats.running_var[0] == doctest::Approx(0.9 + 0.2));
    }
    SUBCASE("gamma zero yields beta everywhere") {
        Rng rng(5);
        auto stats = BatchNormStats::fresh(2);
        auto y = batchnorm_train(tape, random_tensor({3, 2, 2, 2}, rng), Tensor::vector({0, 0}), Tensor::vector({7, 7}),
                                 stats);
        for (double v : y.data()) CHECK(v == 7.0);
    }
    SUBCASE("already normalized input is unchanged") {
        auto stats = BatchNormStats::fresh(1);
        auto y = batchnorm_train(tape, Tensor({4, 1}, {-1, 1, -1, 1}), Tensor::vector({1}), Tensor::vector({0}), stats);
        const std::vector<double> x{-1, 1, -1, 1};
        for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(x[i]).epsilon(1e-5));
    }
    SUBCASE("degenerate batch") {
        auto stats = BatchNormStats::fresh(1);
        CHECK_THROWS_AS(batchnorm_train(tape, Tensor({1, 1}, {2}), Tensor::vector({1}), Tensor::vector({0}), stats),
                        DegenerateBatchError);
        CHECK_NOTHROW(batchnorm_eval(tape, Tensor({1, 1}, {2}), Tensor::vector({1}), Tensor::vector({0}), stats));
    }
}

TEST_CASE("relu and maxpool2") {
    Tape tape;
    auto r = relu(tape, Tensor::vector({-1, 0, 2}));
    CHECK(std::vector<double>(r.data().begin(), r.data().end()) == std::vector<double>{0, 0, 2});
    auto p = maxpool2(tape, Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
    CHECK(p.shape() == Shape{1, 1, 1, 1});
    CHECK(p[0] == 4);
    auto q = maxpool2(tape, Tensor({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9}));
    CHECK(q.shape() == Shape{1, 1, 1, 1});
    CHECK(q[0] == 5);
    CHECK_THROWS_AS(maxpool2(tape, Tensor::zeros({1, 1, 1, 4})), DimensionError);
}

TEST_CASE("maxpool2 routes ties to the first row-major maximum") {
    Tape tape;
    Tensor x({1, 1, 2, 2}, {3, 3, 3, 3}, true);
    auto y = maxpool2(tape, x);
    backward(sum(tape, y), tape);
    CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 0, 0, 0});
}

TEST_CASE("sq_dist_matrix examples and symmetry") {
    Tape tape;
    CHECK(sq_dist_matrix(tape, Tensor::matrix({{0, 0}}), Tensor::matrix({{0, 0}}))[0] == 0);
    CHECK(sq_dist_matrix(tape, Tensor::matrix({{0, 0}}), Tensor::matrix({{3, 4}}))[0] == 25);
    auto d = sq_dist_matrix(tape, Tensor::matrix({{1, 1}, {0, 0}}), Tensor::matrix({{1, 0}}));
    CHECK(d.shape() == Shape{2, 1});
    CHECK(d[0] == 1);
    CHECK(d[1] == 1);
    CHECK_THROWS_AS(sq_dist_matrix(tape, Tensor::matrix({{0, 0}}), Tensor::matrix({{0, 0, 0}})), DimensionError);

    Rng rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_tensor({4, 3}, rng, false), b = random_tensor({5, 3}, rng, false);
        auto ab = sq_dist_matrix(tape, a, b), ba = sq_dist_matrix(tape, b, a), aa = sq_dist_matrix(tape, a, a);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(aa[i * 4 + i] == 0.0);
            for (std::size_t j = 0; j < 5; ++j) CHECK(ab[i * 5 + j] == ba[j * 4 + i]);
        }
    }
}

TEST_CASE("log_softmax and nll_loss") {
    Tape tape;
    auto l = log_softmax(tape, Tensor::matrix({{0, 0}}));
    CHECK(l[0] == doctest::Approx(-std::log(2.0)));
    CHECK(l[1] == doctest::Approx(-std::log(2.0)));
    l = log_softmax(tape, Tensor::matrix({{1, 2}}));
    CHECK(l[0] == doctest::Approx(-1.3133).epsilon(1e-4));
    CHECK(l[1] == doctest::Approx(-0.3133).epsilon(1e-4));

    const double ninf = -std::numeric_limits<double>::infinity();
    const std::vector<int> t0{0};
    CHECK(nll_loss(tape, Tensor::matrix({{0.0, ninf}}), t0).item() == doctest::Approx(0.0));
    const std::vector<int> bad{2};
    CHECK_THROWS_AS(nll_loss(tape, Tensor::matrix({{0.0, 0.0}}), bad), LabelError);

    Rng rng(21);
    const auto x = random_tensor({6, 5}, rng, false);
    for (auto& v : Tensor(x).data()) v *= 30.0;
    auto y = log_softmax(tape, x);
    for (std::size_t r = 0; r < 6; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 5; ++c) s += std::exp(y[r * 5 + c]);
        CHECK(std::abs(std::log(s)) <= 1e-10);
    }
}

TEST_CASE("backward basic rules") {
    SUBCASE("sum gives ones") {
        Tape tape;
        Tensor x = Tensor::filled({2, 3}, 0.5, true);
        backward(sum(tape, x), tape);
        for (double g : x.grad()) CHECK(g == 1.0);
    }
    SUBCASE("squared distance derivative") {
        Tape tape;
        Tensor a = Tensor::matrix({{3}}, true);
        backward(sq_dist_matrix(tape, a, Tensor::matrix({{0}})), tape);
        CHECK(a.grad()[0] == 6.0);
    }
    SUBCASE("second call accumulates into leaves") {
        Tape tape;
        Tensor a = Tensor::matrix({{3}}, true);
        auto loss = sq_dist_matrix(tape, a, Tensor::matrix({{0}}));
        backward(loss, tape);
        backward(loss, tape);
        CHECK(a.grad()[0] == 12.0);
    }
    SUBCASE("non-scalar loss is a contract error") {
        Tape tape;
        Tensor x = Tensor::filled({2}, 1.0, true);
        auto y = scale(tape, x, 2.0);
        CHECK_THROWS_AS(backward(y, tape), ContractError);
    }
    SUBCASE("loss must come from the tape") {
        Tape tape;
        CHECK_THROWS_AS(backward(Tensor::scalar(1.0, true), tape), ContractError);
    }
}

TEST_CASE("permuted topological tape yields identical gradients") {
    Rng rng(4);
    const auto x = random_tensor({3, 4}, rng, false);
    Tensor w1 = random_tensor({4, 5}, rng), b1 = random_tensor({5}, rng);
    Tensor w2 = random_tensor({4, 5}, rng), b2 = random_tensor({5}, rng);
    const auto weights = random_tensor({3, 5}, rng, false);

    auto run = [&](bool permute) {
        for (Tensor* p : {&w1, &b1, &w2, &b2}) p->clear_grad();
        Tape tape;
        auto h1 = relu(tape, linear(tape, x, w1, b1));  // nodes 0,1
        auto h2 = relu(tape, linear(tape, x, w2, b2));  // nodes 2,3
        auto loss = sum(tape, mul(tape, mul(tape, h1, h2), weights));  // nodes 4,5,6
        if (permute) {
            const std::vector<std::size_t> order{2, 0, 3, 1, 4, 5, 6};
            tape.reorder(order);
        }
        backward(loss, tape);
        std::vector<double> g;
        for (Tensor* p : {&w1, &b1, &w2, &b2}) g.insert(g.end(), p->grad().begin(), p->grad().end());
        return g;
    };
    CHECK(run(false) == run(true));

    Tape tape;
    auto h = relu(tape, linear(tape, x, w1, b1));
    sum(tape, h);
    const std::vector<std::size_t> bad{1, 0, 2};
    CHECK_THROWS_AS(tape.reorder(bad), ContractError);
}

TEST_CASE("finite differences: exact for a quadratic") {
    std::vector<Tensor> params{Tensor::scalar(1.0, true)};
    auto loss = [&](Tape& tape) { return sum(tape, mul(tape, params[0], params[0])); };
    CHECK(finite_diff_check(params, loss) <= 1e-8);
}

TEST_CASE("finite differences: non-finite loss is a numeric error") {
    std::vector<Tensor> params{Tensor::scalar(1.0, true)};
    auto loss = [&](Tape& tape) { return scale(tape, params[0], std::numeric_limits<double>::infinity()); };
    CHECK_THROWS_AS(finite_diff_check(params, loss), NumericError);
}

TEST_CASE("every op passes the gradient check on 10 seeds") {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed, 77);
        {  // linear + log_softmax + nll_loss
            std::vector<Tensor> p{random_tensor({4, 3}, rng), random_tensor({3, 5}, rng), random_tensor({5}, rng)};
            const std::vector<int> t{0, 4, 2, 1};
            worst = std::max(worst, finite_diff_check(p, [&](Tape& tape) {
                return nll_loss(tape, log_softmax(tape, linear(tape, p[0], p[1], p[2])), t);
            }));
        }
        {  // matmul, scale
            std::vector<Tensor> p{random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)};
            const auto w = random_tensor({3, 2}, rng, false);
            worst = std::max(worst, finite_diff_check(p, [&](Tape& tape) {
                return weighted_loss(tape, scale(tape, matmul(tape, p[0], p[1]), -1.5), w);
            }));
        }
        {  // conv
            std::vector<Tensor> p{random_tensor({2, 2, 4, 5}, rng), random_tensor({3, 2, 3, 3}, rng),
                                  random_tensor({3}, rng)};
            const auto w = random_tensor({2, 3, 4, 5}, rng, false);
            worst = std::max(worst, finite_diff_check(p, [&](Tape& tape) {
                return weighted_loss(tape, conv2d_3x3(tape, p[0], p[1], p[2]), w);
            }));
        }
        {  // batchnorm train + eval
            std::vector<Tensor> p{random_tensor({3, 2, 2, 3}, rng), random_tensor({2}, rng), random_tensor({2}, rng)};
            const auto w = random_tensor({3, 2, 2, 3}, rng, false);
            worst = std::max(worst, finite_diff_check(p, [&](Tape& tape) {
                auto stats = BatchNormStats::fresh(2);
                return weighted_loss(tape, batchnorm_train(tape, p[0], p[1], p[2], stats), w);
            }));
            BatchNormStats running{{0.2, -0.1}, {1.5, 0.7}};
            worst = std::max(worst, finite_diff_check(p, [&](Tape& tape) {
                return weighted_loss(tape, batchnorm_eval(tape, p[0], p[1], p[2], running), w);
            }));
        }
        {  // relu, maxpool2, reshape, slice_rows
            std::vector<Tensor> p{random_tensor({3, 2, 5, 4}, rng)};
            const auto w = random_tensor({2, 2 * 2 * 2}, rng, false);
            worst = std::max(worst, finite_diff_check(p, [&](Tape& tape) {
                auto pooled = maxpool2(tape, relu(tape, p[0]));
                auto flat = reshape(tape, pooled, {3, 8});
                return weighted_loss(tape, slice_rows(tape, flat, 1, 2), w);
            }));
        }
        {  // sq_dist_matrix
            std::vector<Tensor> p{random_tensor({4, 3}, rng), random_tensor({2, 3}, rng)};
            const auto w = random_tensor({4, 2}, rng, false);
            worst = std::max(worst, finite_diff_check(p, [&](Tape& tape) {
                return weighted_loss(tape, sq_dist_matrix(tape, p[0], p[1]), w);
            }));
        }
        {  // random 2-layer MLP with nll loss
            std::vector<Tensor> p{random_tensor({6, 4}, rng), random_tensor({6}, rng), random_tensor({6, 3}, rng),
                                  random_tensor({3}, rng)};
            const auto x = random_tensor({5, 4}, rng, false);
            const std::vector<int> t{0, 1, 2, 1, 0};
            worst = std::max(worst, finite_diff_check(p, [&](Tape& tape) {
                // first-layer weights arrive flat as [6,4] and are viewed as [4,6]
                auto h = relu(tape, linear(tape, x, reshape(tape, p[0], {4, 6}), p[1]));
                return nll_loss(tape, log_softmax(tape, linear(tape, h, p[2], p[3])), t);
            }));
        }
    }
    MESSAGE("max relative error across ops: " << worst);
    CHECK(worst <= 1e-4);
}
