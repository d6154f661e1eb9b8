#include <gtest/gtest.h>

#include <cmath>

#include "autodiff.hpp"
#include "error.hpp"
#include "gradcheck.hpp"
#include "rng.hpp"

using namespace navbench;

namespace {

constexpr int kSeeds = 20;
constexpr double kTol = 1e-4;

// Weighted sum against a fixed random tensor, so every output element gets a
// distinct upstream gradient.
Var weighted(Var y, std::uint64_t seed) {
    return sum(mul(y, y.tape().constant(random_tensor(y.value().shape(), seed ^ 0xABCDu))));
}

std::size_t dim_from(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.uniform_index(hi - lo + 1); }

void expect_grad(const std::vector<Tensor>& in, const LossBuilder& f) {
    const GradCheckResult r = gradcheck(in, f);
    EXPECT_LT(r.max_rel_error, kTol);
    EXPECT_GT(r.checked, 0u);
}

} // namespace

TEST(Autodiff, MatmulIdentity) {
    Tape tape;
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye[i * 4] = 1.0;
    const Var x = tape.leaf(random_tensor({2, 3}, 1), true);
    const Var y = matmul(x, tape.constant(eye));
    EXPECT_EQ(y.value(), x.value());
    tape.backward(sum(y));
    for (double g : x.grad().data()) EXPECT_EQ(g, 1.0);
}

TEST(Autodiff, SoftmaxRowsSumToOne) {
    Tape tape;
    const Var y = softmax(tape.leaf(random_tensor({5, 7}, 3, 20.0)));
    for (int r = 0; r < 5; ++r) {
        double s = 0.0;
        for (int j = 0; j < 7; ++j) s += y.value()[r * 7 + j];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Autodiff, ShapeErrorsNameOp) {
    Tape tape;
    const Var a = tape.leaf(Tensor({2, 3}));
    const Var b = tape.leaf(Tensor({2, 3}));
    try {
        matmul(a, b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
        EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("[2,3]"), std::string::npos);
    }
    EXPECT_THROW(add(a, tape.leaf(Tensor({3, 2}))), Error);
    EXPECT_THROW(slice(a, 2, 2), Error);
}

TEST(Autodiff, NonFiniteTrips) {
    Tape tape;
    const Var a = tape.leaf(Tensor({1}, 1e200));
    try {
        mul(a, a);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Numeric);
    }
}

TEST(Autodiff, ReplayIsBitIdentical) {
    auto run = [] {
        Tape tape;
        const Var x = tape.leaf(random_tensor({2, 4}, 9), true);
        const Var w = tape.leaf(random_tensor({4, 3}, 10), true);
        tape.backward(sum(tanh(matmul(x, w))));
        return std::make_pair(x.grad(), w.grad());
    };
    EXPECT_EQ(run(), run());
}

TEST(AutodiffGrad, Matmul) {
    for (int s = 0; s < kSeeds; ++s) {
        Rng rng(s);
        const auto m = dim_from(rng, 1, 3), k = dim_from(rng, 1, 4), n = dim_from(rng, 1, 4);
        expect_grad({random_tensor({m, k}, s), random_tensor({k, n}, s + 100)},
                    [s](Tape&, std::span<const Var> v) { return weighted(matmul(v[0], v[1]), s); });
    }
}

TEST(AutodiffGrad, BiasAdd) {
    for (int s = 0; s < kSeeds; ++s) {
        Rng rng(s);
        const auto m = dim_from(rng, 1, 3), n = dim_from(rng, 1, 5);
        expect_grad({random_tensor({m, n}, s), random_tensor({n}, s + 1)},
                    [s](Tape&, std::span<const Var> v) { return weighted(bias_add(v[0], v[1]), s); });
    }
}

TEST(AutodiffGrad, Conv2d) {
    for (int s = 0; s < kSeeds; ++s) {
        Rng rng(s);
        const auto c = dim_from(rng, 1, 3), f = dim_from(rng, 1, 3), k = dim_from(rng, 1, 3);
        const int stride = static_cast<int>(dim_from(rng, 1, 3));
        const auto h = k + dim_from(rng, 0, 5), w = k + dim_from(rng, 0, 5);
        expect_grad({random_tensor({c, h, w}, s), random_tensor({f, c, k, k}, s + 1), random_tensor({f}, s + 2)},
                    [s, stride](Tape&, std::span<const Var> v) { return weighted(conv2d(v[0], v[1], v[2], stride), s); });
    }
}

TEST(AutodiffGrad, Conv2dMatchesDirectLoops) {
    Tape tape;
    const Tensor x = random_tensor({3, 11, 9}, 4), k = random_tensor({2, 3, 4, 3}, 5), b = random_tensor({2}, 6);
    const Var y = conv2d(tape.leaf(x), tape.leaf(k), tape.leaf(b), 2);
    ASSERT_EQ(y.shape(), (Shape{2, 4, 4}));
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t oy = 0; oy < 4; ++oy)
            for (std::size_t ox = 0; ox < 4; ++ox) {
                double acc = b[f];
                for (std::size_t c = 0; c < 3; ++c)
                    for (std::size_t i = 0; i < 4; ++i)
                        for (std::size_t j = 0; j < 3; ++j)
                            acc += k[((f * 3 + c) * 4 + i) * 3 + j] * x[(c * 11 + oy * 2 + i) * 9 + ox * 2 + j];
                EXPECT_NEAR(y.value()[(f * 4 + oy) * 4 + ox], acc, 1e-12);
            }
}

TEST(AutodiffGrad, Elementwise) {
    for (int s = 0; s < kSeeds; ++s) {
        Rng rng(s);
        const Shape sh{dim_from(rng, 1, 3), dim_from(rng, 1, 5)};
        const Tensor a = random_tensor(sh, s, 2.0, 1e-3), b = random_tensor(sh, s + 7, 2.0);
        expect_grad({a}, [s](Tape&, std::span<const Var> v) { return weighted(relu(v[0]), s); });
        expect_grad({a}, [s](Tape&, std::span<const Var> v) { return weighted(tanh(v[0]), s); });
        expect_grad({a}, [s](Tape&, std::span<const Var> v) { return weighted(sigmoid(v[0]), s); });
        expect_grad({a}, [s](Tape&, std::span<const Var> v) { return weighted(softmax(v[0]), s); });
        expect_grad({a}, [s](Tape&, std::span<const Var> v) { return weighted(scale(v[0], -1.7), s); });
        expect_grad({a, b}, [s](Tape&, std::span<const Var> v) { return weighted(add(v[0], v[1]), s); });
        expect_grad({a, b}, [s](Tape&, std::span<const Var> v) { return weighted(sub(v[0], v[1]), s); });
        expect_grad({a, b}, [s](Tape&, std::span<const Var> v) { return weighted(mul(v[0], v[1]), s); });
        Tensor pos = random_tensor(sh, s + 3);
        for (auto& x : pos.data()) x = 0.5 + std::abs(x);
        expect_grad({pos}, [s](Tape&, std::span<const Var> v) { return weighted(log(v[0]), s); });
    }
}

TEST(AutodiffGrad, Structural) {
    for (int s = 0; s < kSeeds; ++s) {
        Rng rng(s);
        const auto rows = dim_from(rng, 1, 3), n1 = dim_from(rng, 1, 4), n2 = dim_from(rng, 1, 4);
        const Tensor a = random_tensor({rows, n1}, s), b = random_tensor({rows, n2}, s + 1);
        expect_grad({a, b}, [s](Tape&, std::span<const Var> v) { return weighted(concat({v[0], v[1], v[0]}), s); });
        const auto lo = rng.uniform_index(n2);
        const auto hi = lo + 1 + rng.uniform_index(n2 - lo);
        expect_grad({b}, [s, lo, hi](Tape&, std::span<const Var> v) { return weighted(slice(v[0], lo, hi), s); });
        expect_grad({a}, [s, rows, n1](Tape&, std::span<const Var> v) {
            return weighted(reshape(v[0], {n1 * rows}), s);
        });
        expect_grad({a}, [](Tape&, std::span<const Var> v) { return sum(v[0]); });
        expect_grad({a}, [s](Tape&, std::span<const Var> v) { return scale(mean(tanh(v[0])), 3.0); });
    }
}

TEST(Lstm, ZeroWeightsZeroState) {
    Tape tape;
    const LstmWeights w{tape.leaf(Tensor({5 + 3, 12})), tape.leaf(Tensor({12}))};
    const LstmState s0{tape.leaf(Tensor({1, 3})), tape.leaf(Tensor({1, 3}))};
    const LstmState s1 = lstm_cell(tape.leaf(random_tensor({1, 5}, 1)), s0, w);
    for (double v : s1.h.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, GradcheckThreeCells) {
    for (int s = 0; s < kSeeds; ++s) {
        const std::size_t in = 3, hid = 2;
        std::vector<Tensor> inputs{random_tensor({in + hid, 4 * hid}, s, 0.8), random_tensor({4 * hid}, s + 1),
                                   random_tensor({1, hid}, s + 2),           random_tensor({1, hid}, s + 3)};
        for (int t = 0; t < 3; ++t) inputs.push_back(random_tensor({1, in}, s + 10 + t));
        expect_grad(inputs, [s](Tape&, std::span<const Var> v) {
            const LstmWeights w{v[0], v[1]};
            LstmState st{v[2], v[3]};
            Var total;
            for (int t = 0; t < 3; ++t) {
                st = lstm_cell(v[4 + t], st, w);
                const Var term = weighted(st.h, s + t);
                total = t == 0 ? term : add(total, term);
            }
            return add(total, weighted(st.c, s + 50));
        });
    }
}

TEST(Lstm, CellStateGrowsAtMostLinearly) {
    Tape tape;
    const std::size_t hid = 4;
    Tensor bias({4 * hid}, 0.0);
    for (std::size_t i = 0; i < 2 * hid; ++i) bias[i] = 50.0; // saturate input and forget gates
    for (std::size_t i = 3 * hid; i < 4 * hid; ++i) bias[i] = 50.0;
    const LstmWeights w{tape.leaf(random_tensor({2 + hid, 4 * hid}, 3, 0.1)), tape.leaf(bias)};
    LstmState st{tape.leaf(Tensor({1, hid})), tape.leaf(Tensor({1, hid}))};
    for (int t = 1; t <= 40; ++t) {
        st = lstm_cell(tape.leaf(random_tensor({1, 2}, t)), st, w);
        for (double c : st.c.value().data()) EXPECT_LE(std::abs(c), t + 1e-9);
    }
}

TEST(Losses, ZeroAdvantageAndPerfectValue) {
    Tape tape;
    const Var logits = tape.leaf(Tensor({1, 4}), true);
    const Var probs = softmax(logits);
    const Var pg = policy_gradient_term(log(probs), 2, 0.0);
    EXPECT_EQ(pg.value()[0], 0.0);
    tape.backward(pg);
    for (double g : logits.grad().data()) EXPECT_EQ(g, 0.0);

    Tape t2;
    const Var v = t2.leaf(Tensor({1, 1}, 3.25), true);
    const Var l = value_mse(v, 3.25);
    EXPECT_EQ(l.value()[0], 0.0);
    t2.backward(l);
    EXPECT_EQ(v.grad()[0], 0.0);
}

TEST(Losses, Gradchecks) {
    for (int s = 0; s < kSeeds; ++s) {
        Rng rng(s);
        const int a = static_cast<int>(rng.uniform_index(4));
        const double adv = rng.uniform(-2, 2);
        expect_grad({random_tensor({1, 4}, s)}, [a, adv](Tape&, std::span<const Var> v) {
            return policy_gradient_term(log(softmax(v[0])), a, adv);
        });
        const double target = rng.uniform(-3, 3);
        expect_grad({random_tensor({1, 1}, s + 1)},
                    [target](Tape&, std::span<const Var> v) { return value_mse(v[0], target); });
        expect_grad({random_tensor({1, 4}, s + 2)}, [](Tape&, std::span<const Var> v) {
            const Var p = softmax(v[0]);
            return entropy_bonus(p, log(p));
        });
        std::vector<int> classes(4);
        for (auto& c : classes) c = static_cast<int>(rng.uniform_index(8));
        expect_grad({random_tensor({1, 32}, s + 3)},
                    [classes](Tape&, std::span<const Var> v) { return depth_ce(v[0], classes, 8); });
        const int label = static_cast<int>(rng.uniform_index(2));
        expect_grad({random_tensor({1, 1}, s + 4, 3.0)},
                    [label](Tape&, std::span<const Var> v) { return loop_ce(v[0], label); });
    }
}

TEST(Losses, CrossEntropyValues) {
    Tape tape;
    const std::vector<int> t{0, 3};
    const Var ce = depth_ce(tape.leaf(Tensor({1, 8})), t, 4);
    EXPECT_NEAR(ce.value()[0], std::log(4.0), 1e-12);
    const Var l1 = loop_ce(tape.leaf(Tensor({1, 1}, 0.0)), 1);
    EXPECT_NEAR(l1.value()[0], std::log(2.0), 1e-12);
    const Var l0 = loop_ce(tape.leaf(Tensor({1, 1}, 2.0)), 0);
    EXPECT_NEAR(l0.value()[0], -std::log(1.0 - 1.0 / (1.0 + std::exp(-2.0))), 1e-12);
}

TEST(Losses, ZeroProbabilityActionClamped) {
    Tape tape;
    Tensor p({1, 4}, 0.0);
    p[0] = 1.0;
    const auto before = policy_log_floor_hits();
    const Var pg = policy_gradient_term(log(tape.leaf(p)), 3, 1.0);
    EXPECT_NEAR(pg.value()[0], -std::log(1e-12), 1e-9);
    EXPECT_EQ(policy_log_floor_hits(), before + 1);
}
