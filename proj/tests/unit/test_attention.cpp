#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sta/attention.hpp"
#include "sta/errors.hpp"
#include "sta/grad_check.hpp"
#include "sta/model.hpp"

namespace sta {
namespace {

using ad::Graph;
using ad::Var;

void randomize(Tensor& t, std::mt19937_64& rng, double stddev = 0.5) {
    std::normal_distribution<double> d(0.0, stddev);
    for (double& v : t.values()) v = d(rng);
}

SpatialAttnParams random_spatial(std::size_t joints, std::size_t hs, std::size_t ha, std::uint64_t seed) {
    SpatialAttnParams p = SpatialAttnParams::zeros(joints, hs, ha);
    std::mt19937_64 rng(seed);
    init_lstm(p.lstm, rng, 0.5);
    for (Tensor* t : {&p.w_x, &p.w_h, &p.b, &p.u, &p.b_u}) randomize(*t, rng);
    return p;
}

TemporalAttnParams random_temporal(std::size_t dim, std::size_t ht, std::uint64_t seed) {
    TemporalAttnParams p = TemporalAttnParams::zeros(dim, ht);
    std::mt19937_64 rng(seed);
    init_lstm(p.lstm, rng, 0.5);
    for (Tensor* t : {&p.w_x, &p.w_h}) randomize(*t, rng);
    p.b.fill(0.8);
    return p;
}

std::vector<Tensor> random_frames(std::size_t dim, std::size_t steps, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Tensor> out;
    for (std::size_t t = 0; t < steps; ++t) {
        Tensor x({dim});
        randomize(x, rng, 1.0);
        out.push_back(x);
    }
    return out;
}

TEST(SpatialScores, BiasOnly) {
    SpatialAttnParams p = SpatialAttnParams::zeros(2, 3, 4);
    p.b_u = Tensor::vector({0.3, -0.2});
    Graph g;
    const auto vars = bind(g, p, false);
    const Tensor s = spatial_scores(vars, g.input(Tensor({6}, 1.0)), g.input(Tensor({3}, 0.5))).value();
    EXPECT_EQ(s[0], 0.3);
    EXPECT_EQ(s[1], -0.2);
}

TEST(SpatialScores, ReducedFormulaWithoutInputs) {
    std::mt19937_64 rng(1);
    SpatialAttnParams p = SpatialAttnParams::zeros(3, 2, 4);
    randomize(p.w_h, rng);
    randomize(p.b, rng);
    randomize(p.u, rng);
    randomize(p.b_u, rng);
    Graph g;
    const auto vars = bind(g, p, false);
    const Tensor s = spatial_scores(vars, g.input(Tensor({9}, 2.0)), g.input(Tensor({2}))).value();
    for (std::size_t k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 4; ++j) acc += p.u.at(k, j) * std::tanh(p.b[j]);
        EXPECT_NEAR(s[k], acc + p.b_u[k], 1e-15);
    }
}

TEST(SpatialScores, ShapeMismatch) {
    const auto p = SpatialAttnParams::zeros(2, 3, 4);
    Graph g;
    const auto vars = bind(g, p, false);
    EXPECT_THROW(spatial_scores(vars, g.input(Tensor({5})), g.input(Tensor({3}))), DimensionError);
    EXPECT_THROW(spatial_scores(vars, g.input(Tensor({6})), g.input(Tensor({2}))), DimensionError);
}

TEST(JointGate, Examples) {
    Graph g;
    const Tensor a = joint_gate(g.input(Tensor({4}))).value();
    for (double v : a.values()) EXPECT_EQ(v, 0.25);
    const Tensor b = joint_gate(g.input(Tensor::vector({1, 2, 3}))).value();
    EXPECT_NEAR(b[0], 0.0900305731703805, 1e-15);
    EXPECT_NEAR(b[1], 0.2447284710547977, 1e-15);
    EXPECT_NEAR(b[2], 0.6652409557748219, 1e-15);
}

TEST(Modulate, ScalesEachJointsCoordinates) {
    Graph g;
    const Tensor x = modulate(g.input(Tensor::vector({4, 0, 0, 8, 4, 0})), g.input(Tensor({2}, 0.25))).value();
    EXPECT_EQ(x[0], 1.0);
    EXPECT_EQ(x[1], 0.0);
    EXPECT_EQ(x[2], 0.0);
    EXPECT_EQ(x[3], 2.0);
    EXPECT_EQ(x[4], 1.0);
}

TEST(Modulate, OnesLeaveFrameUnchanged) {
    Graph g;
    const Tensor in = random_frames(12, 1, 2)[0];
    EXPECT_TRUE(modulate(g.input(in), g.input(Tensor({4}, 1.0))).value().identical(in));
}

TEST(Modulate, HardSelection) {
    Graph g;
    const Tensor x = modulate(g.input(Tensor::vector({1, 2, 3, 4, 5, 6})), g.input(Tensor::vector({1, 0}))).value();
    EXPECT_EQ(x[0], 1.0);
    EXPECT_EQ(x[2], 3.0);
    EXPECT_EQ(x[3], 0.0);
    EXPECT_EQ(x[5], 0.0);
}

TEST(Modulate, JointCountMismatch) {
    Graph g;
    EXPECT_THROW(modulate(g.input(Tensor({6})), g.input(Tensor({3}))), DimensionError);
}

TEST(FrameGate, ReluOfPreactivation) {
    TemporalAttnParams p = TemporalAttnParams::zeros(3, 2);
    p.b.fill(-0.3);
    {
        Graph g;
        EXPECT_EQ(frame_gate(bind(g, p, false), g.input(Tensor({3}, 1.0)), g.input(Tensor({2}))).item(), 0.0);
    }
    p.b.fill(0.7);
    {
        Graph g;
        EXPECT_EQ(frame_gate(bind(g, p, false), g.input(Tensor({3}, 1.0)), g.input(Tensor({2}))).item(), 0.7);
    }
}

TEST(FrameGate, ShapeMismatch) {
    const auto p = TemporalAttnParams::zeros(3, 2);
    Graph g;
    const auto vars = bind(g, p, false);
    EXPECT_THROW(frame_gate(vars, g.input(Tensor({4})), g.input(Tensor({2}))), DimensionError);
}

TEST(SpatialAttention, RowsAreDistributions) {
    const auto p = random_spatial(5, 4, 3, 3);
    Graph g;
    std::vector<Var> xs;
    for (const auto& f : random_frames(15, 12, 4)) xs.push_back(g.input(f));
    for (const Var& a : spatial_attention(bind(g, p, false), xs)) {
        double total = 0.0;
        for (double v : a.value().values()) {
            EXPECT_GT(v, 0.0);
            total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(TemporalAttention, BetasNonnegative) {
    auto p = random_temporal(15, 4, 5);
    p.b.fill(0.0);
    Graph g;
    std::vector<Var> xs;
    for (const auto& f : random_frames(15, 30, 6)) xs.push_back(g.input(f));
    for (const Var& b : temporal_attention(bind(g, p, false), xs)) EXPECT_GE(b.item(), 0.0);
}

// Two passes: run the subnetwork LSTM over the whole sequence first, then
// evaluate each gate from the state left by the previous frame.
TEST(SpatialAttention, GateBeforeUpdateReplay) {
    const auto p = random_spatial(4, 3, 5, 7);
    const auto frames = random_frames(12, 6, 8);
    Graph g;
    const auto vars = bind(g, p, false);
    std::vector<Var> xs;
    for (const auto& f : frames) xs.push_back(g.input(f));
    const auto alphas = spatial_attention(vars, xs);

    Graph r;
    const auto rv = bind(r, p, false);
    std::vector<Var> rxs;
    for (const auto& f : frames) rxs.push_back(r.input(f));
    const auto states = lstm_layer(rv.lstm, rxs, zero_state(r, 3));
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Var h_prev = t == 0 ? zero_state(r, 3).h : states[t - 1].h;
        const Tensor expect = joint_gate(spatial_scores(rv, rxs[t], h_prev)).value();
        EXPECT_TRUE(alphas[t].value().identical(expect)) << "frame " << t;
    }
}

TEST(TemporalAttention, GateBeforeUpdateReplay) {
    const auto p = random_temporal(12, 3, 9);
    const auto frames = random_frames(12, 6, 10);
    Graph g;
    std::vector<Var> xs;
    for (const auto& f : frames) xs.push_back(g.input(f));
    const auto betas = temporal_attention(bind(g, p, false), xs);

    Graph r;
    const auto rv = bind(r, p, false);
    std::vector<Var> rxs;
    for (const auto& f : frames) rxs.push_back(r.input(f));
    const auto states = lstm_layer(rv.lstm, rxs, zero_state(r, 3));
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const Var h_prev = t == 0 ? zero_state(r, 3).h : states[t - 1].h;
        EXPECT_EQ(betas[t].item(), frame_gate(rv, rxs[t], h_prev).item()) << "frame " << t;
    }
}

TEST(SpatialAttention, GradientReachesScoreWeights) {
    auto p = random_spatial(3, 3, 4, 11);
    const auto frames = random_frames(9, 4, 12);
    const Tensor target = Tensor::vector({0.1, -0.3, 0.7, 0.2, 0.5, -0.9, 0.4, 0.0, 0.6});
    auto loss = [&](Graph& g, const SpatialAttnVars& v) {
        std::vector<Var> xs;
        for (const auto& f : frames) xs.push_back(g.input(f));
        const auto alphas = spatial_attention(v, xs);
        std::vector<Var> parts;
        for (std::size_t t = 0; t < xs.size(); ++t) parts.push_back(ad::dot(modulate(xs[t], alphas[t]), g.input(target)));
        return ad::add_n(parts);
    };
    Graph g;
    const auto vars = bind(g, p, true);
    g.backward(loss(g, vars));
    for (const Var& v : {vars.u, vars.w_x, vars.w_h}) {
        double norm = 0.0;
        for (double x : v.grad().values()) norm += x * x;
        EXPECT_GT(norm, 0.0);
    }
    std::vector<Tensor*> ptrs{&p.u, &p.w_x, &p.w_h, &p.b, &p.b_u};
    std::vector<Tensor> analytic{vars.u.grad(), vars.w_x.grad(), vars.w_h.grad(), vars.b.grad(), vars.b_u.grad()};
    const auto r = compare_finite_differences(ptrs, analytic, [&] {
        Graph gg;
        return loss(gg, bind(gg, p, false)).item();
    }, 1e-6);
    EXPECT_LT(r.max_rel_error, 1e-5);
}

TEST(TemporalAttention, GradientReachesGateWeights) {
    auto p = random_temporal(6, 3, 13);
    const auto frames = random_frames(6, 4, 14);
    auto loss = [&](Graph& g, const TemporalAttnVars& v) {
        std::vector<Var> xs;
        for (const auto& f : frames) xs.push_back(g.input(f));
        const auto betas = temporal_attention(v, xs);
        std::vector<Var> parts;
        for (std::size_t t = 0; t < betas.size(); ++t) parts.push_back(ad::scale(betas[t], 1.0 + static_cast<double>(t)));
        return ad::add_n(parts);
    };
    Graph g;
    const auto vars = bind(g, p, true);
    g.backward(loss(g, vars));
    std::vector<double> betas;
    for (double x : vars.w_x.grad().values()) betas.push_back(x);
    double norm = 0.0;
    for (double x : betas) norm += x * x;
    EXPECT_GT(norm, 0.0);
    std::vector<Tensor*> ptrs{&p.w_x, &p.w_h, &p.b};
    std::vector<Tensor> analytic{vars.w_x.grad(), vars.w_h.grad(), vars.b.grad()};
    const auto r = compare_finite_differences(ptrs, analytic, [&] {
        Graph gg;
        return loss(gg, bind(gg, p, false)).item();
    }, 1e-6);
    EXPECT_LT(r.max_rel_error, 1e-5);
}

}  // namespace
}  // namespace sta
