#include "selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "agent.hpp"
#include "autodiff.hpp"
#include "error.hpp"
#include "gradcheck.hpp"
#include "maze.hpp"
#include "metrics.hpp"
#include "oracles.hpp"
#include "raycast.hpp"
#include "rng.hpp"
#include "trainer.hpp"
#include "world.hpp"

namespace navbench {

namespace {

using Clock = std::chrono::steady_clock;

CheckResult timed(std::string name, const std::function<void(CheckResult&)>& body) {
    CheckResult r;
    r.name = std::move(name);
    const auto t0 = Clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return r;
}

std::string fmt(double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

} // namespace

CheckResult check_maze_lattice(int seeds, int cols, int rows) {
    return timed("maze-lattice", [&](CheckResult& r) {
        int bad = 0;
        const int cells = cols * rows;
        for (int s = 0; s < seeds; ++s) {
            const Maze m = generate_maze(static_cast<std::uint64_t>(s), cols, rows);
            const auto a = oracle::audit_lattice(m);
            if (a.components != 1 || a.edges != cells - 1 || a.cycle || !is_connected(m) || !is_perfect(m)) ++bad;
        }
        r.passed = bad == 0;
        r.detail = std::to_string(seeds) + " mazes at " + std::to_string(cols) + "x" + std::to_string(rows) +
                   " cells, " + std::to_string(bad) + " failures";
    });
}

CheckResult check_shortest_paths(int mazes, std::uint64_t seed) {
    return timed("bfs-vs-floyd-warshall", [&](CheckResult& r) {
        Rng rng(seed);
        long long pairs = 0, mismatches = 0;
        for (int i = 0; i < mazes; ++i) {
            const int cols = 1 + static_cast<int>(rng.uniform_index(4));
            const int rows = 1 + static_cast<int>(rng.uniform_index(4));
            const Maze m = generate_maze(rng.next_u64(), cols, rows);
            const auto fw = oracle::floyd_warshall(m);
            const auto floors = m.floor_blocks();
            for (std::size_t a = 0; a < floors.size(); ++a) {
                const auto field = bfs_distance_field(m, floors[a]);
                for (std::size_t b = 0; b < floors.size(); ++b) {
                    ++pairs;
                    if (field[m.index(floors[b].x, floors[b].y)] != fw[a][b]) ++mismatches;
                }
            }
        }
        r.passed = mismatches == 0;
        r.detail = std::to_string(mazes) + " mazes, " + std::to_string(pairs) + " pairs, " +
                   std::to_string(mismatches) + " mismatches";
    });
}

namespace {

// Walks halfway to the goal, back to the spawn centre, then to the goal.
class DoublerPilot {
public:
    DoublerPilot(const Maze& maze, BlockCoord goal, BlockCoord spawn, const EnvConfig& cfg)
        : to_goal_(maze, goal, cfg.block_size(), cfg.turn_speed, cfg.forward_speed),
          to_spawn_(maze, spawn, cfg.block_size(), cfg.turn_speed, cfg.forward_speed), spawn_(spawn),
          block_(cfg.block_size()), speed_(cfg.forward_speed) {
        const int hops = bfs_distance_field(maze, spawn)[maze.index(goal.x, goal.y)];
        half_ = 0.5 * std::max(0.0, hops * block_ - cfg.goal_epsilon);
    }

    Action next(const Pose& p) {
        if (last_) {
            const double d = distance(last_->x, last_->y, p.x, p.y);
            if (d > 2.0 * speed_) {
                phase_ = 0;
                travelled_ = 0.0;
            } else {
                travelled_ += d;
            }
        }
        last_ = p;
        if (phase_ == 0 && travelled_ >= half_) phase_ = 1;
        if (phase_ == 1) {
            const auto c = block_center(spawn_, block_);
            if (distance(p.x, p.y, c[0], c[1]) < 0.5 * speed_) phase_ = 2;
        }
        return phase_ == 1 ? to_spawn_.next(p) : to_goal_.next(p);
    }

private:
    oracle::GeodesicPilot to_goal_;
    oracle::GeodesicPilot to_spawn_;
    BlockCoord spawn_;
    double block_;
    double speed_;
    double half_ = 0.0;
    double travelled_ = 0.0;
    int phase_ = 0;
    std::optional<Pose> last_;
};

} // namespace

MetricWalk scripted_walk(bool doubler) {
    // First 4x4-cell maze whose static spawn is at least 8 hops from the goal.
    const EnvConfig cfg;
    for (std::uint64_t seed = 0;; ++seed) {
        const Maze m = generate_maze(seed, 4, 4);
        const MapAnnotations ann = annotate(m, {}, 0, 0);
        const int hops = bfs_distance_field(m, *ann.spawn)[m.index(ann.goal.x, ann.goal.y)];
        if (hops < 8) continue;
        Environment env(m, ann, cfg, 1);
        EpisodeLog log;
        log.header = make_header(env, "scripted", 1, 0);
        oracle::GeodesicPilot pilot(m, ann.goal, cfg.block_size(), cfg.turn_speed, cfg.forward_speed);
        DoublerPilot dbl(m, ann.goal, *ann.spawn, cfg);
        while (!env.done()) {
            const Action a = doubler ? dbl.next(env.pose()) : pilot.next(env.pose());
            const StepResult s = env.step(a);
            log.records.push_back({env.t(), s.pose, a, s.reward, s.terms, s.event});
        }
        const GoalHitTimes hits = extract_goal_hits(log);
        MetricWalk w;
        w.goal_hits = static_cast<int>(hits.count());
        w.ratio = distance_inefficiency(log, hits, m, PathMode::Bfs).value_or(std::nan(""));
        w.min_hops = hops;
        return w;
    }
}

CheckResult check_metric_fidelity(double tolerance) {
    return timed("metric-fidelity", [&](CheckResult& r) {
        std::ostringstream d;
        bool ok = true;
        auto lat = [](std::vector<int> tau) {
            GoalHitTimes h;
            h.tau = std::move(tau);
            h.episode_len = 1200;
            return latency_ratio(h).value_or(std::nan(""));
        };
        const double l1 = lat({100, 150}), l2 = lat({300, 600, 900});
        ok = ok && std::abs(l1 - 2.0) < 1e-12 && std::abs(l2 - 1.0) < 1e-12;
        d << "latency [100,150]=" << l1 << " [300,600,900]=" << l2;
        const MetricWalk g = scripted_walk(false);
        const MetricWalk x2 = scripted_walk(true);
        ok = ok && g.goal_hits >= 2 && std::abs(g.ratio - 1.0) <= tolerance * 1.0;
        ok = ok && x2.goal_hits >= 2 && std::abs(x2.ratio - 2.0) <= tolerance * 2.0;
        d << "; geodesic dist-ineff=" << fmt(g.ratio) << " (" << g.goal_hits << " hits); doubler dist-ineff="
          << fmt(x2.ratio) << " (" << x2.goal_hits << " hits)";
        r.passed = ok;
        r.detail = d.str();
    });
}

namespace {

Tensor positive_tensor(const Shape& s, std::uint64_t seed) {
    Tensor t = random_tensor(s, seed, 0.5);
    for (double& v : t.data()) v += 1.0;
    return t;
}

Var weighted(Var y, std::uint64_t seed) {
    return sum(mul(y, y.tape().constant(random_tensor(y.value().shape(), seed ^ 0x5a5a5a))));
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.uniform_index(hi - lo + 1); }

AgentConfig tiny_agent() {
    AgentConfig a;
    a.width = 12;
    a.height = 12;
    a.conv1_filters = 2;
    a.conv1_kernel = 4;
    a.conv1_stride = 2;
    a.conv2_filters = 2;
    a.conv2_kernel = 3;
    a.conv2_stride = 1;
    a.lstm1_size = 4;
    a.lstm2_size = 3;
    return a;
}

// Analytic gradient of the rollout loss against central differences of an
// untaped evaluation with the advantages frozen at their unperturbed values.
double combined_loss_error(std::uint64_t seed, int samples) {
    const AgentConfig agent = tiny_agent();
    TrainConfig cfg;
    cfg.beta_entropy = 0.05;
    ParameterSet params = init_params(seed, agent);
    Rng rng(derive_seed(seed, 0x6c6f7373));
    // Zero biases put relu inputs exactly on the kink wherever a patch is
    // dead; check at a generic point instead.
    for (std::size_t i = 0; i < params.size(); ++i)
        if (params.name(i).ends_with(".b"))
            for (double& v : params[i].data()) v += (rng.uniform01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 0.15);

    EnvConfig ec;
    ec.render.width = agent.width;
    ec.render.height = agent.height;
    const Maze m = generate_maze(seed, 3, 3);
    Environment env(m, annotate(m, {}, 2, seed), ec, seed);
    const int steps = 3;
    std::vector<Observation> obs;
    std::vector<int> actions;
    std::vector<double> returns;
    std::vector<std::vector<int>> depth;
    std::vector<int> loop;
    for (int i = 0; i < steps; ++i) {
        obs.push_back(env.observe());
        const int a = static_cast<int>(rng.uniform_index(kActionCount));
        env.step(static_cast<Action>(a));
        actions.push_back(a);
        returns.push_back(rng.uniform(-1.0, 1.0));
        std::vector<int> dt;
        for (int g = 0; g < agent.depth_groups; ++g) dt.push_back(static_cast<int>(rng.uniform_index(agent.depth_classes)));
        depth.push_back(dt);
        loop.push_back(static_cast<int>(rng.uniform_index(2)));
    }

    Tape tape;
    const BoundParams bp = bind_params(tape, params, true);
    TapedState st = bind_state(tape, RecurrentState::zeros(agent));
    std::vector<StepRecord> recs;
    std::vector<double> adv;
    for (int i = 0; i < steps; ++i) {
        StepRecord s;
        s.out = forward(agent, bp, bind_observation(tape, obs[static_cast<std::size_t>(i)]), st);
        s.action = actions[static_cast<std::size_t>(i)];
        s.depth_targets = depth[static_cast<std::size_t>(i)];
        s.loop_label = loop[static_cast<std::size_t>(i)];
        adv.push_back(returns[static_cast<std::size_t>(i)] - s.out.value.value()[0]);
        recs.push_back(std::move(s));
    }
    tape.backward(assemble_loss(recs, returns, cfg, agent).total);

    const int K = agent.depth_classes;
    auto reference = [&](const ParameterSet& p) {
        RecurrentState rs = RecurrentState::zeros(agent);
        double total = 0.0;
        auto ce = [&](const std::vector<double>& logits, const std::vector<int>& tgt) {
            double s = 0.0;
            for (std::size_t g = 0; g < tgt.size(); ++g) {
                double mx = -1e300, z = 0.0;
                for (int k = 0; k < K; ++k) mx = std::max(mx, logits[g * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)]);
                for (int k = 0; k < K; ++k) z += std::exp(logits[g * static_cast<std::size_t>(K) + static_cast<std::size_t>(k)] - mx);
                s -= logits[g * static_cast<std::size_t>(K) + static_cast<std::size_t>(tgt[g])] - mx - std::log(z);
            }
            return s / static_cast<double>(tgt.size());
        };
        for (std::size_t i = 0; i < obs.size(); ++i) {
            auto [o, next] = forward_values(agent, p, obs[i], rs);
            rs = next;
            total -= adv[i] * std::log(o.probs[static_cast<std::size_t>(actions[i])]);
            total += cfg.beta_value * (returns[i] - o.value) * (returns[i] - o.value);
            double negent = 0.0;
            for (double q : o.probs) negent += q * std::log(q);
            total += cfg.beta_entropy * negent;
            total += cfg.beta_depth1 * ce(o.depth1, depth[i]) + cfg.beta_depth2 * ce(o.depth2, depth[i]);
            const double q = 1.0 / (1.0 + std::exp(-o.loop_logit));
            total -= cfg.beta_loop * std::log(loop[i] ? q : 1.0 - q);
        }
        return total;
    };
    double worst = 0.0;
    const double h = 1e-5;
    // Every tensor gets at least one sample, the rest are random.
    for (int k = 0; k < samples; ++k) {
        const std::size_t pi = k < static_cast<int>(params.size()) ? static_cast<std::size_t>(k) : rng.uniform_index(params.size());
        const std::size_t e = rng.uniform_index(params[pi].size());
        ParameterSet plus = params, minus = params;
        plus[pi].data()[e] += h;
        minus[pi].data()[e] -= h;
        const double num = (reference(plus) - reference(minus)) / (2.0 * h);
        const double ana = bp[pi].grad()[e];
        worst = std::max(worst, std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), 1e-6}));
    }
    return worst;
}

} // namespace

CheckResult check_gradients(int seeds, double tolerance) {
    return timed("gradient-checks", [&](CheckResult& r) {
        using Builder = std::function<double(std::uint64_t)>;
        std::vector<std::pair<std::string, Builder>> ops;
        auto unary = [&](const char* name, std::function<Var(Var)> f, bool positive, double margin) {
            ops.emplace_back(name, [f, positive, margin](std::uint64_t s) {
                Rng rng(s);
                const Shape sh{pick(rng, 1, 4), pick(rng, 1, 5)};
                const Tensor in = positive ? positive_tensor(sh, s) : random_tensor(sh, s, 1.0, margin);
                return gradcheck({in}, [&](Tape&, std::span<const Var> v) { return weighted(f(v[0]), s); }).max_rel_error;
            });
        };
        unary("relu", [](Var x) { return relu(x); }, false, 0.05);
        unary("tanh", [](Var x) { return tanh(x); }, false, 0.0);
        unary("sigmoid", [](Var x) { return sigmoid(x); }, false, 0.0);
        unary("softmax", [](Var x) { return softmax(x); }, false, 0.0);
        unary("log", [](Var x) { return log(x); }, true, 0.0);
        unary("scale", [](Var x) { return scale(x, -1.7); }, false, 0.0);
        unary("sum", [](Var x) { return sum(x); }, false, 0.0);
        unary("mean", [](Var x) { return mean(x); }, false, 0.0);
        unary("reshape", [](Var x) { return reshape(x, {x.value().size()}); }, false, 0.0);
        unary("slice", [](Var x) { return slice(x, 0, (x.value().shape().back() + 1) / 2); }, false, 0.0);
        auto binary = [&](const char* name, std::function<Var(Var, Var)> f) {
            ops.emplace_back(name, [f](std::uint64_t s) {
                Rng rng(s);
                const Shape sh{pick(rng, 1, 4), pick(rng, 1, 5)};
                return gradcheck({random_tensor(sh, s), random_tensor(sh, s + 1)},
                                 [&](Tape&, std::span<const Var> v) { return weighted(f(v[0], v[1]), s); })
                    .max_rel_error;
            });
        };
        binary("add", [](Var a, Var b) { return add(a, b); });
        binary("sub", [](Var a, Var b) { return sub(a, b); });
        binary("mul", [](Var a, Var b) { return mul(a, b); });
        ops.emplace_back("matmul", [](std::uint64_t s) {
            Rng rng(s);
            const std::size_t m = pick(rng, 1, 4), k = pick(rng, 1, 5), n = pick(rng, 1, 4);
            return gradcheck({random_tensor({m, k}, s), random_tensor({k, n}, s + 1)},
                             [&](Tape&, std::span<const Var> v) { return weighted(matmul(v[0], v[1]), s); })
                .max_rel_error;
        });
        ops.emplace_back("bias_add", [](std::uint64_t s) {
            Rng rng(s);
            const std::size_t m = pick(rng, 1, 4), n = pick(rng, 1, 5);
            return gradcheck({random_tensor({m, n}, s), random_tensor({n}, s + 1)},
                             [&](Tape&, std::span<const Var> v) { return weighted(bias_add(v[0], v[1]), s); })
                .max_rel_error;
        });
        ops.emplace_back("concat", [](std::uint64_t s) {
            Rng rng(s);
            const std::size_t m = pick(rng, 1, 3);
            return gradcheck({random_tensor({m, pick(rng, 1, 4)}, s), random_tensor({m, pick(rng, 1, 4)}, s + 1)},
                             [&](Tape&, std::span<const Var> v) { return weighted(concat({v[0], v[1]}), s); })
                .max_rel_error;
        });
        ops.emplace_back("conv2d", [](std::uint64_t s) {
            Rng rng(s);
            const std::size_t c = pick(rng, 1, 3), f = pick(rng, 1, 3), k = pick(rng, 1, 3);
            const int stride = static_cast<int>(pick(rng, 1, 2));
            const std::size_t hgt = k + pick(rng, 0, 4), wid = k + pick(rng, 0, 4);
            return gradcheck({random_tensor({c, hgt, wid}, s), random_tensor({f, c, k, k}, s + 1), random_tensor({f}, s + 2)},
                             [&](Tape&, std::span<const Var> v) { return weighted(conv2d(v[0], v[1], v[2], stride), s); })
                .max_rel_error;
        });
        ops.emplace_back("lstm_cell", [](std::uint64_t s) {
            Rng rng(s);
            const std::size_t in = pick(rng, 1, 4), hid = pick(rng, 1, 4);
            return gradcheck({random_tensor({1, in}, s), random_tensor({1, hid}, s + 1), random_tensor({1, hid}, s + 2),
                              random_tensor({in + hid, 4 * hid}, s + 3), random_tensor({4 * hid}, s + 4)},
                             [&](Tape&, std::span<const Var> v) {
                                 LstmState st{v[1], v[2]};
                                 // Two steps so the recurrent path is exercised.
                                 st = lstm_cell(v[0], st, {v[3], v[4]});
                                 st = lstm_cell(v[0], st, {v[3], v[4]});
                                 return add(weighted(st.h, s), weighted(st.c, s + 9));
                             })
                .max_rel_error;
        });
        ops.emplace_back("policy_gradient_term", [](std::uint64_t s) {
            Rng rng(s);
            const int a = static_cast<int>(rng.uniform_index(4));
            const double adv = rng.uniform(-2.0, 2.0);
            return gradcheck({random_tensor({1, 4}, s)},
                             [&](Tape&, std::span<const Var> v) { return policy_gradient_term(log(softmax(v[0])), a, adv); })
                .max_rel_error;
        });
        ops.emplace_back("value_mse", [](std::uint64_t s) {
            Rng rng(s);
            const double target = rng.uniform(-2.0, 2.0);
            return gradcheck({random_tensor({1, 1}, s)},
                             [&](Tape&, std::span<const Var> v) { return value_mse(v[0], target); })
                .max_rel_error;
        });
        ops.emplace_back("entropy_bonus", [](std::uint64_t s) {
            return gradcheck({random_tensor({1, 4}, s)},
                             [&](Tape&, std::span<const Var> v) {
                                 const Var p = softmax(v[0]);
                                 return entropy_bonus(p, log(p));
                             })
                .max_rel_error;
        });
        ops.emplace_back("depth_ce", [](std::uint64_t s) {
            Rng rng(s);
            std::vector<int> tgt;
            for (int g = 0; g < 4; ++g) tgt.push_back(static_cast<int>(rng.uniform_index(8)));
            return gradcheck({random_tensor({1, 32}, s)},
                             [&](Tape&, std::span<const Var> v) { return depth_ce(v[0], tgt, 8); })
                .max_rel_error;
        });
        ops.emplace_back("loop_ce", [](std::uint64_t s) {
            const int label = static_cast<int>(s % 2);
            return gradcheck({random_tensor({1, 1}, s)},
                             [&](Tape&, std::span<const Var> v) { return loop_ce(v[0], label); })
                .max_rel_error;
        });
        ops.emplace_back("combined_loss", [](std::uint64_t s) { return combined_loss_error(s, 40); });

        std::ostringstream d;
        bool ok = true;
        for (const auto& [name, f] : ops) {
            double worst = 0.0;
            for (int k = 0; k < seeds; ++k) worst = std::max(worst, f(derive_seed(0x67726164, static_cast<std::uint64_t>(k))));
            if (!(worst < tolerance)) {
                ok = false;
                d << name << " FAILED max_rel=" << fmt(worst) << "; ";
            }
        }
        r.passed = ok;
        d << ops.size() << " ops x " << seeds << " seeds" << (ok ? ", all below " + fmt(tolerance) : "");
        r.detail = d.str();
    });
}

CheckResult check_raycaster(int poses, double tolerance, std::uint64_t seed) {
    return timed("raycaster-vs-march", [&](CheckResult& r) {
        Rng rng(seed);
        const RenderConfig rc;
        double worst = 0.0;
        int columns = 0;
        for (int i = 0; i < poses; ++i) {
            const Maze m = generate_maze(rng.next_u64(), 1 + static_cast<int>(rng.uniform_index(4)),
                                         1 + static_cast<int>(rng.uniform_index(4)));
            const auto floors = m.floor_blocks();
            const BlockCoord b = floors[rng.uniform_index(floors.size())];
            Pose p{(b.x + rng.uniform(0.05, 0.95)) * rc.block_size, (b.y + rng.uniform(0.05, 0.95)) * rc.block_size,
                   rng.uniform(0.0, kTwoPi)};
            const DepthBuckets buckets = DepthBuckets::for_maze(m, rc.block_size, 16.0);
            const DepthVector dv = depth_truth(m, p, rc.width, rc.fov, rc.block_size, buckets);
            for (int c = 0; c < rc.width; ++c) {
                const auto [dx, dy] = column_ray(p, c, rc.width, rc.fov);
                const double ref = oracle::march_depth(m, rc.block_size, p.x, p.y, dx, dy);
                worst = std::max(worst, std::abs(ref - dv.depths[static_cast<std::size_t>(c)]));
                ++columns;
            }
        }
        r.passed = worst < tolerance;
        r.detail = std::to_string(poses) + " poses, " + std::to_string(columns) + " columns, max abs error " + fmt(worst);
    });
}

std::vector<CheckResult> run_selftest(bool quick) {
    return {check_maze_lattice(quick ? 200 : 1000), check_shortest_paths(quick ? 10 : 50), check_metric_fidelity(),
            check_gradients(quick ? 5 : 20), check_raycaster(quick ? 100 : 1000)};
}

} // namespace navbench
