#include "trainer.hpp"

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <thread>
#include <variant>

#include "error.hpp"

namespace navbench {

void TrainConfig::validate() const {
    if (workers < 1) fail(ErrorKind::InvalidArgument, "workers must be >= 1");
    if (t_max < 1) fail(ErrorKind::InvalidArgument, "t_max must be >= 1");
    if (!(gamma > 0.0 && gamma <= 1.0)) fail(ErrorKind::InvalidArgument, "gamma must lie in (0, 1]");
    if (!(learning_rate > 0.0)) fail(ErrorKind::InvalidArgument, "learning rate must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        fail(ErrorKind::InvalidArgument, "Adam betas must lie in [0, 1)");
    if (!(adam_epsilon > 0.0)) fail(ErrorKind::InvalidArgument, "Adam epsilon must be positive");
    for (double b : {beta_value, beta_entropy, beta_depth1, beta_depth2, beta_loop})
        if (!(b >= 0.0) || !std::isfinite(b)) fail(ErrorKind::InvalidArgument, "loss weights must be finite and >= 0");
    if (!(clip_norm > 0.0)) fail(ErrorKind::InvalidArgument, "clip norm must be positive");
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma, double bootstrap) {
    std::vector<double> out(rewards.size());
    double r = bootstrap;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        r = rewards[i] + gamma * r;
        out[i] = r;
    }
    return out;
}

LossTerms assemble_loss(const std::vector<StepRecord>& steps, std::span<const double> returns,
                        const TrainConfig& cfg, const AgentConfig& agent) {
    if (steps.empty()) fail(ErrorKind::InvalidArgument, "assemble_loss: empty rollout");
    if (returns.size() != steps.size()) fail(ErrorKind::InvalidArgument, "assemble_loss: one return per step required");
    Tape& tape = steps.front().out.value.tape();
    LossTerms lt;
    std::vector<Var> terms;
    auto push = [&](Var v, double weight, double& acc) {
        acc += v.value()[0];
        terms.push_back(weight == 1.0 ? v : scale(v, weight));
    };
    const auto classes = static_cast<std::size_t>(agent.depth_classes);
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const StepRecord& s = steps[i];
        const double v = s.out.value.value()[0];
        push(policy_gradient_term(s.out.log_probs, s.action, returns[i] - v), 1.0, lt.values.policy);
        if (cfg.beta_value > 0.0) push(value_mse(s.out.value, returns[i]), cfg.beta_value, lt.values.value);
        if (cfg.beta_entropy > 0.0)
            push(entropy_bonus(s.out.probs, s.out.log_probs), cfg.beta_entropy, lt.values.entropy);
        if (cfg.beta_depth1 > 0.0) push(depth_ce(s.out.depth1, s.depth_targets, classes), cfg.beta_depth1, lt.values.depth1);
        if (cfg.beta_depth2 > 0.0) push(depth_ce(s.out.depth2, s.depth_targets, classes), cfg.beta_depth2, lt.values.depth2);
        if (cfg.beta_loop > 0.0) push(loop_ce(s.out.loop, s.loop_label), cfg.beta_loop, lt.values.loop);
    }
    Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
    (void)tape;
    lt.total = total;
    lt.values.total = total.value()[0];
    return lt;
}

double global_norm(const Gradients& grads) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g.data()) sq += v * v;
    return std::sqrt(sq);
}

double clip_by_global_norm(Gradients& grads, double max_norm) {
    const double norm = global_norm(grads);
    if (norm > max_norm) {
        const double s = max_norm / norm;
        for (auto& g : grads)
            for (double& v : g.data()) v *= s;
    }
    return norm;
}

bool all_finite(const Gradients& grads) {
    for (const auto& g : grads)
        if (!g.all_finite()) return false;
    return true;
}

OptimizerState OptimizerState::zeros(const ParameterSet& params) {
    OptimizerState s;
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m.emplace_back(params[i].shape(), 0.0);
        s.v.emplace_back(params[i].shape(), 0.0);
    }
    return s;
}

void optimizer_apply(ParameterSet& params, OptimizerState& st, const Gradients& grads, const TrainConfig& cfg) {
    if (grads.size() != params.size()) fail(ErrorKind::InvalidArgument, "gradient count does not match parameters");
    for (std::size_t i = 0; i < params.size(); ++i)
        if (grads[i].shape() != params[i].shape())
            fail(ErrorKind::InvalidArgument, "gradient for '" + params.name(i) + "' has shape " +
                                                 shape_string(grads[i].shape()) + ", expected " +
                                                 shape_string(params[i].shape()));
    ++st.updates;
    if (cfg.optimizer == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto p = params[i].data();
            const auto g = grads[i].data();
            for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.learning_rate * g[k];
        }
        return;
    }
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double t = static_cast<double>(st.updates);
    const double c1 = 1.0 - std::pow(b1, t), c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].data();
        auto m = st.m[i].data();
        auto v = st.v[i].data();
        const auto g = grads[i].data();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            p[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_epsilon);
        }
    }
}

SharedStore::SharedStore(ParameterSet params, TrainConfig config)
    : params_(std::move(params)), optimizer_(OptimizerState::zeros(params_)), config_(config) {}

ParameterSet SharedStore::snapshot() const {
    std::lock_guard lock(mutex_);
    return params_;
}

SharedStore::Applied SharedStore::apply(const Gradients& grads, int steps) {
    std::lock_guard lock(mutex_);
    optimizer_apply(params_, optimizer_, grads, config_);
    const std::uint64_t before = step_;
    step_ += static_cast<std::uint64_t>(steps);
    Applied a;
    a.global_step = step_;
    const auto every = config_.checkpoint_every;
    if (every > 0 && before / every != step_ / every) a.checkpoint = params_;
    return a;
}

std::uint64_t SharedStore::global_step() const {
    std::lock_guard lock(mutex_);
    return step_;
}

std::uint64_t SharedStore::updates() const {
    std::lock_guard lock(mutex_);
    return optimizer_.updates;
}

namespace {
constexpr std::uint64_t kWorkerStream = 0x776f726b; // "work"
}

RolloutWorker::RolloutWorker(AgentConfig agent, TrainConfig config, EpisodeFactory factory, int worker_id)
    : agent_(agent), config_(config), factory_(std::move(factory)), worker_id_(worker_id),
      rng_(derive_seed(config.seed, kWorkerStream, static_cast<std::uint64_t>(worker_id))),
      state_(RecurrentState::zeros(agent)) {}

void RolloutWorker::start_episode() {
    EpisodeSpec spec = factory_(worker_id_, episode_index_++);
    if (spec.env.render.width != agent_.width || spec.env.render.height != agent_.height)
        fail(ErrorKind::Mismatch, "environment renders " + std::to_string(spec.env.render.width) + "x" +
                                      std::to_string(spec.env.render.height) + " but the agent expects " +
                                      std::to_string(agent_.width) + "x" + std::to_string(agent_.height));
    buckets_.emplace(DepthBuckets::for_maze(spec.maze, spec.env.block_size(), spec.env.agent_radius,
                                            agent_.depth_classes));
    map_id_ = spec.map_id;
    env_.emplace(std::move(spec.maze), std::move(spec.annotations), spec.env, spec.episode_seed);
    loop_.clear();
    state_ = RecurrentState::zeros(agent_);
    episode_reward_ = 0.0;
    episode_hits_ = 0;
}

void RolloutWorker::reset_episode() { env_.reset(); }

RolloutResult RolloutWorker::run(const ParameterSet& params) {
    if (!env_) start_episode();
    RolloutResult res;
    try {
        Tape tape;
        const BoundParams bp = bind_params(tape, params, true);
        TapedState st = bind_state(tape, state_);
        std::vector<StepRecord> steps;
        steps.reserve(static_cast<std::size_t>(config_.t_max));
        const bool want_depth = config_.beta_depth1 > 0.0 || config_.beta_depth2 > 0.0;
        const auto& env_cfg = env_->config();
        for (int k = 0; k < config_.t_max && !env_->done(); ++k) {
            const Observation obs = env_->observe();
            const Pose pose = env_->pose();
            StepRecord rec;
            if (want_depth) {
                const DepthVector dv =
                    depth_truth(env_->maze(), pose, agent_.width, env_cfg.render.fov, env_cfg.block_size(), *buckets_);
                rec.depth_targets = grouped_depth_classes(dv, agent_.depth_groups, *buckets_);
            }
            rec.loop_label = loop_.push({pose.x, pose.y});
            rec.out = forward(agent_, bp, bind_observation(tape, obs), st);
            const Action a = sample_action(rec.out.probs.value().data(), rng_, config_.action_mode);
            const StepResult sr = env_->step(a);
            rec.action = static_cast<int>(a);
            rec.reward = sr.reward;
            episode_reward_ += sr.reward;
            if (sr.event == Event::GoalHit) ++episode_hits_;
            steps.push_back(std::move(rec));
        }
        state_ = read_state(st);
        double bootstrap = 0.0;
        if (!env_->done()) {
            TapedState probe = st;
            bootstrap = forward(agent_, bp, bind_observation(tape, env_->observe()), probe).value.value()[0];
        }
        std::vector<double> rewards;
        for (const auto& s : steps) rewards.push_back(s.reward);
        const auto returns = discounted_returns(rewards, config_.gamma, bootstrap);
        const LossTerms loss = assemble_loss(steps, returns, config_, agent_);
        tape.backward(loss.total);
        res.grads.reserve(bp.vars.size());
        for (const Var& v : bp.vars) res.grads.push_back(v.grad());
        res.steps = static_cast<int>(steps.size());
        res.loss = loss.values;
        if (!all_finite(res.grads)) {
            res.ok = false;
            res.error = "non-finite gradient";
        } else {
            res.grad_norm = clip_by_global_norm(res.grads, config_.clip_norm);
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric) throw;
        res.ok = false;
        res.error = e.what();
    }
    if (!res.ok) {
        res.grads.clear();
        env_.reset();
        return res;
    }
    if (env_->done()) {
        res.finished = RolloutResult::Finished{map_id_, episode_reward_, episode_hits_};
        env_.reset();
    }
    return res;
}

namespace {

struct CheckpointMsg {
    std::uint64_t step;
    ParameterSet params;
};
struct WorkerExit {
    int worker;
    std::string error; // empty on normal exit
};
using Message = std::variant<TrainProgress, CheckpointMsg, WorkerExit>;

class Channel {
public:
    void send(Message m) {
        {
            std::lock_guard lock(mutex_);
            queue_.push_back(std::move(m));
        }
        cv_.notify_one();
    }
    Message receive() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return !queue_.empty(); });
        Message m = std::move(queue_.front());
        queue_.pop_front();
        return m;
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Message> queue_;
};

} // namespace

TrainResult train(const AgentConfig& agent, const TrainConfig& config, ParameterSet initial,
                  const EpisodeFactory& factory, const TrainCallbacks& callbacks) {
    agent.validate();
    config.validate();
    if (!initial.same_layout(zero_params(agent)))
        fail(ErrorKind::Mismatch, "initial parameters do not match the agent configuration");
    SharedStore store(std::move(initial), config);
    Channel channel;
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    std::vector<std::thread> threads;
    for (int w = 0; w < config.workers; ++w) {
        threads.emplace_back([&, w] {
            std::string error;
            try {
                RolloutWorker worker(agent, config, factory, w);
                while (store.global_step() < config.max_steps) {
                    const ParameterSet local = store.snapshot();
                    RolloutResult r = worker.run(local);
                    TrainProgress p;
                    p.worker = w;
                    p.loss = r.loss;
                    if (!r.ok) {
                        p.aborted = true;
                        p.message = r.error;
                        p.global_step = store.global_step();
                        p.wall_time_s = elapsed();
                        channel.send(std::move(p));
                        continue;
                    }
                    auto applied = store.apply(r.grads, r.steps);
                    p.global_step = applied.global_step;
                    p.grad_norm = r.grad_norm;
                    if (r.finished) {
                        p.has_episode = true;
                        p.episode = *r.finished;
                    }
                    p.wall_time_s = elapsed();
                    channel.send(std::move(p));
                    if (applied.checkpoint) channel.send(CheckpointMsg{applied.global_step, std::move(*applied.checkpoint)});
                }
            } catch (const std::exception& e) {
                error = "worker " + std::to_string(w) + ": " + e.what();
            }
            channel.send(WorkerExit{w, std::move(error)});
        });
    }

    TrainResult result;
    int running = config.workers;
    std::exception_ptr callback_error;
    while (running > 0) {
        Message m = channel.receive();
        try {
            if (auto* p = std::get_if<TrainProgress>(&m)) {
                if (callbacks.on_progress && !callback_error) callbacks.on_progress(*p);
            } else if (auto* c = std::get_if<CheckpointMsg>(&m)) {
                if (callbacks.on_checkpoint && !callback_error) callbacks.on_checkpoint(c->step, c->params);
            } else if (auto* x = std::get_if<WorkerExit>(&m)) {
                --running;
                if (!x->error.empty()) {
                    ++result.failed_workers;
                    result.worker_errors.push_back(x->error);
                }
            }
        } catch (...) {
            // Keep draining so the workers can finish; rethrow afterwards.
            if (!callback_error) callback_error = std::current_exception();
        }
    }
    for (auto& t : threads) t.join();
    if (callback_error) std::rethrow_exception(callback_error);
    if (result.failed_workers == config.workers)
        fail(ErrorKind::Runtime, "all training workers failed; first error: " + result.worker_errors.front());
    result.params = store.snapshot();
    result.global_step = store.global_step();
    result.updates = store.updates();
    return result;
}

std::string train_csv_header() {
    return "global_step,worker,map_id,episode_reward,goal_hits,policy_loss,value_loss,entropy,depth1_loss,depth2_loss,"
           "loop_loss,grad_norm,wall_time_s\n";
}

std::string train_csv_row(const TrainProgress& p) {
    char buf[512];
    auto num = [](double v) {
        char b[32];
        std::snprintf(b, sizeof b, "%.9g", v);
        return std::string(b);
    };
    std::string ep = p.has_episode ? p.episode.map_id + "," + num(p.episode.reward) + "," +
                                         std::to_string(p.episode.goal_hits)
                                   : std::string(",,");
    std::snprintf(buf, sizeof buf, "%llu,%d,%s,%s,%s,%s,%s,%s,%s,%s,%.3f\n",
                  static_cast<unsigned long long>(p.global_step), p.worker, ep.c_str(), num(p.loss.policy).c_str(),
                  num(p.loss.value).c_str(), num(p.loss.entropy).c_str(), num(p.loss.depth1).c_str(),
                  num(p.loss.depth2).c_str(), num(p.loss.loop).c_str(), num(p.grad_norm).c_str(), p.wall_time_s);
    return buf;
}

} // namespace navbench
