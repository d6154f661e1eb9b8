#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "rng.hpp"

namespace navbench {

namespace {

double evaluate(const std::vector<Tensor>& inputs, const LossBuilder& build) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
    return build(tape, leaves).value()[0];
}

} // namespace

GradCheckResult gradcheck(const std::vector<Tensor>& inputs, const LossBuilder& build, double h, double floor) {
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
    tape.backward(build(tape, leaves));
    std::vector<Tensor> analytic;
    for (const Var& v : leaves) analytic.push_back(v.grad());

    GradCheckResult r;
    std::vector<Tensor> probe = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k)
        for (std::size_t i = 0; i < inputs[k].size(); ++i) {
            const double x0 = inputs[k][i];
            probe[k][i] = x0 + h;
            const double up = evaluate(probe, build);
            probe[k][i] = x0 - h;
            const double down = evaluate(probe, build);
            probe[k][i] = x0;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[k][i];
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
            r.max_rel_error = std::max(r.max_rel_error, err);
            ++r.checked;
        }
    return r;
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale, double margin) {
    Rng rng(seed);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        double v;
        do v = rng.uniform(-scale, scale);
        while (std::abs(v) < margin);
        t[i] = v;
    }
    return t;
}

} // namespace navbench
