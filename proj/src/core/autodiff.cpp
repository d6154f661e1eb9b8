#include "autodiff.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

#include "error.hpp"

namespace navbench {

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
        fail(ErrorKind::InvalidArgument, "tensor: data length " + std::to_string(data_.size()) +
                                             " does not match shape " + shape_string(shape_));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    if (!value.all_finite()) fail(ErrorKind::Numeric, "leaf: non-finite value");
    nodes_.push_back({std::move(value), {}, requires_grad, {}});
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn backward, const char* op) {
    if (!value.all_finite()) fail(ErrorKind::Numeric, std::string(op) + ": non-finite output");
    nodes_.push_back({std::move(value), {}, requires_grad, requires_grad ? std::move(backward) : BackwardFn{}});
    return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
}

const Tensor& Tape::grad(std::uint32_t id) {
    const Node& n = nodes_[id];
    if (!n.grad.empty()) return n.grad;
    zeros_ = Tensor(n.value.shape(), 0.0);
    return zeros_;
}

void Tape::backward(Var root) {
    if (root.id() >= nodes_.size()) fail(ErrorKind::InvalidArgument, "backward: root not on this tape");
    if (nodes_[root.id()].value.size() != 1)
        fail(ErrorKind::InvalidArgument,
             "backward: root must have one element, got " + shape_string(nodes_[root.id()].value.shape()));
    for (auto& n : nodes_) n.grad = Tensor();
    grad_buffer(root.id())[0] = 1.0;
    for (std::int64_t id = root.id(); id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.backward && !n.grad.empty()) n.backward(*this, static_cast<std::uint32_t>(id));
    }
}

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    fail(ErrorKind::InvalidArgument,
         std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void same_tape(Var a, Var b, const char* op) {
    if (&a.tape() != &b.tape()) fail(ErrorKind::InvalidArgument, std::string(op) + ": operands on different tapes");
}

template <typename F, typename D>
Var unary(Var x, const char* op, F f, D dydx) {
    const Tensor& xv = x.value();
    Tensor y(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
    const std::uint32_t xi = x.id();
    return x.tape().record(
        std::move(y), x.requires_grad(),
        [xi, dydx](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            const Tensor& xv = t.value(xi);
            const Tensor& yv = t.value(self);
            Tensor& gx = t.grad_buffer(xi);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * dydx(xv[i], yv[i]);
        },
        op);
}

std::size_t last_dim(const Tensor& t) { return t.rank() == 0 ? 1 : t.shape().back(); }

} // namespace

Var matmul(Var a, Var b) {
    same_tape(a, b, "matmul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) shape_error("matmul", av.shape(), bv.shape());
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor y({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* yr = &y[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double s = av[i * k + p];
            if (s == 0.0) continue;
            const double* br = &bv[p * n];
            for (std::size_t j = 0; j < n; ++j) yr[j] += s * br[j];
        }
    }
    const std::uint32_t ai = a.id(), bi = b.id();
    return a.tape().record(
        std::move(y), a.requires_grad() || b.requires_grad(),
        [ai, bi, m, k, n](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            const Tensor& av = t.value(ai);
            const Tensor& bv = t.value(bi);
            if (t.requires_grad(ai)) {
                Tensor& ga = t.grad_buffer(ai);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double* br = &bv[p * n];
                        const double* gr = &g[i * n];
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += gr[j] * br[j];
                        ga[i * k + p] += s;
                    }
            }
            if (t.requires_grad(bi)) {
                Tensor& gb = t.grad_buffer(bi);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double s = av[i * k + p];
                        if (s == 0.0) continue;
                        double* gbr = &gb[p * n];
                        const double* gr = &g[i * n];
                        for (std::size_t j = 0; j < n; ++j) gbr[j] += s * gr[j];
                    }
            }
        },
        "matmul");
}

Var bias_add(Var x, Var bias) {
    same_tape(x, bias, "bias_add");
    const Tensor& xv = x.value();
    const Tensor& bv = bias.value();
    if (xv.rank() != 2 || bv.size() != xv.dim(1)) shape_error("bias_add", xv.shape(), bv.shape());
    const std::size_t m = xv.dim(0), n = xv.dim(1);
    Tensor y = xv;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) y[i * n + j] += bv[j];
    const std::uint32_t xi = x.id(), bi = bias.id();
    return x.tape().record(
        std::move(y), x.requires_grad() || bias.requires_grad(),
        [xi, bi, m, n](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            if (t.requires_grad(xi)) {
                Tensor& gx = t.grad_buffer(xi);
                for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
            }
            if (t.requires_grad(bi)) {
                Tensor& gb = t.grad_buffer(bi);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
            }
        },
        "bias_add");
}

Var conv2d(Var input, Var kernel, Var bias, int stride) {
    same_tape(input, kernel, "conv2d");
    same_tape(input, bias, "conv2d");
    const Tensor& xv = input.value();
    const Tensor& kv = kernel.value();
    const Tensor& bv = bias.value();
    if (stride < 1) fail(ErrorKind::InvalidArgument, "conv2d: stride must be positive");
    if (xv.rank() != 3 || kv.rank() != 4 || kv.dim(1) != xv.dim(0) || kv.dim(2) > xv.dim(1) ||
        kv.dim(3) > xv.dim(2))
        shape_error("conv2d", xv.shape(), kv.shape());
    if (bv.size() != kv.dim(0)) shape_error("conv2d", kv.shape(), bv.shape());
    const std::size_t C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const std::size_t F = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
    const std::size_t s = static_cast<std::size_t>(stride);
    const std::size_t oh = (H - kh) / s + 1, ow = (W - kw) / s + 1;
    const std::size_t Q = C * kh * kw, P = oh * ow;

    // cols[q][p] with q = (c, ki, kj) and p = (oy, ox)
    std::vector<double> cols(Q * P);
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t ki = 0; ki < kh; ++ki)
            for (std::size_t kj = 0; kj < kw; ++kj) {
                double* row = &cols[((c * kh + ki) * kw + kj) * P];
                for (std::size_t oy = 0; oy < oh; ++oy) {
                    const double* src = &xv[(c * H + oy * s + ki) * W + kj];
                    for (std::size_t ox = 0; ox < ow; ++ox) row[oy * ow + ox] = src[ox * s];
                }
            }

    Tensor y({F, oh, ow});
    for (std::size_t f = 0; f < F; ++f) {
        double* yr = &y[f * P];
        std::fill(yr, yr + P, bv[f]);
        for (std::size_t q = 0; q < Q; ++q) {
            const double w = kv[f * Q + q];
            const double* cr = &cols[q * P];
            for (std::size_t p = 0; p < P; ++p) yr[p] += w * cr[p];
        }
    }

    const std::uint32_t xi = input.id(), ki_ = kernel.id(), bi = bias.id();
    const bool rg = input.requires_grad() || kernel.requires_grad() || bias.requires_grad();
    if (!rg) cols.clear();
    return input.tape().record(
        std::move(y), rg,
        [xi, ki_, bi, C, H, W, F, kh, kw, s, oh, ow, Q, P, cols = std::move(cols)](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            if (t.requires_grad(bi)) {
                Tensor& gb = t.grad_buffer(bi);
                for (std::size_t f = 0; f < F; ++f) {
                    double acc = 0.0;
                    for (std::size_t p = 0; p < P; ++p) acc += g[f * P + p];
                    gb[f] += acc;
                }
            }
            if (t.requires_grad(ki_)) {
                Tensor& gk = t.grad_buffer(ki_);
                for (std::size_t f = 0; f < F; ++f) {
                    const double* gr = &g[f * P];
                    for (std::size_t q = 0; q < Q; ++q) {
                        const double* cr = &cols[q * P];
                        double acc = 0.0;
                        for (std::size_t p = 0; p < P; ++p) acc += gr[p] * cr[p];
                        gk[f * Q + q] += acc;
                    }
                }
            }
            if (t.requires_grad(xi)) {
                const Tensor& kv = t.value(ki_);
                std::vector<double> dcols(Q * P, 0.0);
                for (std::size_t f = 0; f < F; ++f) {
                    const double* gr = &g[f * P];
                    for (std::size_t q = 0; q < Q; ++q) {
                        const double w = kv[f * Q + q];
                        double* dr = &dcols[q * P];
                        for (std::size_t p = 0; p < P; ++p) dr[p] += w * gr[p];
                    }
                }
                Tensor& gx = t.grad_buffer(xi);
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ki = 0; ki < kh; ++ki)
                        for (std::size_t kj = 0; kj < kw; ++kj) {
                            const double* row = &dcols[((c * kh + ki) * kw + kj) * P];
                            for (std::size_t oy = 0; oy < oh; ++oy) {
                                double* dst = &gx[(c * H + oy * s + ki) * W + kj];
                                for (std::size_t ox = 0; ox < ow; ++ox) dst[ox * s] += row[oy * ow + ox];
                            }
                        }
            }
        },
        "conv2d");
}

Var relu(Var x) {
    return unary(
        x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
        [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var x) {
    return unary(
        x, "tanh", [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
    return unary(
        x, "sigmoid",
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var log(Var x, double floor) {
    return unary(
        x, "log", [floor](double v) { return std::log(std::max(v, floor)); },
        [floor](double xv, double) { return xv > floor ? 1.0 / xv : 0.0; });
}

Var softmax(Var x) {
    const Tensor& xv = x.value();
    const std::size_t n = last_dim(xv);
    if (n == 0) fail(ErrorKind::InvalidArgument, "softmax: empty last dimension");
    const std::size_t rows = xv.size() / n;
    Tensor y(xv.shape());
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = &xv[r * n];
        double* yr = &y[r * n];
        const double mx = *std::max_element(xr, xr + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += (yr[j] = std::exp(xr[j] - mx));
        for (std::size_t j = 0; j < n; ++j) yr[j] /= z;
    }
    const std::uint32_t xi = x.id();
    return x.tape().record(
        std::move(y), x.requires_grad(),
        [xi, n, rows](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            const Tensor& yv = t.value(self);
            Tensor& gx = t.grad_buffer(xi);
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * yv[r * n + j];
                for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += yv[r * n + j] * (g[r * n + j] - dot);
            }
        },
        "softmax");
}

namespace {

template <typename F, typename GA, typename GB>
Var binary(Var a, Var b, const char* op, F f, GA da, GB db) {
    same_tape(a, b, op);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape() != bv.shape()) shape_error(op, av.shape(), bv.shape());
    Tensor y(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) y[i] = f(av[i], bv[i]);
    const std::uint32_t ai = a.id(), bi = b.id();
    return a.tape().record(
        std::move(y), a.requires_grad() || b.requires_grad(),
        [ai, bi, da, db](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            const Tensor& av = t.value(ai);
            const Tensor& bv = t.value(bi);
            if (t.requires_grad(ai)) {
                Tensor& ga = t.grad_buffer(ai);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(av[i], bv[i]);
            }
            if (t.requires_grad(bi)) {
                Tensor& gb = t.grad_buffer(bi);
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(av[i], bv[i]);
            }
        },
        op);
}

} // namespace

Var add(Var a, Var b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Var scale(Var x, double factor) {
    return unary(
        x, "scale", [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Var concat(std::span<const Var> parts) {
    if (parts.empty()) fail(ErrorKind::InvalidArgument, "concat: no inputs");
    const Tensor& first = parts[0].value();
    if (first.rank() == 0) fail(ErrorKind::InvalidArgument, "concat: rank-0 input");
    const Shape lead(first.shape().begin(), first.shape().end() - 1);
    const std::size_t rows = shape_size(lead);
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    bool rg = false;
    for (const Var& p : parts) {
        same_tape(parts[0], p, "concat");
        const Tensor& v = p.value();
        if (v.rank() != first.rank() || !std::equal(lead.begin(), lead.end(), v.shape().begin()))
            shape_error("concat", first.shape(), v.shape());
        widths.push_back(v.shape().back());
        total += v.shape().back();
        rg = rg || p.requires_grad();
    }
    Shape out_shape = lead;
    out_shape.push_back(total);
    Tensor y(out_shape);
    std::vector<std::uint32_t> ids;
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& v = parts[k].value();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(&v[r * widths[k]], widths[k], &y[r * total + offset]);
        offset += widths[k];
        ids.push_back(parts[k].id());
    }
    return parts[0].tape().record(
        std::move(y), rg,
        [ids = std::move(ids), widths = std::move(widths), rows, total](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            std::size_t offset = 0;
            for (std::size_t k = 0; k < ids.size(); ++k) {
                if (t.requires_grad(ids[k])) {
                    Tensor& gp = t.grad_buffer(ids[k]);
                    for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t j = 0; j < widths[k]; ++j)
                            gp[r * widths[k] + j] += g[r * total + offset + j];
                }
                offset += widths[k];
            }
        },
        "concat");
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var slice(Var x, std::size_t begin, std::size_t end) {
    const Tensor& xv = x.value();
    const std::size_t n = last_dim(xv);
    if (xv.rank() == 0 || begin >= end || end > n)
        fail(ErrorKind::InvalidArgument, "slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                             ") invalid for shape " + shape_string(xv.shape()));
    const std::size_t rows = xv.size() / n, w = end - begin;
    Shape out_shape = xv.shape();
    out_shape.back() = w;
    Tensor y(out_shape);
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(&xv[r * n + begin], w, &y[r * w]);
    const std::uint32_t xi = x.id();
    return x.tape().record(
        std::move(y), x.requires_grad(),
        [xi, rows, n, w, begin](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            Tensor& gx = t.grad_buffer(xi);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t j = 0; j < w; ++j) gx[r * n + begin + j] += g[r * w + j];
        },
        "slice");
}

Var reshape(Var x, Shape shape) {
    const Tensor& xv = x.value();
    if (shape_size(shape) != xv.size()) shape_error("reshape", xv.shape(), shape);
    Tensor y(std::move(shape), std::vector<double>(xv.data().begin(), xv.data().end()));
    const std::uint32_t xi = x.id();
    return x.tape().record(
        std::move(y), x.requires_grad(),
        [xi](Tape& t, std::uint32_t self) {
            const Tensor& g = t.upstream(self);
            Tensor& gx = t.grad_buffer(xi);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        },
        "reshape");
}

namespace {

Var reduce(Var x, double factor, const char* op) {
    const Tensor& xv = x.value();
    double s = 0.0;
    for (double v : xv.data()) s += v;
    const std::uint32_t xi = x.id();
    return x.tape().record(
        Tensor::scalar(s * factor), x.requires_grad(),
        [xi, factor](Tape& t, std::uint32_t self) {
            const double g = t.upstream(self)[0] * factor;
            Tensor& gx = t.grad_buffer(xi);
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
        },
        op);
}

} // namespace

Var sum(Var x) { return reduce(x, 1.0, "sum"); }

Var mean(Var x) {
    if (x.value().size() == 0) fail(ErrorKind::InvalidArgument, "mean: empty input");
    return reduce(x, 1.0 / static_cast<double>(x.value().size()), "mean");
}

LstmState lstm_cell(Var x, LstmState prev, const LstmWeights& weights) {
    const Tensor& xv = x.value();
    const Tensor& hv = prev.h.value();
    const Tensor& cv = prev.c.value();
    const Tensor& wv = weights.weight.value();
    if (xv.rank() != 2 || xv.dim(0) != 1 || hv.rank() != 2 || hv.dim(0) != 1 || cv.shape() != hv.shape())
        shape_error("lstm_cell", xv.shape(), hv.shape());
    const std::size_t in = xv.dim(1), hidden = hv.dim(1);
    if (wv.rank() != 2 || wv.dim(0) != in + hidden || wv.dim(1) != 4 * hidden)
        shape_error("lstm_cell", Shape{in + hidden, 4 * hidden}, wv.shape());
    const Var z = bias_add(matmul(concat({x, prev.h}), weights.weight), weights.bias);
    const Var i = sigmoid(slice(z, 0, hidden));
    const Var f = sigmoid(slice(z, hidden, 2 * hidden));
    const Var o = sigmoid(slice(z, 2 * hidden, 3 * hidden));
    const Var g = tanh(slice(z, 3 * hidden, 4 * hidden));
    const Var c = add(mul(f, prev.c), mul(i, g));
    return {mul(o, tanh(c)), c};
}

namespace {

std::atomic<std::uint64_t> g_log_floor_hits{0};

Var constant_like(Var x, double v) { return x.tape().constant(Tensor(x.value().shape(), v)); }

} // namespace

std::uint64_t policy_log_floor_hits() { return g_log_floor_hits.load(); }

Var policy_gradient_term(Var log_probs, int action, double advantage) {
    const Tensor& lp = log_probs.value();
    if (action < 0 || static_cast<std::size_t>(action) >= lp.size())
        fail(ErrorKind::InvalidArgument, "policy_gradient_term: action " + std::to_string(action) +
                                             " out of range for " + shape_string(lp.shape()));
    if (lp[static_cast<std::size_t>(action)] <= std::log(1e-12) + 1e-9) {
        if (g_log_floor_hits.fetch_add(1) < 10)
            std::cerr << "warning: chosen action " << action << " has zero probability; log clamped\n";
    }
    const auto a = static_cast<std::size_t>(action);
    return scale(sum(slice(reshape(log_probs, {lp.size()}), a, a + 1)), -advantage);
}

Var value_mse(Var value, double target) {
    const Var d = sub(constant_like(value, target), value);
    return sum(mul(d, d));
}

Var entropy_bonus(Var probs, Var log_probs) { return sum(mul(probs, log_probs)); }

Var depth_ce(Var logits, std::span<const int> targets, std::size_t classes) {
    const std::size_t groups = targets.size();
    if (groups == 0 || classes == 0 || logits.value().size() != groups * classes)
        shape_error("depth_ce", logits.value().shape(), Shape{groups, classes});
    Tensor mask({groups, classes}, 0.0);
    for (std::size_t k = 0; k < groups; ++k) {
        if (targets[k] < 0 || static_cast<std::size_t>(targets[k]) >= classes)
            fail(ErrorKind::InvalidArgument, "depth_ce: target class " + std::to_string(targets[k]) + " out of range");
        mask[k * classes + static_cast<std::size_t>(targets[k])] = 1.0;
    }
    const Var lp = log(softmax(reshape(logits, {groups, classes})));
    return scale(sum(mul(lp, logits.tape().constant(std::move(mask)))), -1.0 / static_cast<double>(groups));
}

Var loop_ce(Var logit, int label, double floor) {
    if (logit.value().size() != 1) shape_error("loop_ce", logit.value().shape(), Shape{1});
    if (label != 0 && label != 1) fail(ErrorKind::InvalidArgument, "loop_ce: label must be 0 or 1");
    const Var p = sigmoid(reshape(logit, {1}));
    const Var q = label == 1 ? p : sub(constant_like(p, 1.0), p);
    return scale(log(q, floor), -1.0);
}

} // namespace navbench
