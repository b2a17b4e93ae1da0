#include "votetok/nn.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

namespace votetok::nn {

namespace {

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
}

void require_same_shape(const Array& a, const Array& b, const char* op) {
    if (a.shape != b.shape) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// Binary entropy in nats, safe at the endpoints.
double bin_entropy(double q) {
    double h = 0.0;
    if (q > 0.0) h -= q * std::log(q);
    if (q < 1.0) h -= (1.0 - q) * std::log(1.0 - q);
    return h;
}

// d/dq [-q ln q - (1-q) ln(1-q)] = ln((1-q)/q), clamped to avoid inf at
// saturated q (where the entropy term itself is flat to machine precision).
double bin_entropy_grad(double q) {
    const double tiny = 1e-300;
    return std::log(std::max(1.0 - q, tiny)) - std::log(std::max(q, tiny));
}

}  // namespace

Array Array::zeros(std::vector<int> shape) {
    Array a;
    a.v.assign(static_cast<size_t>(shape_size(shape)), 0.0);
    a.shape = std::move(shape);
    return a;
}

Tape::Tape(bool check_finite) : check_finite_(check_finite) {}

void Tape::check(const Array& a, const char* op) const {
    if (!check_finite_) return;
    for (double x : a.v) {
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("Tape: non-finite value out of ") + op);
    }
}

Var Tape::push(Array value, bool requires_grad, std::function<void()> backprop) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.backprop = std::move(backprop);
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Array value, bool requires_grad) {
    check(value, "leaf");
    return push(std::move(value), requires_grad, nullptr);
}

const Array& Tape::value(Var x) const { return nodes_.at(x.id).value; }

const Array& Tape::grad(Var x) const {
    const Node& n = nodes_.at(x.id);
    if (!n.requires_grad) throw std::logic_error("Tape::grad: node does not require grad");
    return n.grad;
}

bool Tape::requires_grad(Var x) const { return nodes_.at(x.id).requires_grad; }

Array& Tape::grad_buf(Var x) {
    Node& n = nodes_[x.id];
    if (n.grad.v.empty()) n.grad = Array::zeros(n.value.shape);
    return n.grad;
}

void Tape::backward(Var loss) {
    Node& top = nodes_.at(loss.id);
    if (top.value.size() != 1) throw std::invalid_argument("Tape::backward: loss must be scalar");
    if (!top.requires_grad) throw std::invalid_argument("Tape::backward: loss does not require grad");
    for (Node& n : nodes_)
        if (n.requires_grad) {
            if (n.grad.v.empty()) n.grad = Array::zeros(n.value.shape);
            else std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
        }
    grad_buf(loss).v[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.backprop) n.backprop();
    }
}

Var Tape::affine(Var xv, Var wv, Var bv) {
    const Array& x = value(xv);
    const Array& w = value(wv);
    const Array& b = value(bv);
    const int t = x.rows(), in = x.cols(), out = w.rows();
    if (w.cols() != in) throw std::invalid_argument("affine: weight/input dim mismatch");
    if (b.size() != out) throw std::invalid_argument("affine: bias dim mismatch");

    Array y = Array::zeros({t, out});
    for (int r = 0; r < t; ++r) {
        const double* xr = x.v.data() + static_cast<size_t>(r) * in;
        double* yr = y.v.data() + static_cast<size_t>(r) * out;
        for (int o = 0; o < out; ++o) {
            const double* wo = w.v.data() + static_cast<size_t>(o) * in;
            double acc = b.v[o];
            for (int i = 0; i < in; ++i) acc += xr[i] * wo[i];
            yr[o] = acc;
        }
    }
    check(y, "affine");

    const bool any = requires_grad(xv) || requires_grad(wv) || requires_grad(bv);
    Var yv = push(std::move(y), any, nullptr);
    if (!any) return yv;
    nodes_[yv.id].backprop = [this, xv, wv, bv, yv, t, in, out]() {
        const Array& gy = nodes_[yv.id].grad;
        const Array& x = value(xv);
        const Array& w = value(wv);
        if (requires_grad(xv)) {
            Array& gx = grad_buf(xv);
            for (int r = 0; r < t; ++r)
                for (int o = 0; o < out; ++o) {
                    const double g = gy.v[static_cast<size_t>(r) * out + o];
                    const double* wo = w.v.data() + static_cast<size_t>(o) * in;
                    double* gxr = gx.v.data() + static_cast<size_t>(r) * in;
                    for (int i = 0; i < in; ++i) gxr[i] += g * wo[i];
                }
        }
        if (requires_grad(wv)) {
            Array& gw = grad_buf(wv);
            for (int r = 0; r < t; ++r)
                for (int o = 0; o < out; ++o) {
                    const double g = gy.v[static_cast<size_t>(r) * out + o];
                    const double* xr = x.v.data() + static_cast<size_t>(r) * in;
                    double* gwo = gw.v.data() + static_cast<size_t>(o) * in;
                    for (int i = 0; i < in; ++i) gwo[i] += g * xr[i];
                }
        }
        if (requires_grad(bv)) {
            Array& gb = grad_buf(bv);
            for (int r = 0; r < t; ++r)
                for (int o = 0; o < out; ++o) gb.v[o] += gy.v[static_cast<size_t>(r) * out + o];
        }
    };
    return yv;
}

Var Tape::relu(Var xv) {
    const Array& x = value(xv);
    Array y = x;
    for (auto& e : y.v) e = e > 0.0 ? e : 0.0;
    check(y, "relu");
    Var yv = push(std::move(y), requires_grad(xv), nullptr);
    if (!requires_grad(xv)) return yv;
    nodes_[yv.id].backprop = [this, xv, yv]() {
        const Array& gy = nodes_[yv.id].grad;
        const Array& x = value(xv);
        Array& gx = grad_buf(xv);
        for (size_t i = 0; i < x.v.size(); ++i)
            if (x.v[i] > 0.0) gx.v[i] += gy.v[i];
    };
    return yv;
}

Var Tape::sign_ste(Var xv, bool clip) {
    const Array& x = value(xv);
    Array y = x;
    for (auto& e : y.v) e = e >= 0.0 ? 1.0 : -1.0;  // sign(0) = +1
    Var yv = push(std::move(y), requires_grad(xv), nullptr);
    if (!requires_grad(xv)) return yv;
    nodes_[yv.id].backprop = [this, xv, yv, clip]() {
        const Array& gy = nodes_[yv.id].grad;
        const Array& x = value(xv);
        Array& gx = grad_buf(xv);
        for (size_t i = 0; i < gx.v.size(); ++i) {
            if (clip && std::abs(x.v[i]) > 1.0) continue;
            gx.v[i] += gy.v[i];
        }
    };
    return yv;
}

Var Tape::stop_gradient(Var xv) { return push(value(xv), false, nullptr); }

Var Tape::avg_pool_time(Var xv, int factor) {
    if (factor < 1) throw std::invalid_argument("avg_pool_time: factor must be >= 1");
    const Array& x = value(xv);
    const int t = x.rows(), c = x.cols();
    if (t < 1) throw std::invalid_argument("avg_pool_time: empty input");
    const int tp = (t + factor - 1) / factor;

    Array y = Array::zeros({tp, c});
    for (int r = 0; r < tp; ++r)
        for (int j = 0; j < factor; ++j) {
            const int src = std::min(r * factor + j, t - 1);  // right-pad by repeating
            for (int k = 0; k < c; ++k)
                y.v[static_cast<size_t>(r) * c + k] += x.v[static_cast<size_t>(src) * c + k] / factor;
        }

    check(y, "avg_pool_time");
    Var yv = push(std::move(y), requires_grad(xv), nullptr);
    if (!requires_grad(xv)) return yv;
    nodes_[yv.id].backprop = [this, xv, yv, t, c, tp, factor]() {
        const Array& gy = nodes_[yv.id].grad;
        Array& gx = grad_buf(xv);
        for (int r = 0; r < tp; ++r)
            for (int j = 0; j < factor; ++j) {
                const int src = std::min(r * factor + j, t - 1);
                for (int k = 0; k < c; ++k)
                    gx.v[static_cast<size_t>(src) * c + k] += gy.v[static_cast<size_t>(r) * c + k] / factor;
            }
    };
    return yv;
}

Var Tape::softmax_xent(Var lv, const std::vector<int>& labels) {
    const Array& z = value(lv);
    const int t = z.rows(), v = z.cols();
    if (static_cast<int>(labels.size()) != t)
        throw std::invalid_argument("softmax_xent: label count mismatch");
    for (int y : labels)
        if (y < 0 || y >= v) throw std::invalid_argument("softmax_xent: label out of range");

    // Cache softmax for the backward pass.
    auto probs = std::make_shared<std::vector<double>>(static_cast<size_t>(t) * v);
    double loss = 0.0;
    for (int r = 0; r < t; ++r) {
        const double* zr = z.v.data() + static_cast<size_t>(r) * v;
        double zmax = zr[0];
        for (int k = 1; k < v; ++k) zmax = std::max(zmax, zr[k]);
        double denom = 0.0;
        for (int k = 0; k < v; ++k) denom += std::exp(zr[k] - zmax);
        const double log_denom = std::log(denom) + zmax;
        loss += log_denom - zr[labels[r]];
        for (int k = 0; k < v; ++k)
            (*probs)[static_cast<size_t>(r) * v + k] = std::exp(zr[k] - log_denom);
    }
    loss /= t;

    Array out = Array::scalar(loss);
    check(out, "softmax_xent");
    Var ov = push(std::move(out), requires_grad(lv), nullptr);
    if (!requires_grad(lv)) return ov;
    nodes_[ov.id].backprop = [this, lv, ov, labels, probs, t, v]() {
        const double g = nodes_[ov.id].grad.v[0] / t;
        Array& gz = grad_buf(lv);
        for (int r = 0; r < t; ++r)
            for (int k = 0; k < v; ++k) {
                double p = (*probs)[static_cast<size_t>(r) * v + k];
                if (k == labels[r]) p -= 1.0;
                gz.v[static_cast<size_t>(r) * v + k] += g * p;
            }
    };
    return ov;
}

Var Tape::mean_over(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean_over: empty list");
    const Array& first = value(xs[0]);
    Array y = Array::zeros(first.shape);
    bool any = false;
    for (Var x : xs) {
        require_same_shape(value(x), first, "mean_over");
        any = any || requires_grad(x);
        for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += value(x).v[i];
    }
    const double inv = 1.0 / static_cast<double>(xs.size());
    for (auto& e : y.v) e *= inv;

    check(y, "mean_over");
    Var yv = push(std::move(y), any, nullptr);
    if (!any) return yv;
    nodes_[yv.id].backprop = [this, xs, yv, inv]() {
        const Array& gy = nodes_[yv.id].grad;
        for (Var x : xs) {
            if (!requires_grad(x)) continue;
            Array& gx = grad_buf(x);
            for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += inv * gy.v[i];
        }
    };
    return yv;
}

Var Tape::mse(Var av, Var bv) {
    const Array& a = value(av);
    const Array& b = value(bv);
    require_same_shape(a, b, "mse");
    const double inv = 1.0 / static_cast<double>(a.size());
    double loss = 0.0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const double d = a.v[i] - b.v[i];
        loss += d * d;
    }
    loss *= inv;

    const bool any = requires_grad(av) || requires_grad(bv);
    check(Array::scalar(loss), "mse");
    Var yv = push(Array::scalar(loss), any, nullptr);
    if (!any) return yv;
    nodes_[yv.id].backprop = [this, av, bv, yv, inv]() {
        const double g = nodes_[yv.id].grad.v[0];
        const Array& a = value(av);
        const Array& b = value(bv);
        if (requires_grad(av)) {
            Array& ga = grad_buf(av);
            for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += g * 2.0 * inv * (a.v[i] - b.v[i]);
        }
        if (requires_grad(bv)) {
            Array& gb = grad_buf(bv);
            for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] -= g * 2.0 * inv * (a.v[i] - b.v[i]);
        }
    };
    return yv;
}

Var Tape::add(Var av, Var bv) {
    const Array& a = value(av);
    const Array& b = value(bv);
    require_same_shape(a, b, "add");
    Array y = a;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] += b.v[i];
    check(y, "add");
    const bool any = requires_grad(av) || requires_grad(bv);
    Var yv = push(std::move(y), any, nullptr);
    if (!any) return yv;
    nodes_[yv.id].backprop = [this, av, bv, yv]() {
        const Array& gy = nodes_[yv.id].grad;
        for (Var x : {av, bv}) {
            if (!requires_grad(x)) continue;
            Array& gx = grad_buf(x);
            for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += gy.v[i];
        }
    };
    return yv;
}

Var Tape::sub(Var av, Var bv) {
    const Array& a = value(av);
    const Array& b = value(bv);
    require_same_shape(a, b, "sub");
    Array y = a;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] -= b.v[i];
    check(y, "sub");
    const bool any = requires_grad(av) || requires_grad(bv);
    Var yv = push(std::move(y), any, nullptr);
    if (!any) return yv;
    nodes_[yv.id].backprop = [this, av, bv, yv]() {
        const Array& gy = nodes_[yv.id].grad;
        if (requires_grad(av)) {
            Array& ga = grad_buf(av);
            for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += gy.v[i];
        }
        if (requires_grad(bv)) {
            Array& gb = grad_buf(bv);
            for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] -= gy.v[i];
        }
    };
    return yv;
}

Var Tape::mul(Var av, Var bv) {
    const Array& a = value(av);
    const Array& b = value(bv);
    require_same_shape(a, b, "mul");
    Array y = a;
    for (size_t i = 0; i < y.v.size(); ++i) y.v[i] *= b.v[i];
    check(y, "mul");
    const bool any = requires_grad(av) || requires_grad(bv);
    Var yv = push(std::move(y), any, nullptr);
    if (!any) return yv;
    nodes_[yv.id].backprop = [this, av, bv, yv]() {
        const Array& gy = nodes_[yv.id].grad;
        const Array& a = value(av);
        const Array& b = value(bv);
        if (requires_grad(av)) {
            Array& ga = grad_buf(av);
            for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += gy.v[i] * b.v[i];
        }
        if (requires_grad(bv)) {
            Array& gb = grad_buf(bv);
            for (size_t i = 0; i < gb.v.size(); ++i) gb.v[i] += gy.v[i] * a.v[i];
        }
    };
    return yv;
}

Var Tape::scale(Var av, double c) {
    Array y = value(av);
    for (auto& e : y.v) e *= c;
    check(y, "scale");
    Var yv = push(std::move(y), requires_grad(av), nullptr);
    if (!requires_grad(av)) return yv;
    nodes_[yv.id].backprop = [this, av, yv, c]() {
        const Array& gy = nodes_[yv.id].grad;
        Array& ga = grad_buf(av);
        for (size_t i = 0; i < ga.v.size(); ++i) ga.v[i] += c * gy.v[i];
    };
    return yv;
}

Var Tape::sum_all(Var av) {
    const Array& a = value(av);
    double s = 0.0;
    for (double e : a.v) s += e;
    check(Array::scalar(s), "sum_all");
    Var yv = push(Array::scalar(s), requires_grad(av), nullptr);
    if (!requires_grad(av)) return yv;
    nodes_[yv.id].backprop = [this, av, yv]() {
        const double g = nodes_[yv.id].grad.v[0];
        Array& ga = grad_buf(av);
        for (auto& e : ga.v) e += g;
    };
    return yv;
}

Var Tape::entropy_loss(const std::vector<Var>& xs) {
    if (xs.empty()) throw std::invalid_argument("entropy_loss: empty batch");
    const int d = value(xs[0]).cols();
    int64_t total_rows = 0;
    bool any = false;
    for (Var x : xs) {
        if (value(x).cols() != d) throw std::invalid_argument("entropy_loss: column mismatch");
        total_rows += value(x).rows();
        any = any || requires_grad(x);
    }

    // q = sigmoid(2p), per-column usage u_j = mean_rows q.
    auto qs = std::make_shared<std::vector<std::vector<double>>>();
    std::vector<double> usage(d, 0.0);
    double per_elem_entropy = 0.0;
    for (Var x : xs) {
        const Array& a = value(x);
        std::vector<double> q(a.v.size());
        for (size_t i = 0; i < a.v.size(); ++i) {
            q[i] = 1.0 / (1.0 + std::exp(-2.0 * a.v[i]));
            per_elem_entropy += bin_entropy(q[i]);
            usage[i % d] += q[i];
        }
        qs->push_back(std::move(q));
    }
    per_elem_entropy /= static_cast<double>(total_rows * d);
    double usage_entropy = 0.0;
    for (int j = 0; j < d; ++j) {
        usage[j] /= static_cast<double>(total_rows);
        usage_entropy += bin_entropy(usage[j]);
    }
    usage_entropy /= d;

    const double loss = per_elem_entropy - usage_entropy;
    check(Array::scalar(loss), "entropy_loss");
    Var yv = push(Array::scalar(loss), any, nullptr);
    if (!any) return yv;

    auto usage_ptr = std::make_shared<std::vector<double>>(std::move(usage));
    nodes_[yv.id].backprop = [this, xs, yv, qs, usage_ptr, d, total_rows]() {
        const double g = nodes_[yv.id].grad.v[0];
        const double inv_n = 1.0 / static_cast<double>(total_rows * d);
        std::vector<double> usage_term(d);
        for (int j = 0; j < d; ++j)
            usage_term[j] = bin_entropy_grad((*usage_ptr)[j]) * inv_n;  // (1/d)*(1/rows) = inv_n
        for (size_t b = 0; b < xs.size(); ++b) {
            if (!requires_grad(xs[b])) continue;
            Array& gx = grad_buf(xs[b]);
            const auto& q = (*qs)[b];
            for (size_t i = 0; i < q.size(); ++i) {
                const double dq_dp = 2.0 * q[i] * (1.0 - q[i]);
                const double dh = bin_entropy_grad(q[i]) * inv_n;
                gx.v[i] += g * dq_dp * (dh - usage_term[i % d]);
            }
        }
    };
    return yv;
}

void AdamW::step(const std::vector<std::pair<std::string, Array*>>& params,
                 const std::vector<const Array*>& grads, double lr_scale) {
    if (params.size() != grads.size()) throw std::invalid_argument("AdamW::step: param/grad count mismatch");
    if (m_.empty()) {
        for (const auto& [name, p] : params) {
            (void)name;
            m_.push_back(Array::zeros(p->shape));
            v_.push_back(Array::zeros(p->shape));
        }
    }
    if (m_.size() != params.size()) throw std::invalid_argument("AdamW::step: parameter set changed");

    double sq_norm = 0.0;
    for (size_t i = 0; i < grads.size(); ++i) {
        for (double g : grads[i]->v) {
            if (!std::isfinite(g))
                throw std::runtime_error("AdamW::step: non-finite gradient in " + params[i].first);
            sq_norm += g * g;
        }
    }
    const double norm = std::sqrt(sq_norm);
    const double clip_scale =
        cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip ? cfg_.grad_clip / norm : 1.0;

    ++t_;
    const double lr = cfg_.lr * lr_scale;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

    for (size_t i = 0; i < params.size(); ++i) {
        Array& p = *params[i].second;
        const Array& g = *grads[i];
        Array& m = m_[i];
        Array& v = v_[i];
        for (size_t k = 0; k < p.v.size(); ++k) {
            const double gc = g.v[k] * clip_scale;
            m.v[k] = cfg_.beta1 * m.v[k] + (1.0 - cfg_.beta1) * gc;
            v.v[k] = cfg_.beta2 * v.v[k] + (1.0 - cfg_.beta2) * gc * gc;
            const double m_hat = m.v[k] / bc1;
            const double v_hat = v.v[k] / bc2;
            p.v[k] -= lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) + cfg_.weight_decay * p.v[k]);
        }
    }
}

GradCheckResult grad_check(const std::function<double(const std::vector<Array>&)>& f,
                           const std::vector<Array>& base, const std::vector<Array>& analytic,
                           double eps) {
    if (base.size() != analytic.size())
        throw std::invalid_argument("grad_check: base/analytic count mismatch");
    GradCheckResult res;
    std::vector<Array> probe = base;
    for (size_t p = 0; p < base.size(); ++p) {
        for (size_t k = 0; k < base[p].v.size(); ++k) {
            const double x0 = base[p].v[k];
            probe[p].v[k] = x0 + eps;
            const double f_plus = f(probe);
            probe[p].v[k] = x0 - eps;
            const double f_minus = f(probe);
            probe[p].v[k] = x0;

            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double a = analytic[p].v[k];
            const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-6);
            if (rel > res.max_rel_error) {
                res.max_rel_error = rel;
                res.param = static_cast<int>(p);
                res.coord = static_cast<int64_t>(k);
                res.analytic = a;
                res.numeric = numeric;
            }
        }
    }
    return res;
}

}  // namespace votetok::nn
