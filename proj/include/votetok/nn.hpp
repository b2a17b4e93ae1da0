#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace votetok::nn {

// Dense f64 array, row-major. Rank is 1 ({n}) or 2 ({rows, cols}); scalars
// are {1}.
struct Array {
    std::vector<int> shape;
    std::vector<double> v;

    Array() = default;
    Array(std::vector<int> s, std::vector<double> values) : shape(std::move(s)), v(std::move(values)) {}
    static Array zeros(std::vector<int> shape);
    static Array scalar(double x) { return Array({1}, {x}); }

    int64_t size() const { return static_cast<int64_t>(v.size()); }
    int rows() const { return shape.empty() ? 0 : shape[0]; }
    int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double item() const { return v.at(0); }
};

// Handle into a Tape.
struct Var {
    int id = -1;
};

// Single-step reverse-mode tape. Ops append nodes in topological order;
// backward() walks them once in reverse, accumulating leaf gradients
// additively. A tape belongs to one thread and one training step.
class Tape {
public:
    explicit Tape(bool check_finite =
#ifdef NDEBUG
                      false
#else
                      true
#endif
    );

    Var leaf(Array value, bool requires_grad);
    Var leaf(const Array& value) { return leaf(value, false); }

    // y[t,o] = sum_i x[t,i] * w[o,i] + b[o]
    Var affine(Var x, Var w, Var b);
    Var relu(Var x);
    // Forward sign with sign(0) = +1; backward passes gradient through
    // unchanged (straight-through), or masked to |x| <= 1 when clip is set.
    Var sign_ste(Var x, bool clip = false);
    Var stop_gradient(Var x);
    // [T,C] -> [ceil(T/factor), C]; a ragged tail is right-padded by
    // repeating the last frame.
    Var avg_pool_time(Var x, int factor);
    // Mean cross-entropy over rows of logits [T,V] against labels [T].
    Var softmax_xent(Var logits, const std::vector<int>& labels);
    // Elementwise mean of same-shape tensors.
    Var mean_over(const std::vector<Var>& xs);
    Var mse(Var a, Var b);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double c);
    Var sum_all(Var a);
    // Codebook-usage objective over stacked pre-quantization rows: with
    // q = sigmoid(2p), mean per-element binary entropy minus the binary
    // entropy of the per-column mean of q. Zero when every q is 1/2;
    // minimized (-ln 2 per column) by confident, evenly used bits.
    Var entropy_loss(const std::vector<Var>& xs);

    const Array& value(Var x) const;
    const Array& grad(Var x) const;
    bool requires_grad(Var x) const;
    void backward(Var loss);
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Array value;
        Array grad;                      // allocated lazily in backward()
        bool requires_grad = false;
        std::function<void()> backprop;  // empty for leaves / non-grad nodes
    };

    Var push(Array value, bool requires_grad, std::function<void()> backprop);
    Array& grad_buf(Var x);
    void check(const Array& a, const char* op) const;

    std::vector<Node> nodes_;
    bool check_finite_;
};

// Decoupled-weight-decay Adam with global-norm gradient clipping.
struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double grad_clip = 1.0;  // 0 disables clipping
};

class AdamW {
public:
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    // One update over the full parameter set (clipping is global across all
    // grads). lr_scale multiplies the base lr, e.g. for warmup. Throws on
    // non-finite gradients, naming the offending parameter.
    void step(const std::vector<std::pair<std::string, Array*>>& params,
              const std::vector<const Array*>& grads, double lr_scale = 1.0);

    const AdamWConfig& config() const { return cfg_; }
    int64_t step_count() const { return t_; }

private:
    AdamWConfig cfg_;
    std::vector<Array> m_, v_;
    int64_t t_ = 0;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    int param = -1;     // index of the worst parameter array
    int64_t coord = -1; // flat coordinate within it
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central-difference check. `f` evaluates the loss at the given parameter
// values; `analytic` holds tape gradients at `base`. Relative error uses
// |a - n| / max(|a| + |n|, 1e-6).
GradCheckResult grad_check(const std::function<double(const std::vector<Array>&)>& f,
                           const std::vector<Array>& base, const std::vector<Array>& analytic,
                           double eps = 1e-4);

}  // namespace votetok::nn
