#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gridface/common.hpp"

namespace gridface {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major tensor of 64-bit floats with an optional gradient slot.
// Gradients are accumulated (never overwritten) by Tape::backward.
class Tensor {
public:
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until first touched; same length as data otherwise

    static TensorPtr create(std::vector<int> shape, std::vector<double> data,
                            bool requires_grad = false);
    static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr scalar(double v, bool requires_grad = false);

    int64_t numel() const {
        int64_t n = 1;
        for (int e : shape) n *= e;
        return n;
    }
    bool is_scalar() const { return numel() == 1; }

    double value() const {
        GF_REQUIRE(is_scalar(), "Tensor::value: tensor is not scalar");
        return data[0];
    }

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
    }
    const std::vector<double>& grad_view() {
        ensure_grad();
        return grad;
    }
};

// One recorded operation: inputs precede the output on the tape by
// construction, so a single reverse sweep is a valid topological backward
// pass. The closure reads output->grad and accumulates into input grads.
struct TapeOp {
    const char* name;
    std::vector<TensorPtr> inputs;
    TensorPtr output;
    std::function<void()> backward;
};

class Tape {
public:
    void record(const char* name, std::vector<TensorPtr> inputs, TensorPtr output,
                std::function<void()> backward);

    // Reverse-mode sweep from a scalar root. Grads of op outputs are reset
    // per sweep; grads of leaves accumulate across repeated calls.
    void backward(const TensorPtr& root);

    size_t size() const { return ops_.size(); }
    void clear() { ops_.clear(); }

private:
    std::vector<TapeOp> ops_;
};

// Named trainable parameters. Iteration order is the lexicographic name
// order, which keeps SGD updates deterministic.
class ParameterStore {
public:
    TensorPtr add(const std::string& name, TensorPtr t);
    TensorPtr get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    size_t size() const { return params_.size(); }

    void zero_grads();

    const std::map<std::string, TensorPtr>& items() const { return params_; }

private:
    std::map<std::string, TensorPtr> params_;
};

// p <- p - lr * grad(p) for every parameter, then grads are zeroed.
// Every parameter must have a populated gradient slot.
void sgd_step(ParameterStore& store, double learning_rate);

}  // namespace gridface
