#include "gridface/tensor.hpp"

#include <algorithm>

namespace gridface {

TensorPtr Tensor::create(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    int64_t n = 1;
    for (int e : shape) {
        GF_REQUIRE(e > 0, "Tensor: all extents must be positive");
        n *= e;
    }
    GF_REQUIRE(n == static_cast<int64_t>(data.size()),
               "Tensor: product(shape) must equal data length");
    ensure_all_finite("tensor data", data);
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    int64_t n = 1;
    for (int e : shape) n *= e;
    return create(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

TensorPtr Tensor::scalar(double v, bool requires_grad) {
    return create({1}, {v}, requires_grad);
}

void Tape::record(const char* name, std::vector<TensorPtr> inputs, TensorPtr output,
                  std::function<void()> backward) {
    ops_.push_back(TapeOp{name, std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::backward(const TensorPtr& root) {
    GF_REQUIRE(root != nullptr, "backward: null root");
    GF_REQUIRE(root->is_scalar(), "backward: root must be scalar");

    // Op outputs get a fresh adjoint each sweep; leaves keep accumulating.
    for (auto& op : ops_) {
        op.output->ensure_grad();
        op.output->zero_grad();
    }
    root->ensure_grad();
    root->grad[0] += 1.0;

    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
        it->backward();
        for (auto& in : it->inputs) {
            if (in->requires_grad && !in->grad.empty()) {
                for (double g : in->grad) {
                    if (!std::isfinite(g)) {
                        throw NumericError(std::string("non-finite gradient out of op ") +
                                           it->name);
                    }
                }
            }
        }
    }
}

TensorPtr ParameterStore::add(const std::string& name, TensorPtr t) {
    GF_REQUIRE(!params_.count(name), "ParameterStore: duplicate parameter name: " + name);
    GF_REQUIRE(t != nullptr, "ParameterStore: null tensor");
    t->requires_grad = true;
    params_[name] = t;
    return t;
}

TensorPtr ParameterStore::get(const std::string& name) const {
    auto it = params_.find(name);
    GF_REQUIRE(it != params_.end(), "ParameterStore: unknown parameter: " + name);
    return it->second;
}

void ParameterStore::zero_grads() {
    for (auto& [name, t] : params_) {
        t->ensure_grad();
        t->zero_grad();
    }
}

void sgd_step(ParameterStore& store, double learning_rate) {
    GF_REQUIRE(std::isfinite(learning_rate) && learning_rate >= 0.0,
               "sgd_step: learning rate must be finite and non-negative");
    for (auto& [name, t] : store.items()) {
        GF_REQUIRE(!t->grad.empty(), "sgd_step: missing gradient for parameter " + name);
        for (size_t i = 0; i < t->data.size(); ++i) {
            t->data[i] -= learning_rate * t->grad[i];
        }
        ensure_all_finite("sgd_step parameter update", t->data);
        t->zero_grad();
    }
}

}  // namespace gridface
