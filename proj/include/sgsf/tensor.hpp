#pragma once

#include <algorithm>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <unordered_set>
#include <utility>

#include "sgsf/common.hpp"

namespace sgsf {

/// Global (thread-local) switch for tape recording. Inference wraps forward
/// passes in a NoGradGuard so no graph is built.
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <class T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated lazily, same length as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void()> backward_fn;  // accumulates this->grad into parents

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
    }
};

/// Dense row-major tensor of reals with optional autograd-tape participation.
/// Copies are shallow (shared buffer), matching the value-semantic handle
/// idiom: a Tensor is a reference to one immutable-shaped node.
template <class T>
class TensorT {
public:
    using Scalar = T;

    TensorT() = default;

    static TensorT zeros(Shape shape) { return filled(std::move(shape), T(0)); }
    static TensorT ones(Shape shape) { return filled(std::move(shape), T(1)); }

    static TensorT filled(Shape shape, T v) {
        TensorT t;
        t.n_ = std::make_shared<Node<T>>();
        t.n_->shape = std::move(shape);
        const int64_t n = shape_numel(t.n_->shape);
        SGSF_CHECK(n >= 0, "negative extent in shape " << shape_str(t.n_->shape));
        t.n_->value.assign(static_cast<size_t>(n), v);
        return t;
    }

    static TensorT from_data(Shape shape, std::vector<T> data) {
        TensorT t;
        t.n_ = std::make_shared<Node<T>>();
        const int64_t n = shape_numel(shape);
        SGSF_CHECK(n == static_cast<int64_t>(data.size()),
                   "data length " << data.size() << " does not match shape "
                                  << shape_str(shape));
        t.n_->shape = std::move(shape);
        t.n_->value = std::move(data);
        return t;
    }

    static TensorT scalar(T v) { return from_data({1}, {v}); }

    static TensorT randn(Shape shape, Rng& rng, T stddev = T(1)) {
        TensorT t = zeros(std::move(shape));
        for (auto& v : t.data()) v = static_cast<T>(rng.normal()) * stddev;
        return t;
    }

    static TensorT rand_uniform(Shape shape, Rng& rng, T lo = T(0), T hi = T(1)) {
        TensorT t = zeros(std::move(shape));
        for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int64_t dim(size_t i) const { return n_->shape[i]; }
    size_t rank() const { return n_->shape.size(); }
    int64_t numel() const { return static_cast<int64_t>(n_->value.size()); }

    std::vector<T>& data() { return n_->value; }
    const std::vector<T>& data() const { return n_->value; }
    T* ptr() { return n_->value.data(); }
    const T* ptr() const { return n_->value.data(); }

    T item() const {
        SGSF_CHECK(numel() == 1, "item() on tensor of " << numel() << " elements");
        return n_->value[0];
    }

    bool requires_grad() const { return n_->requires_grad; }
    TensorT& set_requires_grad(bool v) {
        n_->requires_grad = v;
        return *this;
    }

    /// Gradient buffer; empty until a backward pass has touched this tensor.
    const std::vector<T>& grad() const { return n_->grad; }
    std::vector<T>& grad_mut() {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() {
        if (!n_->grad.empty()) std::fill(n_->grad.begin(), n_->grad.end(), T(0));
    }

    std::shared_ptr<Node<T>> node() const { return n_; }

    /// Deep copy of values only (detached from the tape).
    TensorT clone_detached() const {
        TensorT t = from_data(shape(), data());
        return t;
    }

    /// Converts value buffer to another scalar type (detached).
    template <class U>
    TensorT<U> cast() const {
        std::vector<U> d(data().size());
        for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<U>(data()[i]);
        return TensorT<U>::from_data(shape(), std::move(d));
    }

private:
    std::shared_ptr<Node<T>> n_;
};

using Tensor = TensorT<float>;

namespace detail {

/// Builds the output node of an op: `parents` are the inputs that can carry
/// gradient, `fn` is invoked during backward with the output node fully
/// formed. Recording only happens when grad mode is on and at least one
/// parent requires grad.
template <class T>
void attach_tape(TensorT<T>& out, std::vector<TensorT<T>> parents,
                 std::function<void()> fn) {
    if (!grad_mode()) return;
    bool any = false;
    for (const auto& p : parents)
        if (p.defined() && p.requires_grad()) any = true;
    if (!any) return;
    auto node = out.node();
    node->requires_grad = true;
    for (auto& p : parents)
        if (p.defined()) node->parents.push_back(p.node());
    node->backward_fn = std::move(fn);
}

template <class T>
void accumulate(const std::shared_ptr<Node<T>>& node, const std::vector<T>& g) {
    if (!node->requires_grad) return;
    node->ensure_grad();
    for (size_t i = 0; i < g.size(); ++i) node->grad[i] += g[i];
}

}  // namespace detail

/// Reverse-mode sweep from a scalar loss. Populates `grad` on every
/// requires_grad tensor reachable through the tape.
template <class T>
void backward(const TensorT<T>& loss) {
    SGSF_CHECK(loss.numel() == 1, "backward requires a scalar loss, got shape "
                                      << shape_str(loss.shape()));
    auto root = loss.node();
    SGSF_CHECK(root->requires_grad,
               "backward on a tensor that does not require grad");

    // Iterative post-order topological sort over the tape.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node<T>* p = node->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward_fn) node->backward_fn();
    }
}

/// Named trainable tensor. Names are hierarchical, lowercase, '.'-separated.
template <class T>
struct ParameterT {
    std::string name;
    TensorT<T> tensor;
};

using Parameter = ParameterT<float>;

inline bool valid_param_name(const std::string& name) {
    if (name.empty()) return false;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                        c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

/// Ordered parameter registry; registration order is the canonical
/// serialization order, lookups go by name.
template <class T>
class ParamRegistryT {
public:
    TensorT<T> add(const std::string& name, TensorT<T> t) {
        SGSF_CHECK(valid_param_name(name), "invalid parameter name '" << name << "'");
        SGSF_CHECK(!index_.count(name), "duplicate parameter name '" << name << "'");
        t.set_requires_grad(true);
        index_[name] = params_.size();
        params_.push_back(ParameterT<T>{name, t});
        return t;
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    TensorT<T> get(const std::string& name) const {
        auto it = index_.find(name);
        SGSF_CHECK(it != index_.end(), "unknown parameter '" << name << "'");
        return params_[it->second].tensor;
    }

    size_t size() const { return params_.size(); }
    const std::vector<ParameterT<T>>& all() const { return params_; }

    int64_t total_scalars() const {
        int64_t n = 0;
        for (const auto& p : params_) n += p.tensor.numel();
        return n;
    }

    void zero_grad() {
        for (auto& p : params_) p.tensor.zero_grad();
    }

private:
    std::vector<ParameterT<T>> params_;
    std::map<std::string, size_t> index_;
};

using ParamRegistry = ParamRegistryT<float>;

}  // namespace sgsf
