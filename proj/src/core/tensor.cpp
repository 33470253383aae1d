// SPDX-License-Identifier: Apache-2.0
#include "core/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace tfk {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

namespace {
thread_local bool t_grad_enabled = true;
std::string g_corrupt_op;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

namespace debug {
void set_corrupt_backward(std::string op) { g_corrupt_op = std::move(op); }
const std::string& corrupt_backward() { return g_corrupt_op; }
}  // namespace debug

template <typename Real>
Tensor<Real>::Tensor(Shape shape, std::vector<Real> data, bool requires_grad) {
    if (tfk::numel(shape) != data.size()) {
        throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                             std::to_string(data.size()) + " values");
    }
    for (auto e : shape) {
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
    node_ = std::make_shared<Node<Real>>();
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

template <typename Real>
Tensor<Real> Tensor<Real>::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), Real(0), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::full(Shape shape, Real value, bool requires_grad) {
    std::vector<Real> data(tfk::numel(shape), value);
    return Tensor(std::move(shape), std::move(data), requires_grad);
}

template <typename Real>
Tensor<Real> Tensor<Real>::scalar(Real value, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<Real>{value}, requires_grad);
}

template <typename Real>
std::size_t Tensor<Real>::dim(int axis) const {
    const int r = static_cast<int>(rank());
    const int a = axis < 0 ? r + axis : axis;
    if (a < 0 || a >= r) throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape()));
    return node_->shape[static_cast<std::size_t>(a)];
}

template <typename Real>
Real Tensor<Real>::item() const {
    if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
    return node_->data[0];
}

template <typename Real>
Real Tensor<Real>::at(std::initializer_list<std::size_t> index) const {
    if (index.size() != rank()) throw DimensionError("index rank mismatch for " + shape_str(shape()));
    std::size_t flat = 0;
    std::size_t i = 0;
    for (auto v : index) {
        if (v >= node_->shape[i]) throw DimensionError("index out of range for " + shape_str(shape()));
        flat = flat * node_->shape[i] + v;
        ++i;
    }
    return node_->data[flat];
}

template <typename Real>
Tensor<Real> Tensor<Real>::detach() const {
    return Tensor(node_->shape, node_->data, false);
}

template <typename Real>
void Tensor<Real>::backward() const {
    if (numel() != 1) throw ContractError("backward() needs a scalar root, got " + shape_str(shape()));
    // Iterative post-order DFS; parent order fixes the traversal.
    std::vector<Node<Real>*> order;
    std::vector<std::shared_ptr<Node<Real>>> keep;  // released closures may hold the last reference
    std::unordered_set<Node<Real>*> seen;
    std::vector<std::pair<Node<Real>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node<Real>* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) {
                keep.push_back(n->parents[next - 1]);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    node_->ensure_grad();
    node_->grad[0] += Real(1);
    const std::string& corrupt = debug::corrupt_backward();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<Real>* n = *it;
        if (!n->backward_fn) continue;
        n->ensure_grad();
        if (!corrupt.empty() && corrupt == n->op) {
            for (auto& g : n->grad) g *= Real(1.5);
        }
        n->backward_fn(*n);
        n->backward_fn = nullptr;
        n->parents.clear();
    }
}

template <typename Real>
Tensor<Real> make_result(Shape shape, std::vector<Real> data, const std::vector<Tensor<Real>>& parents,
                         const char* op, std::function<void(Node<Real>&)> backward_fn) {
    auto node = std::make_shared<Node<Real>>();
    node->shape = std::move(shape);
    node->data = std::move(data);
    node->op = op;
    if (grad_enabled()) {
        bool any = false;
        for (const auto& p : parents) any = any || (p.defined() && p.requires_grad());
        if (any) {
            node->requires_grad = true;
            for (const auto& p : parents) {
                if (p.defined()) node->parents.push_back(p.node_ptr());
            }
            node->backward_fn = std::move(backward_fn);
        }
    }
    return Tensor<Real>(std::move(node));
}

template <typename Real>
Tensor<Real> make_result(Shape shape, std::vector<Real> data, std::initializer_list<Tensor<Real>> parents,
                         const char* op, std::function<void(Node<Real>&)> backward_fn) {
    return make_result(std::move(shape), std::move(data), std::vector<Tensor<Real>>(parents), op,
                       std::move(backward_fn));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(Shape, std::vector<float>, const std::vector<Tensor<float>>&, const char*,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, const std::vector<Tensor<double>>&, const char*,
                                    std::function<void(Node<double>&)>);
template Tensor<float> make_result(Shape, std::vector<float>, std::initializer_list<Tensor<float>>, const char*,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::initializer_list<Tensor<double>>, const char*,
                                    std::function<void(Node<double>&)>);

}  // namespace tfk
