// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace tfk {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);

template <typename Real>
struct Node {
    Shape shape;
    std::vector<Real> data;
    std::vector<Real> grad;  // empty until the first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    const char* op = "leaf";

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), Real(0));
    }
};

/// Handle to a dense row-major array that may participate in the gradient
/// tape. Copies share the underlying node, like framework tensors do.
template <typename Real>
class Tensor {
public:
    using value_type = Real;

    Tensor() = default;
    Tensor(Shape shape, std::vector<Real> data, bool requires_grad = false);
    explicit Tensor(std::shared_ptr<Node<Real>> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, Real value, bool requires_grad = false);
    static Tensor scalar(Real value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->data.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    /// Extent of `axis`; negative values count from the back.
    std::size_t dim(int axis) const;

    std::span<const Real> data() const { return node_->data; }
    std::span<Real> mutable_data() { return node_->data; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const Real> grad() const { return node_->grad; }
    std::span<Real> mutable_grad() {
        node_->ensure_grad();
        return node_->grad;
    }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    void zero_grad() { node_->grad.clear(); }

    Real item() const;
    Real at(std::initializer_list<std::size_t> index) const;

    /// Reverse-mode sweep from this scalar. Interior graph links are released
    /// as they are consumed.
    void backward() const;

    /// Value copy outside the tape.
    Tensor detach() const;

    Node<Real>* node() const { return node_.get(); }
    const std::shared_ptr<Node<Real>>& node_ptr() const { return node_; }

private:
    std::shared_ptr<Node<Real>> node_;
};

/// Disables tape recording on the current thread while alive.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

namespace debug {
/// Test hook: scales the upstream gradient entering every tape node whose op
/// name equals `op` by 1.5, yielding a deliberately wrong backward. Empty
/// string disables.
void set_corrupt_backward(std::string op);
const std::string& corrupt_backward();
}  // namespace debug

/// Builds a result tensor and links it to `parents` when recording is on and
/// any parent requires a gradient.
template <typename Real>
Tensor<Real> make_result(Shape shape, std::vector<Real> data, std::initializer_list<Tensor<Real>> parents,
                         const char* op, std::function<void(Node<Real>&)> backward_fn);

template <typename Real>
Tensor<Real> make_result(Shape shape, std::vector<Real> data, const std::vector<Tensor<Real>>& parents,
                         const char* op, std::function<void(Node<Real>&)> backward_fn);

}  // namespace tfk
