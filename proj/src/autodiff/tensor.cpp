#include "mcvae/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace mcvae::ad {

std::size_t numel(const Shape &shape)
{
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string to_string(const Shape &shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

std::uint64_t next_node_id()
{
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

std::vector<double> &Node::grad_buffer()
{
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad)
{
    const auto n = ad::numel(shape);
    return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad)
{
    if (ad::numel(shape) != values.size())
        throw ShapeError("tensor shape " + to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
    auto node = std::make_shared<Node>();
    node->id = next_node_id();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

std::size_t Tensor::dim(std::size_t axis) const
{
    if (axis >= shape().size())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape()));
    return shape()[axis];
}

double Tensor::item() const
{
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return node_->value[0];
}

void Tensor::set_requires_grad(bool on)
{
    node_->requires_grad = on;
    if (!on) node_->grad.clear();
}

void Tensor::zero_grad()
{
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const
{
    auto node = std::make_shared<Node>();
    node->id = next_node_id();
    node->op = "detach";
    node->shape = shape();
    node->value = node_->value;
    return Tensor(std::move(node));
}

Tensor Tensor::clone() const
{
    auto t = detach();
    t.node().op = "leaf";
    t.node().requires_grad = requires_grad();
    return t;
}

Tensor make_result(const char *op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, std::function<void(Node &)> backward)
{
    auto node = std::make_shared<Node>();
    node->id = next_node_id();
    node->op = op;
    node->shape = std::move(shape);
    node->value = std::move(value);
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor &t) { return t.requires_grad(); });
    if (any) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto &t : inputs) node->inputs.push_back(t.ptr());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

std::size_t backward(const Tensor &loss)
{
    if (!loss.defined() || loss.numel() != 1)
        throw ShapeError("backward() needs a scalar loss, got " +
                         (loss.defined() ? to_string(loss.shape()) : std::string("undefined")));
    if (!loss.requires_grad())
        throw std::logic_error("backward(): loss does not depend on any tensor that requires grad");

    std::vector<Node *> order;
    std::unordered_set<Node *> seen;
    std::vector<Node *> stack{loss.ptr().get()};
    while (!stack.empty()) {
        Node *n = stack.back();
        stack.pop_back();
        if (!seen.insert(n).second) continue;
        order.push_back(n);
        for (auto &in : n->inputs)
            if (in->requires_grad) stack.push_back(in.get());
    }
    std::sort(order.begin(), order.end(), [](Node *a, Node *b) { return a->id > b->id; });

    for (Node *n : order)
        if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
    loss.node().grad_buffer()[0] += 1.0;

    for (Node *n : order)
        if (n->backward) n->backward(*n);
    return order.size();
}

void check_finite(const Tensor &t, const char *where)
{
    for (double v : t.data())
        if (!std::isfinite(v))
            throw std::domain_error(std::string("non-finite value in ") + where);
}

} // namespace mcvae::ad
