#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcvae::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape &shape);
std::string to_string(const Shape &shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One recorded value in the computation graph. Ids grow monotonically, so
/// every input of a node has a smaller id than the node itself.
struct Node {
    std::uint64_t id = 0;
    const char *op = "leaf";
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the inputs' grads.
    std::function<void(Node &)> backward;

    bool is_leaf() const { return inputs.empty(); }
    std::vector<double> &grad_buffer();
};

std::uint64_t next_node_id();

/// Shared handle to a graph node. Copies alias the same storage.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value) { return from({1}, {value}); }

    bool defined() const { return node_ != nullptr; }
    const Shape &shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const { return node_->value.size(); }
    std::uint64_t id() const { return node_->id; }
    const char *op() const { return node_->op; }

    std::span<const double> data() const { return node_->value; }
    std::span<double> mutable_data() { return node_->value; }
    double operator[](std::size_t i) const { return node_->value[i]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on);
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad();

    /// Same values, cut from the graph.
    Tensor detach() const;
    /// Independent deep copy of the values (leaf, same requires_grad).
    Tensor clone() const;

    Node &node() const { return *node_; }
    const std::shared_ptr<Node> &ptr() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Build an op result. When no input requires grad the node is detached from
/// its inputs and `backward` is dropped.
Tensor make_result(const char *op, Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, std::function<void(Node &)> backward);

/// Reverse sweep from a scalar loss. Leaf grads accumulate across calls;
/// interior grads are reset at the start of every sweep. Returns the number
/// of nodes visited.
std::size_t backward(const Tensor &loss);

/// Throws if any value is NaN or infinite.
void check_finite(const Tensor &t, const char *where);

} // namespace mcvae::ad
