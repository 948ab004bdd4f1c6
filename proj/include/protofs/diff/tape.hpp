#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "protofs/diff/tensor.hpp"

namespace protofs {

/// Ordered record of differentiable operations for one forward pass.
///
/// An operation is recorded only when the tape is recording and at least one
/// input requires a gradient. Nodes are appended in execution order, which is
/// a topological order of the computation graph.
class Tape {
public:
    enum class Mode { Record, NoGrad };

    struct Node {
        std::string op;
        std::vector<Tensor> inputs;
        Tensor output;
        /// Reads output.grad() and accumulates into the inputs' gradients.
        std::function<void()> backward;
    };

    explicit Tape(Mode mode = Mode::Record) : mode_(mode) {}

    bool recording() const { return mode_ == Mode::Record; }
    /// True when an op over these inputs must be recorded.
    bool wants(std::initializer_list<const Tensor*> inputs) const;

    void record(std::string op, std::vector<Tensor> inputs, Tensor output, std::function<void()> backward);

    std::span<const Node> nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    /// Reorders nodes; `order[i]` is the old position of the new i-th node.
    /// Throws ContractError unless the result is still topologically sorted.
    void reorder(std::span<const std::size_t> order);

private:
    Mode mode_;
    std::vector<Node> nodes_;
};

/// Populates gradients of every requires_grad tensor reachable from `loss`.
/// Intermediate gradients are reset first; leaf gradients accumulate across
/// calls, so training loops must zero parameter gradients each step.
void backward(const Tensor& loss, Tape& tape);

} // namespace protofs
