#include "protofs/diff/tape.hpp"

#include <unordered_map>

#include "protofs/core/errors.hpp"

namespace protofs {

bool Tape::wants(std::initializer_list<const Tensor*> inputs) const {
    if (!recording()) return false;
    for (const auto* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void Tape::record(std::string op, std::vector<Tensor> inputs, Tensor output, std::function<void()> backward) {
    nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::reorder(std::span<const std::size_t> order) {
    if (order.size() != nodes_.size()) throw ContractError("reorder: permutation size mismatch");
    std::vector<bool> seen(nodes_.size(), false);
    for (auto i : order) {
        if (i >= nodes_.size() || seen[i]) throw ContractError("reorder: not a permutation");
        seen[i] = true;
    }
    std::unordered_map<const void*, std::size_t> producer;
    for (std::size_t pos = 0; pos < order.size(); ++pos) producer[nodes_[order[pos]].output.id()] = pos;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        for (const auto& in : nodes_[order[pos]].inputs) {
            auto it = producer.find(in.id());
            if (it != producer.end() && it->second >= pos) {
                throw ContractError("reorder: node '" + nodes_[order[pos]].op + "' would precede its input");
            }
        }
    }
    std::vector<Node> next;
    next.reserve(nodes_.size());
    for (auto i : order) next.push_back(std::move(nodes_[i]));
    nodes_ = std::move(next);
}

void backward(const Tensor& loss, Tape& tape) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward: loss must be a scalar, got " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
    }
    const auto nodes = tape.nodes();
    bool produced = false;
    for (const auto& node : nodes) {
        if (node.output.id() == loss.id()) produced = true;
    }
    if (!produced) throw ContractError("backward: loss was not produced through this tape");

    for (const auto& node : nodes) {
        Tensor out = node.output;
        out.grad_mut();
        out.zero_grad();
    }
    Tensor seed = loss;
    seed.grad_mut()[0] = 1.0;
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) it->backward();
}

} // namespace protofs
