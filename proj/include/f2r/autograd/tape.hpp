#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "f2r/core/errors.hpp"
#include "f2r/core/tensor.hpp"

namespace f2r {
namespace ag {

using VarId = int32_t;

// Define-by-run reverse-mode tape. Ops append a node with a backward
// closure; backward() walks the nodes in reverse. Gradients are allocated
// lazily, so subgraphs that never feed the loss cost nothing on the way
// back. One tape instance is single-threaded; parallelism, when wanted,
// is one tape per sample.
template <class S>
class Tape {
public:
    VarId leaf(TensorT<S> v, bool needs_grad = false) {
        return push_impl(std::move(v), {}, nullptr, needs_grad);
    }

    VarId push(TensorT<S> out, std::vector<VarId> inputs,
               std::function<void(Tape&, VarId)> bwd) {
        bool ng = false;
        for (VarId i : inputs) ng = ng || needs_grad(i);
        return push_impl(std::move(out), std::move(inputs), std::move(bwd), ng);
    }

    const TensorT<S>& val(VarId id) const { return vals_[static_cast<std::size_t>(id)]; }
    TensorT<S>& val_mut(VarId id) { return vals_[static_cast<std::size_t>(id)]; }

    bool needs_grad(VarId id) const { return ng_[static_cast<std::size_t>(id)] != 0; }

    bool has_grad(VarId id) const { return !grads_[static_cast<std::size_t>(id)].empty(); }

    // Accumulation target; zero-initialized on first touch.
    TensorT<S>& grad(VarId id) {
        auto& g = grads_[static_cast<std::size_t>(id)];
        if (g.empty() && vals_[static_cast<std::size_t>(id)].numel() > 0)
            g = TensorT<S>(vals_[static_cast<std::size_t>(id)].shape);
        return g;
    }

    void backward(VarId loss) {
        if (val(loss).numel() != 1) throw InputError("backward: loss must be scalar");
        grad(loss).data[0] = S(1);
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            auto& nd = nodes_[i];
            if (!nd.bwd) continue;
            if (!ng_[i] || grads_[i].empty()) continue;
            nd.bwd(*this, static_cast<VarId>(i));
        }
    }

    std::size_t size() const { return vals_.size(); }

private:
    struct Node {
        std::vector<VarId> inputs;
        std::function<void(Tape&, VarId)> bwd;
    };

    VarId push_impl(TensorT<S> v, std::vector<VarId> inputs,
                    std::function<void(Tape&, VarId)> bwd, bool ng) {
        vals_.push_back(std::move(v));
        grads_.emplace_back();
        ng_.push_back(ng ? 1 : 0);
        nodes_.push_back(Node{std::move(inputs), std::move(bwd)});
        return static_cast<VarId>(vals_.size() - 1);
    }

    std::vector<TensorT<S>> vals_;
    std::vector<TensorT<S>> grads_;
    std::vector<uint8_t> ng_;
    std::vector<Node> nodes_;
};

}  // namespace ag
}  // namespace f2r
