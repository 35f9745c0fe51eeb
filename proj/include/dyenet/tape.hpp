#pragma once

#include <functional>
#include <vector>

#include "dyenet/errors.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

// Reverse-mode autodiff: every differentiable op optionally records a
// backward closure here during its forward pass. backward() seeds the root
// gradient and replays the closures in reverse order. Passing a null tape
// to an op runs it forward-only (inference mode).
template <typename T>
class Tape {
public:
    void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    void backward(const TensorPtr<T>& root) {
        require(root && root->numel() == 1, "Tape::backward: root must be a scalar");
        root->ensure_grad();
        root->grad[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    }

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    std::vector<std::function<void()>> nodes_;
};

}  // namespace dyenet
