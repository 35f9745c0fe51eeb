#pragma once

#include <map>
#include <set>
#include <string>

#include "dyenet/rng.hpp"
#include "dyenet/tensor.hpp"

namespace dyenet {

// Named parameter collection. std::map keeps iteration in key order, which
// makes the SGD update and checkpoint layout independent of insertion order.
template <typename T>
struct ParamStore {
    std::map<std::string, TensorPtr<T>> params;
    std::map<std::string, TensorPtr<T>> velocity;  // lazily created, same keys
    std::set<std::string> frozen;                  // excluded from sgd updates

    TensorPtr<T>& at(const std::string& key) {
        auto it = params.find(key);
        require(it != params.end(), "param store: unknown parameter '" + key + "'");
        return it->second;
    }

    const TensorPtr<T>& at(const std::string& key) const {
        auto it = params.find(key);
        require(it != params.end(), "param store: unknown parameter '" + key + "'");
        return it->second;
    }

    bool has(const std::string& key) const { return params.count(key) != 0; }

    TensorPtr<T> add(const std::string& key, const Shape& shape, T fill = T(0)) {
        require(!has(key), "param store: duplicate parameter '" + key + "'");
        auto t = make_tensor<T>(shape, fill);
        params[key] = t;
        return t;
    }

    // Kaiming fan-in init for conv (OxCxKxK) and fc (DxC) weights.
    TensorPtr<T> add_kaiming(const std::string& key, const Shape& shape, Rng& rng) {
        auto t = add(key, shape);
        size_t fan_in = 1;
        for (int i = 1; i < shape.rank; ++i) fan_in *= static_cast<size_t>(shape[i]);
        const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (T& v : t->data) v = static_cast<T>(rng.normal(0.0, stddev));
        return t;
    }

    void clear_grads() {
        for (auto& kv : params) kv.second->clear_grad();
    }

    void freeze_group(const std::string& prefix) {
        for (auto& kv : params)
            if (kv.first.rfind(prefix, 0) == 0) frozen.insert(kv.first);
    }

    template <typename U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& kv : params) out.params[kv.first] = cast_tensor<U>(*kv.second);
        out.frozen = frozen;
        return out;
    }
};

// SGD with momentum and coupled weight decay:
//   v <- momentum * v + grad + weight_decay * w
//   w <- w - lr * v
// Every non-frozen parameter must carry a gradient; a missing one means the
// graph silently dropped a parameter, which we refuse to paper over.
template <typename T>
void sgd_momentum_step(ParamStore<T>& store, double lr, double momentum, double weight_decay) {
    for (auto& kv : store.params) {
        if (store.frozen.count(kv.first)) continue;
        Tensor<T>& w = *kv.second;
        require(w.has_grad(), "sgd: parameter '" + kv.first + "' has no gradient");
        auto vit = store.velocity.find(kv.first);
        if (vit == store.velocity.end())
            vit = store.velocity.emplace(kv.first, make_tensor<T>(w.shape)).first;
        Tensor<T>& v = *vit->second;
        for (size_t i = 0; i < w.data.size(); ++i) {
            const double vn = momentum * static_cast<double>(v.data[i]) +
                              static_cast<double>(w.grad[i]) +
                              weight_decay * static_cast<double>(w.data[i]);
            v.data[i] = static_cast<T>(vn);
            w.data[i] = static_cast<T>(static_cast<double>(w.data[i]) - lr * vn);
        }
    }
    for (auto& kv : store.params) kv.second->clear_grad();
}

}  // namespace dyenet
