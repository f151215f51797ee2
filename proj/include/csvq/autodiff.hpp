#pragma once

// Reverse-mode autodiff over whole tensors. Graphs are built per forward
// pass out of coarse ops (convolutions, recurrences, spectral transforms);
// gradients accumulate in a per-backward GradMap so shared parameter nodes
// can be used from several worker threads at once.

#include "csvq/tensor.hpp"

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

namespace csvq::ad {

template <typename T>
class GradMap;

template <typename T>
struct Node {
    Tensor<T> value;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(const Tensor<T>&, GradMap<T>&)> backward;
    bool needs_grad = false;
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
class GradMap {
  public:
    Tensor<T>& of(const Node<T>* n) {
        auto it = map_.find(n);
        if (it == map_.end()) it = map_.emplace(n, Tensor<T>(n->value.shape())).first;
        return it->second;
    }
    const Tensor<T>* find(const Node<T>* n) const {
        auto it = map_.find(n);
        return it == map_.end() ? nullptr : &it->second;
    }

  private:
    std::unordered_map<const Node<T>*, Tensor<T>> map_;
};

template <typename T>
Var<T> constant(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    return n;
}

template <typename T>
Var<T> leaf(Tensor<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->needs_grad = true;
    return n;
}

// Nodes with no differentiable parent are pruned to constants so inference
// graphs stay cheap and free eagerly.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(const Tensor<T>&, GradMap<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    for (const auto& p : parents) n->needs_grad |= p->needs_grad;
    if (n->needs_grad) {
        n->parents = std::move(parents);
        n->backward = std::move(backward);
    }
    return n;
}

template <typename T>
void backward(const Var<T>& root, GradMap<T>& grads) {
    CSVQ_REQUIRE(root->value.size() == 1, "backward expects a scalar root");
    if (!root->needs_grad) return;
    // reverse post-order over the needs_grad subgraph
    std::vector<Node<T>*> order;
    std::unordered_map<Node<T>*, bool> state;  // false = open, true = done
    std::vector<std::pair<Node<T>*, size_t>> stack{{root.get(), 0}};
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx == 0) {
            auto it = state.find(n);
            if (it != state.end()) {
                stack.pop_back();
                continue;
            }
            state[n] = false;
        }
        if (idx < n->parents.size()) {
            Node<T>* p = n->parents[idx].get();
            ++idx;
            if (p->needs_grad && !state.count(p)) stack.emplace_back(p, 0);
        } else {
            state[n] = true;
            order.push_back(n);
            stack.pop_back();
        }
    }
    grads.of(root.get())[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward) n->backward(grads.of(n), grads);
    }
}

// ---- elementwise ----

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    CSVQ_REQUIRE(a->value.same_shape(b->value), "add: shape mismatch");
    Tensor<T> out = a->value;
    out.arr() += b->value.arr();
    return make_op<T>(std::move(out), {a, b}, [a, b](const Tensor<T>& g, GradMap<T>& gm) {
        if (a->needs_grad) gm.of(a.get()).arr() += g.arr();
        if (b->needs_grad) gm.of(b.get()).arr() += g.arr();
    });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    CSVQ_REQUIRE(a->value.same_shape(b->value), "sub: shape mismatch");
    Tensor<T> out = a->value;
    out.arr() -= b->value.arr();
    return make_op<T>(std::move(out), {a, b}, [a, b](const Tensor<T>& g, GradMap<T>& gm) {
        if (a->needs_grad) gm.of(a.get()).arr() += g.arr();
        if (b->needs_grad) gm.of(b.get()).arr() -= g.arr();
    });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    CSVQ_REQUIRE(a->value.same_shape(b->value), "mul: shape mismatch");
    Tensor<T> out = a->value;
    out.arr() *= b->value.arr();
    return make_op<T>(std::move(out), {a, b}, [a, b](const Tensor<T>& g, GradMap<T>& gm) {
        if (a->needs_grad) gm.of(a.get()).arr() += g.arr() * b->value.arr();
        if (b->needs_grad) gm.of(b.get()).arr() += g.arr() * a->value.arr();
    });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
    Tensor<T> out = a->value;
    out.arr() *= c;
    return make_op<T>(std::move(out), {a}, [a, c](const Tensor<T>& g, GradMap<T>& gm) {
        if (a->needs_grad) gm.of(a.get()).arr() += g.arr() * c;
    });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
    Tensor<T> out = a->value;
    out.arr() = (out.arr() > T(0)).select(out.arr(), out.arr() * slope);
    return make_op<T>(std::move(out), {a}, [a, slope](const Tensor<T>& g, GradMap<T>& gm) {
        if (!a->needs_grad) return;
        auto ga = gm.of(a.get()).arr();
        ga += (a->value.arr() > T(0)).select(g.arr(), g.arr() * slope);
    });
}

template <typename T>
Var<T> tanh_op(const Var<T>& a) {
    Tensor<T> out = a->value;
    out.arr() = out.arr().tanh();
    auto n = make_op<T>(std::move(out), {a}, nullptr);
    if (n->needs_grad) {
        Var<T> self = n;  // value needed in backward; capture weakly via tensor copy
        Tensor<T> y = n->value;
        n->backward = [a, y](const Tensor<T>& g, GradMap<T>& gm) {
            gm.of(a.get()).arr() += g.arr() * (T(1) - y.arr() * y.arr());
        };
    }
    return n;
}

template <typename T>
Var<T> sigmoid_op(const Var<T>& a) {
    Tensor<T> out = a->value;
    out.arr() = T(1) / (T(1) + (-out.arr()).exp());
    auto n = make_op<T>(std::move(out), {a}, nullptr);
    if (n->needs_grad) {
        Tensor<T> y = n->value;
        n->backward = [a, y](const Tensor<T>& g, GradMap<T>& gm) {
            gm.of(a.get()).arr() += g.arr() * y.arr() * (T(1) - y.arr());
        };
    }
    return n;
}

// ---- structure ----

template <typename T>
Var<T> reshape(const Var<T>& a, Shape s) {
    Tensor<T> out = a->value.reshaped(std::move(s));
    return make_op<T>(std::move(out), {a}, [a](const Tensor<T>& g, GradMap<T>& gm) {
        if (a->needs_grad) gm.of(a.get()).arr() += g.arr();
    });
}

// Concatenate along the last axis; leading axes must match.
template <typename T>
Var<T> concat_last(const Var<T>& a, const Var<T>& b) {
    const Shape& sa = a->value.shape();
    const Shape& sb = b->value.shape();
    CSVQ_REQUIRE(sa.size() == sb.size() && !sa.empty(), "concat: rank mismatch");
    for (size_t i = 0; i + 1 < sa.size(); ++i)
        CSVQ_REQUIRE(sa[i] == sb[i], "concat: leading dims differ");
    const int ca = sa.back(), cb = sb.back();
    Shape so = sa;
    so.back() = ca + cb;
    Tensor<T> out(so);
    const int64_t rows = out.size() / (ca + cb);
    for (int64_t r = 0; r < rows; ++r) {
        std::copy_n(a->value.data() + r * ca, ca, out.data() + r * (ca + cb));
        std::copy_n(b->value.data() + r * cb, cb, out.data() + r * (ca + cb) + ca);
    }
    return make_op<T>(std::move(out), {a, b}, [a, b, ca, cb, rows](const Tensor<T>& g, GradMap<T>& gm) {
        if (a->needs_grad) {
            auto& ga = gm.of(a.get());
            for (int64_t r = 0; r < rows; ++r)
                for (int c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
        }
        if (b->needs_grad) {
            auto& gb = gm.of(b.get());
            for (int64_t r = 0; r < rows; ++r)
                for (int c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
        }
    });
}

// Keep the first `rows` rows of a 2-D tensor.
template <typename T>
Var<T> crop_rows(const Var<T>& a, int rows) {
    CSVQ_REQUIRE(a->value.rank() == 2 && rows <= a->value.dim(0), "crop_rows: bad shape");
    const int cols = a->value.dim(1);
    Tensor<T> out({rows, cols});
    std::copy_n(a->value.data(), static_cast<int64_t>(rows) * cols, out.data());
    return make_op<T>(std::move(out), {a}, [a, rows, cols](const Tensor<T>& g, GradMap<T>& gm) {
        if (!a->needs_grad) return;
        auto& ga = gm.of(a.get());
        for (int64_t i = 0; i < static_cast<int64_t>(rows) * cols; ++i) ga[i] += g[i];
    });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    CSVQ_REQUIRE(a->value.rank() == 2 && b->value.rank() == 2 && a->value.dim(1) == b->value.dim(0),
                 "matmul: incompatible shapes");
    const int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
    Tensor<T> out({m, n});
    out.mat(m, n).noalias() = a->value.mat(m, k) * b->value.mat(k, n);
    return make_op<T>(std::move(out), {a, b}, [a, b, m, k, n](const Tensor<T>& g, GradMap<T>& gm) {
        if (a->needs_grad)
            gm.of(a.get()).mat(m, k).noalias() += g.mat(m, n) * b->value.mat(k, n).transpose();
        if (b->needs_grad)
            gm.of(b.get()).mat(k, n).noalias() += a->value.mat(m, k).transpose() * g.mat(m, n);
    });
}

template <typename T>
Var<T> stop_grad(const Var<T>& a) {
    return constant(a->value);
}

// ---- reductions ----

template <typename T>
Var<T> sum(const Var<T>& a) {
    Tensor<T> out({1});
    out[0] = a->value.arr().sum();
    return make_op<T>(std::move(out), {a}, [a](const Tensor<T>& g, GradMap<T>& gm) {
        if (a->needs_grad) gm.of(a.get()).arr() += g[0];
    });
}

template <typename T>
Var<T> mean_sq_diff(const Var<T>& a, const Var<T>& b) {
    CSVQ_REQUIRE(a->value.same_shape(b->value), "mean_sq_diff: shape mismatch");
    const T inv_n = T(1) / static_cast<T>(a->value.size());
    Tensor<T> out({1});
    out[0] = ((a->value.arr() - b->value.arr()).square()).sum() * inv_n;
    return make_op<T>(std::move(out), {a, b}, [a, b, inv_n](const Tensor<T>& g, GradMap<T>& gm) {
        const T c = T(2) * inv_n * g[0];
        if (a->needs_grad) gm.of(a.get()).arr() += c * (a->value.arr() - b->value.arr());
        if (b->needs_grad) gm.of(b.get()).arr() -= c * (a->value.arr() - b->value.arr());
    });
}

template <typename T>
Var<T> mean_abs_diff(const Var<T>& a, const Var<T>& b) {
    CSVQ_REQUIRE(a->value.same_shape(b->value), "mean_abs_diff: shape mismatch");
    const T inv_n = T(1) / static_cast<T>(a->value.size());
    Tensor<T> out({1});
    out[0] = (a->value.arr() - b->value.arr()).abs().sum() * inv_n;
    return make_op<T>(std::move(out), {a, b}, [a, b, inv_n](const Tensor<T>& g, GradMap<T>& gm) {
        const T c = inv_n * g[0];
        auto sgn = (a->value.arr() - b->value.arr()).sign();
        if (a->needs_grad) gm.of(a.get()).arr() += c * sgn;
        if (b->needs_grad) gm.of(b.get()).arr() -= c * sgn;
    });
}

// c0 + sum_i coeff_i * scalar_i
template <typename T>
Var<T> affine_scalars(const std::vector<Var<T>>& xs, const std::vector<T>& coeffs, T c0 = T(0)) {
    CSVQ_REQUIRE(xs.size() == coeffs.size(), "affine_scalars: size mismatch");
    Tensor<T> out({1});
    out[0] = c0;
    for (size_t i = 0; i < xs.size(); ++i) {
        CSVQ_REQUIRE(xs[i]->value.size() == 1, "affine_scalars: non-scalar input");
        out[0] += coeffs[i] * xs[i]->value[0];
    }
    std::vector<Var<T>> parents(xs.begin(), xs.end());
    return make_op<T>(std::move(out), parents, [xs, coeffs](const Tensor<T>& g, GradMap<T>& gm) {
        for (size_t i = 0; i < xs.size(); ++i)
            if (xs[i]->needs_grad) gm.of(xs[i].get())[0] += coeffs[i] * g[0];
    });
}

}  // namespace csvq::ad
