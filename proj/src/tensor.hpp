#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "common.hpp"

namespace nca {

// Dense row-major tensor with optional gradient storage. Copies are shallow:
// a Tensor is a handle to shared storage, so the value produced by an op and
// the value seen by the backward closure are the same buffer.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, real value, bool requires_grad = false);
    static Tensor from_vector(std::vector<real> data, std::vector<std::size_t> shape,
                              bool requires_grad = false);

    bool defined() const { return d_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return d_->shape; }
    std::size_t size() const { return d_->value.size(); }
    std::size_t dim(std::size_t i) const { return d_->shape.at(i); }
    std::size_t rank() const { return d_->shape.size(); }

    std::vector<real>& data() { return d_->value; }
    const std::vector<real>& data() const { return d_->value; }
    // Allocated lazily; zero-filled on first touch.
    std::vector<real>& grad();
    const std::vector<real>& grad() const;
    bool has_grad() const { return !d_->grad.empty(); }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool v);
    void zero_grad();

    real item() const;
    real at(std::size_t r, std::size_t c) const;

    bool same_storage(const Tensor& other) const { return d_ == other.d_; }

  private:
    struct Storage {
        std::vector<std::size_t> shape;
        std::vector<real> value;
        std::vector<real> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Storage> d_;
    friend class Graph;
};

// Tape of executed differentiable ops, recorded in execution order. Ops
// append themselves while a Graph::Scope is active; backward() replays the
// tape in reverse. Without an active scope ops run forward-only.
class Graph {
  public:
    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    class Scope {
      public:
        explicit Scope(Graph& g);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

      private:
        Graph* prev_;
    };

    static Graph* active();
    void record(Tensor output, std::function<void()> backward_fn);
    void backward(const Tensor& loss);
    std::size_t num_ops() const { return ops_.size(); }

  private:
    struct Op {
        Tensor output;
        std::function<void()> backward_fn;
    };
    std::vector<Op> ops_;
};

// ---- differentiable operations ------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);     // a[m×k] · b[k×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a[m×k] · b[n×k]ᵀ
Tensor matmul_tn(const Tensor& a, const Tensor& b);  // a[k×m]ᵀ · b[k×n]

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor scale(const Tensor& a, real c);

// mat[T×N] + vec[N] broadcast over rows.
Tensor add_rowvec(const Tensor& mat, const Tensor& vec);

// Treats the whole tensor as one vector; max-subtracted for stability.
Tensor softmax(const Tensor& v);

Tensor sum(const Tensor& a);  // scalar [1]

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<Tensor>& rows);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
inline Tensor row(const Tensor& a, std::size_t t) { return slice_rows(a, t, 1); }

// Sum of per-row cross entropies between logits[T×C] and the label broadcast
// to every row. Softmax is folded in (log-sum-exp on logits).
Tensor cross_entropy_with_logits(const Tensor& logits, std::size_t label);

// Overlap-add of segments[T×L] at the given hop, trimmed/zero-padded to
// out_len samples. Output shape [out_len].
Tensor overlap_add(const Tensor& segments, std::size_t hop, std::size_t out_len);

}  // namespace nca
