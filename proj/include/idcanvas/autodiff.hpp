#pragma once

// Reverse-mode differentiation over whole tensors. Each op computes its
// forward value eagerly and records a hand-derived backward closure; calling
// backward() on a scalar result walks the recorded graph in reverse
// topological order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "idcanvas/attention_mask.hpp"
#include "idcanvas/tensor.hpp"

namespace idcanvas::ad {

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;
    bool requires_grad = false;

    Tensor& grad_buffer();
    void accumulate(const Tensor& g);
};

class Var {
   public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t rows() const { return node_->value.rows(); }
    std::size_t cols() const { return node_->value.cols(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool valid() const { return node_ != nullptr; }
    double item() const;

    void zero_grad() const;
    Node& node() const { return *node_; }
    const std::shared_ptr<Node>& ptr() const { return node_; }

   private:
    std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var variable(Tensor value);

// Seeds d(root)/d(root) = 1 and accumulates gradients into every reachable
// node that requires them. root must hold a single element.
void backward(const Var& root);

// ---- elementwise and broadcast ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row(const Var& a, const Var& row);  // a: [m,n], row: [n] or [1,n]
Var gelu(const Var& a);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);
Var linear(const Var& x, const Var& weight, const Var& bias);  // x W + b

// ---- normalization ----
// Parameter-free normalization of each row to zero mean and unit variance.
Var layer_norm(const Var& a, double eps = 1e-6);

// ---- structure ----
Var reshape(const Var& a, Shape shape);
Var gather_rows(const Var& a, std::span<const std::size_t> rows);
// out.flat[i] = a.flat[index[i]]; backward scatter-adds.
Var gather(const Var& a, std::vector<std::size_t> index, Shape out_shape);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var mean_rows(const Var& a);  // [m,n] -> [1,n]

// ---- reductions and losses ----
Var sum(const Var& a);
Var mean(const Var& a);
Var mse(const Var& pred, const Var& target);  // mean of squared differences
Var l2_normalize(const Var& a, double eps = 1e-12);
Var cosine(const Var& a, const Var& b, double eps = 1e-12);

// ---- attention ----
// Single-head scaled dot-product attention; keys with mask == 0 get -inf
// logits. Every query row must have at least one allowed key.
Var masked_softmax_attention(const Var& q, const Var& k, const Var& v, const AttentionMask& mask);

// Rotates consecutive pairs (2j, 2j+1) of every row by angle[row][j].
// cos_table and sin_table are [rows, cols/2].
Var rotate_pairs(const Var& x, std::shared_ptr<const Tensor> cos_table,
                 std::shared_ptr<const Tensor> sin_table);

}  // namespace idcanvas::ad
