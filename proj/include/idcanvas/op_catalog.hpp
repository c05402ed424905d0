#pragma once

// Catalogue of every differentiable primitive, each wrapped as a unary
// function of one input tensor so a single harness can finite-difference it.

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "idcanvas/attention_mask.hpp"
#include "idcanvas/autodiff.hpp"
#include "idcanvas/rng.hpp"

namespace idcanvas::checks {

struct RegisteredOp {
    std::string name;
    Shape input_shape;
    std::function<ad::Var(const ad::Var&)> fn;
};

inline Tensor random_tensor(Shape shape, Rng& rng, double sd = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = normal(rng, 0.0, sd);
    return t;
}

inline std::vector<RegisteredOp> differentiable_ops() {
    Rng rng(1234);
    auto B = std::make_shared<Tensor>(random_tensor({4, 3}, rng));
    auto A = std::make_shared<Tensor>(random_tensor({2, 5}, rng));
    auto other = std::make_shared<Tensor>(random_tensor({3, 4}, rng));
    auto bias = std::make_shared<Tensor>(random_tensor({4}, rng));
    auto kv = std::make_shared<Tensor>(random_tensor({5, 4}, rng));
    auto cos_t = std::make_shared<Tensor>(Shape{3, 2});
    auto sin_t = std::make_shared<Tensor>(Shape{3, 2});
    for (std::size_t i = 0; i < 6; ++i) {
        const double ang = uniform(rng, -3.0, 3.0);
        (*cos_t)[i] = std::cos(ang);
        (*sin_t)[i] = std::sin(ang);
    }
    AttentionMask mask(5, true);
    mask.set(0, 3, false);
    mask.set(2, 1, false);
    mask.set(4, 0, false);

    std::vector<RegisteredOp> ops;
    ops.push_back({"matmul_left", {3, 4}, [B](const ad::Var& x) { return ad::matmul(x, ad::constant(*B)); }});
    ops.push_back({"matmul_right", {5, 4}, [A](const ad::Var& x) { return ad::matmul(ad::constant(*A), x); }});
    ops.push_back({"add", {3, 4}, [other](const ad::Var& x) { return ad::add(x, ad::mul(x, ad::constant(*other))); }});
    ops.push_back({"sub", {3, 4}, [other](const ad::Var& x) { return ad::sub(ad::constant(*other), ad::mul(x, x)); }});
    ops.push_back({"mul", {3, 4}, [](const ad::Var& x) { return ad::mul(x, x); }});
    ops.push_back({"scale_add_scalar", {3, 4}, [](const ad::Var& x) { return ad::add_scalar(ad::scale(x, -1.7), 0.3); }});
    ops.push_back({"add_row", {3, 4}, [bias](const ad::Var& x) { return ad::add_row(ad::mul(x, x), ad::constant(*bias)); }});
    ops.push_back({"add_row_bias_grad", {4}, [other](const ad::Var& x) { return ad::mul(ad::add_row(ad::constant(*other), x), ad::constant(*other)); }});
    ops.push_back({"gelu", {3, 4}, [](const ad::Var& x) { return ad::gelu(ad::scale(x, 2.0)); }});
    ops.push_back({"layer_norm", {4, 8}, [](const ad::Var& x) { return ad::layer_norm(x); }});
    ops.push_back({"reshape", {3, 4}, [](const ad::Var& x) { return ad::mul(ad::reshape(x, {4, 3}), ad::reshape(x, {4, 3})); }});
    ops.push_back({"gather_rows", {3, 4}, [](const ad::Var& x) {
                       const std::size_t rows[] = {2, 0, 2, 1};
                       return ad::mul(ad::gather_rows(x, rows), ad::gather_rows(x, rows));
                   }});
    ops.push_back({"gather", {3, 4}, [](const ad::Var& x) {
                       auto g = ad::gather(x, {11, 0, 5, 5, 7, 2}, {2, 3});
                       return ad::mul(g, g);
                   }});
    ops.push_back({"concat_rows", {3, 4}, [other](const ad::Var& x) {
                       const ad::Var parts[] = {x, ad::constant(*other), ad::mul(x, x)};
                       return ad::concat_rows(parts);
                   }});
    ops.push_back({"concat_cols", {3, 4}, [other](const ad::Var& x) {
                       const ad::Var parts[] = {ad::mul(x, x), ad::constant(*other), x};
                       return ad::concat_cols(parts);
                   }});
    ops.push_back({"slice_rows", {3, 4}, [](const ad::Var& x) { auto s = ad::slice_rows(x, 1, 3); return ad::mul(s, s); }});
    ops.push_back({"slice_cols", {3, 4}, [](const ad::Var& x) { auto s = ad::slice_cols(x, 1, 3); return ad::mul(s, s); }});
    ops.push_back({"mean_rows", {3, 4}, [](const ad::Var& x) { return ad::mean_rows(ad::mul(x, x)); }});
    ops.push_back({"sum", {3, 4}, [](const ad::Var& x) { return ad::sum(ad::mul(x, x)); }});
    ops.push_back({"mean", {3, 4}, [](const ad::Var& x) { return ad::mean(ad::mul(x, x)); }});
    ops.push_back({"mse", {3, 4}, [other](const ad::Var& x) { return ad::mse(x, ad::constant(*other)); }});
    ops.push_back({"l2_normalize", {1, 6}, [](const ad::Var& x) { return ad::l2_normalize(x); }});
    ops.push_back({"cosine", {1, 6}, [](const ad::Var& x) {
                       return ad::cosine(x, ad::add_scalar(ad::mul(x, x), 0.5));
                   }});
    ops.push_back({"attention_q", {5, 4}, [kv, mask](const ad::Var& x) {
                       return ad::masked_softmax_attention(x, ad::constant(*kv), ad::constant(*kv), mask);
                   }});
    ops.push_back({"attention_kv", {5, 4}, [kv, mask](const ad::Var& x) {
                       return ad::masked_softmax_attention(ad::constant(*kv), x, ad::scale(x, 0.5), mask);
                   }});
    ops.push_back({"attention_self", {5, 4}, [mask](const ad::Var& x) {
                       return ad::masked_softmax_attention(x, x, x, mask);
                   }});
    ops.push_back({"rotate_pairs", {3, 4}, [cos_t, sin_t](const ad::Var& x) {
                       return ad::mul(ad::rotate_pairs(x, cos_t, sin_t), x);
                   }});
    return ops;
}

}  // namespace idcanvas::checks
