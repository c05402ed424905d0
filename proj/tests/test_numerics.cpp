#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "idcanvas/autodiff.hpp"
#include "idcanvas/errors.hpp"
#include "idcanvas/gradcheck.hpp"
#include "idcanvas/parameters.hpp"
#include "op_registry.hpp"

using namespace idcanvas;
using idcanvas::testing::random_tensor;

namespace {

Tensor triple_loop(const Tensor& a, const Tensor& b) {
    Tensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < a.cols(); ++p) s += a.at(i, p) * b.at(p, j);
            out.at(i, j) = s;
        }
    return out;
}

// Textbook softmax attention without masking support.
Tensor unmasked_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    const std::size_t n = q.rows(), d = q.cols();
    Tensor out({n, v.cols()});
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t c = 0; c < d; ++c) s[j] += q.at(i, c) * k.at(j, c);
            s[j] /= std::sqrt(static_cast<double>(d));
        }
        const double mx = *std::max_element(s.begin(), s.end());
        double z = 0.0;
        for (double& x : s) z += (x = std::exp(x - mx));
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t c = 0; c < v.cols(); ++c) out.at(i, c) += s[j] / z * v.at(j, c);
    }
    return out;
}

Tensor rows_of(const Tensor& t, std::size_t begin, std::size_t end) {
    return ad::slice_rows(ad::constant(t), begin, end).value();
}

}  // namespace

TEST_CASE("tensor invariants") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.size() == 6);
    CHECK(t.rows() == 2);
    CHECK(t.cols() == 3);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ContractViolation);
    Tensor empty({0, 4});
    CHECK(empty.cols() == 4);
}

TEST_CASE("matmul examples") {
    Rng rng(3);
    Tensor v = random_tensor({3, 1}, rng);
    CHECK(max_abs_diff(matmul(Tensor::identity(3), v), v) == 0.0);

    Tensor two({1, 1}, {2.0}), three({1, 1}, {3.0});
    CHECK(matmul(two, three)[0] == 6.0);

    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    CHECK(max_abs_diff(matmul(a, b), triple_loop(a, b)) < 1e-12);

    CHECK_THROWS_AS(matmul(a, a), ContractViolation);
}

TEST_CASE("matmul associativity") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng() % 5, k = 1 + rng() % 5, n = 1 + rng() % 5,
                          p = 1 + rng() % 5;
        Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng),
               c = random_tensor({n, p}, rng);
        CHECK(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-9);
    }
}

TEST_CASE("layer_norm examples") {
    Tensor constant_row({1, 5}, 3.25);
    auto y = ad::layer_norm(ad::constant(constant_row)).value();
    CHECK(y.max_abs() == 0.0);

    auto pair = ad::layer_norm(ad::constant(Tensor({1, 2}, {1.0, 3.0}))).value();
    CHECK(pair[0] == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(pair[1] == doctest::Approx(1.0).epsilon(1e-5));

    Rng rng(5);
    Tensor x = random_tensor({1, 64}, rng, 3.0);
    auto z = ad::layer_norm(ad::constant(x)).value();
    double mu = 0.0, var = 0.0;
    for (double v : z.data()) mu += v;
    mu /= 64.0;
    for (double v : z.data()) var += (v - mu) * (v - mu);
    var /= 64.0;
    CHECK(std::abs(mu) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-6);

    CHECK_THROWS_AS(ad::layer_norm(ad::constant(Tensor({2, 1}))), ContractViolation);
}

TEST_CASE("gelu examples") {
    CHECK(ad::gelu(ad::constant(Tensor({1}, {0.0}))).item() == 0.0);
    CHECK(ad::gelu(ad::constant(Tensor({1}, {12.0}))).item() == doctest::Approx(12.0).epsilon(1e-12));
    CHECK(std::abs(ad::gelu(ad::constant(Tensor({1}, {-12.0}))).item()) < 1e-12);

    Rng rng(17);
    Tensor pts = random_tensor({17}, rng, 2.0);
    auto r = check_gradient([](const ad::Var& x) { return ad::gelu(x); }, pts, 1e-5);
    CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("masked attention examples") {
    Rng rng(23);
    const std::size_t n = 6, d = 4;
    Tensor q = random_tensor({n, d}, rng), k = random_tensor({n, d}, rng);

    SUBCASE("all-ones mask with k = v matches unmasked oracle") {
        auto out = ad::masked_softmax_attention(ad::constant(q), ad::constant(k), ad::constant(k),
                                                AttentionMask::all_visible(n));
        CHECK(max_abs_diff(out.value(), unmasked_attention(q, k, k)) < 1e-12);
    }
    SUBCASE("identity mask returns v exactly") {
        AttentionMask eye(n, false);
        for (std::size_t i = 0; i < n; ++i) eye.set(i, i, true);
        Tensor v = random_tensor({n, d}, rng);
        auto out = ad::masked_softmax_attention(ad::constant(q), ad::constant(k), ad::constant(v), eye);
        CHECK(out.value() == v);
    }
    SUBCASE("block-diagonal mask equals independent per-block attention") {
        Tensor v = random_tensor({n, d}, rng);
        AttentionMask blocks(n, false);
        const std::size_t split = 2;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) blocks.set(i, j, (i < split) == (j < split));
        auto out = ad::masked_softmax_attention(ad::constant(q), ad::constant(k), ad::constant(v), blocks);
        Tensor top = unmasked_attention(rows_of(q, 0, split), rows_of(k, 0, split), rows_of(v, 0, split));
        Tensor bottom = unmasked_attention(rows_of(q, split, n), rows_of(k, split, n), rows_of(v, split, n));
        CHECK(max_abs_diff(rows_of(out.value(), 0, split), top) < 1e-12);
        CHECK(max_abs_diff(rows_of(out.value(), split, n), bottom) < 1e-12);
    }
    SUBCASE("rows of softmax weights sum to one") {
        AttentionMask m(n, true);
        m.set(0, 1, false);
        m.set(3, 0, false);
        Tensor ones({n, 1}, 1.0);
        auto out = ad::masked_softmax_attention(ad::constant(q), ad::constant(k), ad::constant(ones), m);
        for (std::size_t i = 0; i < n; ++i) CHECK(out.value()[i] == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("an all-zero mask row is a contract violation") {
        AttentionMask m(n, true);
        for (std::size_t j = 0; j < n; ++j) m.set(2, j, false);
        CHECK_THROWS_AS(ad::masked_softmax_attention(ad::constant(q), ad::constant(k), ad::constant(k), m),
                        ContractViolation);
    }
}

TEST_CASE("masked attention is permutation equivariant") {
    Rng rng(29);
    const std::size_t n = 7, d = 4;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor q = random_tensor({n, d}, rng), k = random_tensor({n, d}, rng),
               v = random_tensor({n, d}, rng);
        AttentionMask mask(n, true);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j && bernoulli(rng, 0.4)) mask.set(i, j, false);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);

        AttentionMask permuted(n, false);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) permuted.set(i, j, mask.allowed(perm[i], perm[j]));

        auto base = ad::masked_softmax_attention(ad::constant(q), ad::constant(k), ad::constant(v), mask);
        auto pq = ad::gather_rows(ad::constant(q), perm), pk = ad::gather_rows(ad::constant(k), perm),
             pv = ad::gather_rows(ad::constant(v), perm);
        auto out = ad::masked_softmax_attention(pq, pk, pv, permuted);
        Tensor expected = ad::gather_rows(base, perm).value();
        CHECK(max_abs_diff(out.value(), expected) < 1e-12);
    }
}

TEST_CASE("check_gradient examples") {
    Rng rng(31);
    Tensor w = random_tensor({4, 3}, rng);
    auto linear = [&](const ad::Var& x) { return ad::matmul(x, ad::constant(w)); };
    CHECK(check_gradient(linear, random_tensor({2, 4}, rng), 1e-3).max_rel_error < 1e-10);

    auto ln = check_gradient([](const ad::Var& x) { return ad::layer_norm(x); },
                             random_tensor({4, 8}, rng), 1e-5);
    CHECK(ln.max_rel_error < 1e-5);

    CHECK_THROWS_AS(check_gradient(linear, random_tensor({2, 4}, rng), 1e-2), ContractViolation);

    auto blowup = [](const ad::Var& x) { return ad::scale(x, 1.0 / (x.value()[0] - 0.5)); };
    auto bad = check_gradient(blowup, Tensor({1}, {0.5}), 1e-5);
    CHECK(bad.non_finite);
}

TEST_CASE("every registered op passes finite differences at 10 random points") {
    for (const auto& op : idcanvas::testing::differentiable_ops()) {
        Rng rng(derive_seed(99, op.name.size(), op.name[0]));
        double worst = 0.0;
        for (int point = 0; point < 10; ++point) {
            auto r = check_gradient(op.fn, random_tensor(op.input_shape, rng), 1e-5, 1000 + point);
            CHECK_MESSAGE(!r.non_finite, op.name);
            worst = std::max(worst, r.max_rel_error);
        }
        CHECK_MESSAGE(worst < 1e-4, op.name << " max rel err " << worst);
    }
}

TEST_CASE("parameter names are unique") {
    ParameterStore store;
    store.add("w", Tensor({2}));
    CHECK_THROWS_AS(store.add("w", Tensor({2})), ContractViolation);
    Rng rng(1);
    auto zero = Linear::create(store, "head", 3, 2, rng, 0.0);
    CHECK(zero.weight.value().max_abs() == 0.0);
    CHECK(store.count() == 3);
}
