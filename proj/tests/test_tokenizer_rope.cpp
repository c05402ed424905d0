#include <cmath>

#include "doctest.h"
#include "idcanvas/errors.hpp"
#include "idcanvas/image.hpp"
#include "idcanvas/tokenizer.hpp"
#include "op_registry.hpp"

using namespace idcanvas;
using idcanvas::testing::random_tensor;

namespace {

double dot_rows(const Tensor& a, std::size_t ra, const Tensor& b, std::size_t rb) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(ra, c) * b.at(rb, c);
    return s;
}

std::vector<std::uint8_t> random_bits(Rng& rng, std::size_t n, double p) {
    std::vector<std::uint8_t> bits(n);
    for (auto& b : bits) b = bernoulli(rng, p) ? 1 : 0;
    return bits;
}

}  // namespace

TEST_CASE("patch_embed examples") {
    SUBCASE("8x8 image with p=4 gives four tokens in row-major grid order") {
        const PatchGrid g = patch_grid(8, 8, 4);
        CHECK(g.size() == 4);
        const auto coords = grid_coords(g);
        CHECK(coords[0] == RopeCoord{0, 0, 0});
        CHECK(coords[1] == RopeCoord{0, 1, 0});
        CHECK(coords[2] == RopeCoord{0, 0, 1});
        CHECK(coords[3] == RopeCoord{0, 1, 1});
        Rng rng(1);
        auto img = ad::constant(random_tensor({8, 8, 3}, rng));
        auto tokens = patch_embed(img, 4, ad::constant(random_tensor({48, 5}, rng)),
                                  ad::constant(Tensor({5})));
        CHECK(tokens.rows() == 4);
        CHECK(tokens.cols() == 5);
        // token 1 is the top-right patch
        CHECK(patchify(img, 4).value().at(1, 0) == img.value().at(0, 4, 0));
    }
    SUBCASE("zero image with zero bias embeds to zero") {
        Rng rng(2);
        auto tokens = patch_embed(ad::constant(make_image(8, 8, 0.0)), 4,
                                  ad::constant(random_tensor({48, 6}, rng)), ad::constant(Tensor({6})));
        CHECK(tokens.value().max_abs() == 0.0);
    }
    SUBCASE("transposed orthonormal projection reconstructs the patches") {
        // W with orthonormal rows ([12, 16]) so W W^T = I and P = (P W) W^T.
        Rng rng(3);
        Tensor w = random_tensor({12, 16}, rng);
        for (std::size_t i = 0; i < 12; ++i) {
            for (std::size_t j = 0; j < i; ++j) {
                const double proj = dot_rows(w, i, w, j);
                for (std::size_t c = 0; c < 16; ++c) w.at(i, c) -= proj * w.at(j, c);
            }
            const double n = std::sqrt(dot_rows(w, i, w, i));
            for (std::size_t c = 0; c < 16; ++c) w.at(i, c) /= n;
        }
        auto img = ad::constant(random_tensor({6, 4, 3}, rng));
        auto tokens = patch_embed(img, 2, ad::constant(w), ad::constant(Tensor({16})));
        Tensor recon = matmul(tokens.value(), transpose(w));
        auto back = unpatchify(ad::constant(recon), 6, 4, 3, 2);
        CHECK(max_abs_diff(back.value(), img.value()) < 1e-12);
    }
    SUBCASE("indivisible extents are configuration errors") {
        CHECK_THROWS_AS(patch_grid(10, 8, 4), ConfigError);
        CHECK_THROWS_AS(patchify(ad::constant(make_image(8, 6)), 4), ConfigError);
    }
}

TEST_CASE("unpatchify inverts patchify exactly") {
    Rng rng(5);
    Tensor img = random_tensor({12, 8, 3}, rng);
    auto back = unpatchify(patchify(ad::constant(img), 4), 12, 8, 3, 4);
    CHECK(back.value() == img);
}

TEST_CASE("downsample_mask examples") {
    const std::size_t H = 16, W = 12, p = 4;
    CHECK(downsample_mask(std::vector<std::uint8_t>(H * W, 0), H, W, p) ==
          std::vector<std::uint8_t>(12, 0));

    std::vector<std::uint8_t> single(H * W, 0);
    single[9 * W + 6] = 1;
    auto cells = downsample_mask(single, H, W, p);
    int count = 0;
    for (auto c : cells) count += c;
    CHECK(count == 1);
    CHECK(cells[2 * 3 + 1] == 1);

    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        auto mask = random_bits(rng, H * W, 0.02);
        auto got = downsample_mask(mask, H, W, p);
        for (std::size_t gy = 0; gy < H / p; ++gy)
            for (std::size_t gx = 0; gx < W / p; ++gx) {
                bool any = false;
                for (std::size_t y = gy * p; y < gy * p + p; ++y)
                    for (std::size_t x = gx * p; x < gx * p + p; ++x) any = any || mask[y * W + x];
                CHECK(got[gy * (W / p) + gx] == (any ? 1 : 0));
            }
    }
}

TEST_CASE("prune_identity_tokens examples") {
    Rng rng(11);
    const PatchGrid g{4, 4};
    auto tokens = ad::constant(random_tensor({16, 3}, rng));

    auto all = prune_identity_tokens(tokens, std::vector<std::uint8_t>(16, 1), g);
    CHECK(all.tokens.value() == tokens.value());
    const auto base = grid_coords(g);
    for (std::size_t i = 0; i < 16; ++i)
        CHECK(all.coords[i] == RopeCoord{1, base[i].x, base[i].y});

    auto none = prune_identity_tokens(tokens, std::vector<std::uint8_t>(16, 0), g);
    CHECK(none.tokens.rows() == 0);
    CHECK(none.coords.empty());

    std::vector<std::uint8_t> checker(16);
    for (std::size_t i = 0; i < 16; ++i) checker[i] = ((i % 4) + (i / 4)) % 2 == 0;
    auto kept = prune_identity_tokens(tokens, checker, g);
    CHECK(kept.tokens.rows() == 8);
    std::size_t k = 0;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            if ((x + y) % 2 == 0) {
                CHECK(kept.coords[k] == RopeCoord{1, x, y});
                for (std::size_t c = 0; c < 3; ++c)
                    CHECK(kept.tokens.value().at(k, c) == tokens.value().at(static_cast<std::size_t>(y * 4 + x), c));
                ++k;
            }

    CHECK_THROWS_AS(prune_identity_tokens(tokens, std::vector<std::uint8_t>(9, 1), g), ContractViolation);
}

TEST_CASE("prune after embed follows row-major mask enumeration") {
    Rng rng(13);
    for (int trial = 0; trial < 10; ++trial) {
        auto img = ad::constant(random_tensor({16, 16, 3}, rng));
        auto emb = patch_embed(img, 4, ad::constant(random_tensor({48, 8}, rng)),
                               ad::constant(random_tensor({8}, rng)));
        auto mask = random_bits(rng, 16, 0.4);
        auto kept = prune_identity_tokens(emb, mask, {4, 4});
        std::size_t k = 0;
        for (std::size_t cell = 0; cell < 16; ++cell) {
            if (!mask[cell]) continue;
            for (std::size_t c = 0; c < 8; ++c) CHECK(kept.tokens.value().at(k, c) == emb.value().at(cell, c));
            ++k;
        }
        CHECK(k == kept.tokens.rows());
    }
}

TEST_CASE("assemble_sequence examples") {
    Rng rng(17);
    const std::size_t d = 4;
    auto text = ad::constant(random_tensor({2, d}, rng));
    auto image = ad::constant(random_tensor({4, d}, rng));
    const auto icoords = grid_coords({2, 2});

    SUBCASE("no identities gives [T, I]") {
        auto seq = assemble_sequence(text, image, icoords, {});
        CHECK(seq.size() == 6);
        CHECK(seq.identity_count() == 0);
        CHECK(seq.coords[0] == RopeCoord{0, 0, 0});
        CHECK(seq.coords[5] == RopeCoord{0, 1, 1});
    }
    SUBCASE("segment offsets for 3 and 5 kept tokens") {
        IdentityTokens a{ad::constant(random_tensor({3, d}, rng)), {{1, 0, 0}, {1, 1, 0}, {1, 0, 1}}, {0, 1, 2}};
        IdentityTokens b{ad::constant(random_tensor({5, d}, rng)), std::vector<RopeCoord>(5, {1, 1, 1}), {3, 3, 3, 3, 3}};
        auto seq = assemble_sequence(text, image, icoords, {a, b});
        CHECK(seq.text().begin == 0);
        CHECK(seq.text().end == 2);
        CHECK(seq.image().begin == 2);
        CHECK(seq.image().end == 6);
        CHECK(seq.identity(0).begin == 6);
        CHECK(seq.identity(0).end == 9);
        CHECK(seq.identity(1).begin == 9);
        CHECK(seq.identity(1).end == 14);
        CHECK(seq.tokens.rows() == 14);
        // labels reconstruct the original segments exactly
        for (std::size_t s = 0; s < seq.segments.size(); ++s)
            for (std::size_t i = seq.segments[s].begin; i < seq.segments[s].end; ++i)
                CHECK(seq.branch[i] == seq.segments[s].label);
        for (std::size_t r = 0; r < 5; ++r)
            for (std::size_t c = 0; c < d; ++c) CHECK(seq.tokens.value().at(9 + r, c) == b.tokens.value().at(r, c));
    }
    SUBCASE("duplicate identity segments keep distinct labels") {
        IdentityTokens a{ad::constant(random_tensor({2, d}, rng)), {{1, 0, 0}, {1, 1, 0}}, {0, 1}};
        auto seq = assemble_sequence(text, image, icoords, {a, a});
        CHECK(seq.identity(0).label == BranchLabel::id(0));
        CHECK(seq.identity(1).label == BranchLabel::id(1));
        CHECK(seq.coords[6] == seq.coords[8]);
    }
    SUBCASE("width mismatch is a contract violation") {
        auto wide = ad::constant(random_tensor({2, d + 1}, rng));
        CHECK_THROWS_AS(assemble_sequence(wide, image, icoords, {}), ContractViolation);
    }
}

TEST_CASE("rope layout") {
    auto l16 = RopeLayout::make(16);
    CHECK(l16.type_dims == 4);
    CHECK(l16.x_dims == 6);
    CHECK(l16.y_dims == 6);
    auto l32 = RopeLayout::make(32);
    CHECK(l32.type_dims == 8);
    CHECK(l32.x_dims == 12);
    CHECK_THROWS_AS(RopeLayout::make(7), ConfigError);
    CHECK_THROWS_AS(RopeLayout::make(8), ConfigError);
}

TEST_CASE("apply_rope examples") {
    Rng rng(19);
    const auto layout = RopeLayout::make(16);
    Tensor x = random_tensor({5, 16}, rng);

    auto zero = apply_rope(ad::constant(x), build_rope_table(std::vector<RopeCoord>(5), layout));
    CHECK(zero.value() == x);

    std::vector<RopeCoord> coords;
    for (int i = 0; i < 5; ++i) coords.push_back({i % 2, static_cast<int>(rng() % 16), static_cast<int>(rng() % 16)});
    auto rotated = apply_rope(ad::constant(x), build_rope_table(coords, layout));
    for (std::size_t r = 0; r < 5; ++r)
        CHECK(std::abs(std::sqrt(dot_rows(rotated.value(), r, rotated.value(), r)) -
                       std::sqrt(dot_rows(x, r, x, r))) < 1e-12);

    // <rope(q, c1), rope(k, c2)> depends only on c1 - c2
    for (int trial = 0; trial < 20; ++trial) {
        Tensor q = random_tensor({1, 16}, rng), k = random_tensor({1, 16}, rng);
        RopeCoord c1{static_cast<int>(rng() % 2), static_cast<int>(rng() % 16), static_cast<int>(rng() % 16)};
        RopeCoord c2{static_cast<int>(rng() % 2), static_cast<int>(rng() % 16), static_cast<int>(rng() % 16)};
        const int sx = static_cast<int>(rng() % 9) - 4, sy = static_cast<int>(rng() % 9) - 4;
        RopeCoord d1{c1.type_axis, c1.x + sx, c1.y + sy}, d2{c2.type_axis, c2.x + sx, c2.y + sy};
        auto rq = [&](const Tensor& v, RopeCoord c) {
            return apply_rope(ad::constant(v), build_rope_table({c}, layout)).value();
        };
        const double a = dot_rows(rq(q, c1), 0, rq(k, c2), 0);
        const double b = dot_rows(rq(q, d1), 0, rq(k, d2), 0);
        CHECK(std::abs(a - b) < 1e-12);
    }
}

TEST_CASE("image and identity tokens at one position differ only through the type band") {
    const auto layout = RopeLayout::make(32);
    std::vector<RopeCoord> img, ids;
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            img.push_back({0, x, y});
            ids.push_back({1, x, y});
        }
    auto a = build_rope_table(img, layout, true);
    auto b = build_rope_table(ids, layout, true);
    CHECK(*a.cos == *b.cos);
    CHECK(*a.sin == *b.sin);
    auto c = build_rope_table(ids, layout, false);
    CHECK_FALSE(*a.cos == *c.cos);
    // outside the type band the full tables agree too
    auto full_img = build_rope_table(img, layout, false);
    for (std::size_t r = 0; r < img.size(); ++r)
        for (std::size_t j = layout.type_dims / 2; j < layout.head_dim / 2; ++j) {
            CHECK(full_img.cos->at(r, j) == c.cos->at(r, j));
            CHECK(full_img.sin->at(r, j) == c.sin->at(r, j));
        }
}
