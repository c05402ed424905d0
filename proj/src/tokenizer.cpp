#include "idcanvas/tokenizer.hpp"

#include <cmath>

#include "idcanvas/errors.hpp"
#include "idcanvas/log.hpp"

namespace idcanvas {

PatchGrid patch_grid(std::size_t height, std::size_t width, std::size_t patch) {
    if (patch == 0 || height % patch != 0 || width % patch != 0)
        throw ConfigError("image extents " + std::to_string(height) + "x" + std::to_string(width) +
                          " are not divisible by patch size " + std::to_string(patch));
    return {height / patch, width / patch};
}

namespace {

std::vector<std::size_t> patch_index(std::size_t h, std::size_t w, std::size_t c, std::size_t p) {
    const PatchGrid g = patch_grid(h, w, p);
    std::vector<std::size_t> idx;
    idx.reserve(h * w * c);
    for (std::size_t gy = 0; gy < g.rows; ++gy)
        for (std::size_t gx = 0; gx < g.cols; ++gx)
            for (std::size_t dy = 0; dy < p; ++dy)
                for (std::size_t dx = 0; dx < p; ++dx)
                    for (std::size_t k = 0; k < c; ++k)
                        idx.push_back(((gy * p + dy) * w + gx * p + dx) * c + k);
    return idx;
}

}  // namespace

ad::Var patchify(const ad::Var& image, std::size_t patch) {
    require(image.value().rank() == 3, "patchify expects an [H,W,C] image");
    const std::size_t h = image.shape()[0], w = image.shape()[1], c = image.shape()[2];
    const PatchGrid g = patch_grid(h, w, patch);
    return ad::gather(image, patch_index(h, w, c, patch), {g.size(), patch * patch * c});
}

ad::Var patch_embed(const ad::Var& image, std::size_t patch, const ad::Var& weight,
                    const ad::Var& bias) {
    return ad::linear(patchify(image, patch), weight, bias);
}

ad::Var unpatchify(const ad::Var& patches, std::size_t height, std::size_t width,
                   std::size_t channels, std::size_t patch) {
    const PatchGrid g = patch_grid(height, width, patch);
    require(patches.rows() == g.size() && patches.cols() == patch * patch * channels,
            "unpatchify: token shape does not match the image grid");
    const auto forward = patch_index(height, width, channels, patch);
    std::vector<std::size_t> inverse(forward.size());
    for (std::size_t i = 0; i < forward.size(); ++i) inverse[forward[i]] = i;
    return ad::gather(patches, std::move(inverse), {height, width, channels});
}

std::vector<RopeCoord> grid_coords(const PatchGrid& grid, int type_axis) {
    std::vector<RopeCoord> coords;
    coords.reserve(grid.size());
    for (std::size_t gy = 0; gy < grid.rows; ++gy)
        for (std::size_t gx = 0; gx < grid.cols; ++gx)
            coords.push_back({type_axis, static_cast<int>(gx), static_cast<int>(gy)});
    return coords;
}

std::vector<std::uint8_t> downsample_mask(const std::vector<std::uint8_t>& mask,
                                          std::size_t height, std::size_t width,
                                          std::size_t patch) {
    require(mask.size() == height * width, "downsample_mask: mask size mismatch");
    const PatchGrid g = patch_grid(height, width, patch);
    std::vector<std::uint8_t> out(g.size(), 0);
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            if (mask[y * width + x]) out[(y / patch) * g.cols + x / patch] = 1;
    return out;
}

IdentityTokens prune_identity_tokens(const ad::Var& canvas_tokens,
                                     const std::vector<std::uint8_t>& token_mask,
                                     const PatchGrid& grid) {
    require(canvas_tokens.rows() == grid.size() && token_mask.size() == grid.size(),
            "prune_identity_tokens: token count must equal the mask grid size");
    IdentityTokens out;
    for (std::size_t i = 0; i < token_mask.size(); ++i) {
        if (!token_mask[i]) continue;
        out.cells.push_back(i);
        out.coords.push_back({1, static_cast<int>(i % grid.cols), static_cast<int>(i / grid.cols)});
    }
    if (out.cells.empty()) {
        log_debug("identity mask is empty; identity segment has no tokens");
        out.tokens = ad::constant(Tensor({0, canvas_tokens.cols()}));
        return out;
    }
    out.tokens = ad::gather_rows(canvas_tokens, out.cells);
    return out;
}

TokenSequence assemble_sequence(const ad::Var& text_tokens, const ad::Var& image_tokens,
                                const std::vector<RopeCoord>& image_coords,
                                const std::vector<IdentityTokens>& identities) {
    const std::size_t d = image_tokens.cols();
    require(text_tokens.cols() == d, "assemble_sequence: text width differs from image width");
    require(image_coords.size() == image_tokens.rows(), "assemble_sequence: image coords mismatch");
    TokenSequence seq;
    std::vector<ad::Var> parts{text_tokens, image_tokens};

    auto push_segment = [&](BranchLabel label, std::size_t count) {
        const std::size_t begin = seq.coords.size();
        seq.segments.push_back({label, begin, begin + count});
    };

    push_segment(BranchLabel::text(), text_tokens.rows());
    for (std::size_t i = 0; i < text_tokens.rows(); ++i) {
        seq.coords.push_back({0, 0, 0});
        seq.branch.push_back(BranchLabel::text());
    }
    push_segment(BranchLabel::image(), image_tokens.rows());
    for (const auto& c : image_coords) {
        seq.coords.push_back({0, c.x, c.y});
        seq.branch.push_back(BranchLabel::image());
    }
    for (std::size_t i = 0; i < identities.size(); ++i) {
        const auto& id = identities[i];
        require(id.tokens.rows() == id.coords.size(), "identity tokens/coords mismatch");
        if (id.tokens.rows() > 0)
            require(id.tokens.cols() == d, "assemble_sequence: identity width differs");
        const auto label = BranchLabel::id(static_cast<int>(i));
        push_segment(label, id.coords.size());
        for (const auto& c : id.coords) {
            seq.coords.push_back({1, c.x, c.y});
            seq.branch.push_back(label);
        }
        parts.push_back(id.tokens);
    }
    seq.tokens = ad::concat_rows(parts);
    return seq;
}

RopeLayout RopeLayout::make(std::size_t head_dim, double base) {
    if (head_dim == 0 || head_dim % 2 != 0)
        throw ConfigError("rope head dim must be even, got " + std::to_string(head_dim));
    const std::size_t m = head_dim / 2;
    RopeLayout l;
    l.head_dim = head_dim;
    l.base = base;
    l.type_dims = 2 * ((m + 3) / 4);
    const std::size_t rest = head_dim - l.type_dims;
    if (rest == 0 || rest % 4 != 0)
        throw ConfigError("rope head dim " + std::to_string(head_dim) +
                          " cannot be split into whole-pair x/y bands");
    l.x_dims = rest / 2;
    l.y_dims = rest / 2;
    return l;
}

RopeTable build_rope_table(const std::vector<RopeCoord>& coords, const RopeLayout& layout,
                           bool drop_type_band) {
    const std::size_t pairs = layout.head_dim / 2;
    auto cos_t = std::make_shared<Tensor>(Shape{coords.size(), pairs});
    auto sin_t = std::make_shared<Tensor>(Shape{coords.size(), pairs});
    struct Band {
        std::size_t first_pair, pairs;
        int axis;
    };
    const Band bands[] = {{0, layout.type_dims / 2, 0},
                          {layout.type_dims / 2, layout.x_dims / 2, 1},
                          {(layout.type_dims + layout.x_dims) / 2, layout.y_dims / 2, 2}};
    for (std::size_t i = 0; i < coords.size(); ++i) {
        const int values[] = {coords[i].type_axis, coords[i].x, coords[i].y};
        for (const auto& b : bands) {
            for (std::size_t j = 0; j < b.pairs; ++j) {
                const double freq = std::pow(layout.base, -static_cast<double>(j) / static_cast<double>(b.pairs));
                double angle = static_cast<double>(values[b.axis]) * freq;
                if (drop_type_band && b.axis == 0) angle = 0.0;
                (*cos_t).at(i, b.first_pair + j) = std::cos(angle);
                (*sin_t).at(i, b.first_pair + j) = std::sin(angle);
            }
        }
    }
    return {cos_t, sin_t};
}

ad::Var apply_rope(const ad::Var& x, const RopeTable& table) {
    return ad::rotate_pairs(x, table.cos, table.sin);
}

}  // namespace idcanvas
