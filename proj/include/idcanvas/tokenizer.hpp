#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "idcanvas/autodiff.hpp"

namespace idcanvas {

// (type, x, y): text (0,0,0), image (0,x,y), identity (1,x,y).
struct RopeCoord {
    int type_axis = 0;
    int x = 0;
    int y = 0;
    bool operator==(const RopeCoord&) const = default;
};

struct BranchLabel {
    enum class Kind : std::uint8_t { Text, Image, Identity };
    Kind kind = Kind::Text;
    int identity = -1;  // 0-based identity slot for Kind::Identity

    static BranchLabel text() { return {Kind::Text, -1}; }
    static BranchLabel image() { return {Kind::Image, -1}; }
    static BranchLabel id(int i) { return {Kind::Identity, i}; }
    bool is_global() const { return kind != Kind::Identity; }
    bool operator==(const BranchLabel&) const = default;
};

struct Segment {
    BranchLabel label;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

// Packed [T, I, F_1 .. F_n] sequence with per-token RoPE coordinates and
// branch labels. Segments are contiguous and in that order; identity
// segments may be empty.
struct TokenSequence {
    ad::Var tokens;
    std::vector<RopeCoord> coords;
    std::vector<BranchLabel> branch;
    std::vector<Segment> segments;

    std::size_t size() const { return coords.size(); }
    const Segment& text() const { return segments[0]; }
    const Segment& image() const { return segments[1]; }
    std::size_t identity_count() const { return segments.size() - 2; }
    const Segment& identity(std::size_t i) const { return segments[2 + i]; }
};

struct PatchGrid {
    std::size_t rows = 0;  // grid height (y)
    std::size_t cols = 0;  // grid width (x)
    std::size_t size() const { return rows * cols; }
};

// Grid dimensions for an HxW image; throws ConfigError unless p divides both.
PatchGrid patch_grid(std::size_t height, std::size_t width, std::size_t patch);

// [H,W,C] image -> [grid, p*p*C] rows in row-major grid order (x fastest).
ad::Var patchify(const ad::Var& image, std::size_t patch);
// Non-overlapping patch flatten followed by a linear projection:
// [H,W,C] -> [grid, d].
ad::Var patch_embed(const ad::Var& image, std::size_t patch, const ad::Var& weight,
                    const ad::Var& bias);
// Inverse of patchify.
ad::Var unpatchify(const ad::Var& patches, std::size_t height, std::size_t width,
                   std::size_t channels, std::size_t patch);

// (0, x, y) for every grid cell in row-major order.
std::vector<RopeCoord> grid_coords(const PatchGrid& grid, int type_axis = 0);

// Token cell is set iff any pixel of its patch is set.
std::vector<std::uint8_t> downsample_mask(const std::vector<std::uint8_t>& mask,
                                          std::size_t height, std::size_t width,
                                          std::size_t patch);

struct IdentityTokens {
    ad::Var tokens;                 // [kept, d]
    std::vector<RopeCoord> coords;  // (1, x, y) per kept token
    std::vector<std::size_t> cells; // grid index of each kept token
};

// Keeps the canvas tokens whose grid cell is set, in row-major order.
IdentityTokens prune_identity_tokens(const ad::Var& canvas_tokens,
                                     const std::vector<std::uint8_t>& token_mask,
                                     const PatchGrid& grid);

TokenSequence assemble_sequence(const ad::Var& text_tokens, const ad::Var& image_tokens,
                                const std::vector<RopeCoord>& image_coords,
                                const std::vector<IdentityTokens>& identities);

// ---- rotary embedding ----

// Head dimension split into contiguous (type | x | y) bands of rotated pairs.
struct RopeLayout {
    std::size_t head_dim = 0;
    std::size_t type_dims = 0;
    std::size_t x_dims = 0;
    std::size_t y_dims = 0;
    double base = 100.0;

    // type band gets 2 * ceil(m / 4) of the 2m dims, x and y share the rest
    // evenly. Throws ConfigError when that is not possible with whole pairs.
    static RopeLayout make(std::size_t head_dim, double base = 100.0);
};

struct RopeTable {
    std::shared_ptr<const Tensor> cos;
    std::shared_ptr<const Tensor> sin;
};

// drop_type_band leaves the type band unrotated (used by tests comparing
// image and identity tokens at the same spatial position).
RopeTable build_rope_table(const std::vector<RopeCoord>& coords, const RopeLayout& layout,
                           bool drop_type_band = false);

ad::Var apply_rope(const ad::Var& x, const RopeTable& table);

}  // namespace idcanvas
