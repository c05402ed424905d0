#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "idcanvas/attention_mask.hpp"
#include "idcanvas/parameters.hpp"
#include "idcanvas/tokenizer.hpp"

namespace idcanvas {

enum class MaskMode { IdentityIsolated, AllVisible };

// What the output head regresses. With CleanImage the head predicts D and
// the velocity is (x_t - D) / max(t, time_floor); with Velocity the head
// output is the velocity itself.
enum class Prediction { CleanImage, Velocity };

struct DiTConfig {
    std::size_t image_size = 64;   // square images
    std::size_t channels = 3;
    std::size_t patch = 4;
    std::size_t width = 32;        // d; the conditioning width d_c equals d
    std::size_t blocks = 3;
    std::size_t heads = 2;
    std::size_t vocab = 8;
    std::size_t embed_dim = 32;    // identity embedding length
    std::size_t id_hidden = 64;
    std::size_t mlp_ratio = 4;
    double rope_base = 100.0;
    bool identity_modulation = true;
    MaskMode mask = MaskMode::IdentityIsolated;
    Prediction prediction = Prediction::CleanImage;
    double time_floor = 0.05;

    std::size_t head_dim() const { return width / heads; }
    std::size_t patch_dim() const { return patch * patch * channels; }
    // Throws ConfigError for infeasible combinations.
    void validate() const;
};

// One identity's conditions as seen by the network: the location canvas in
// model space (white = +1), its token-resolution mask and the identity
// embedding. A dropped identity has an all-zero mask and embedding.
struct IdentityCondition {
    Tensor canvas;                      // [H,W,C]
    std::vector<std::uint8_t> token_mask;  // grid cells
    Tensor embedding;                   // [embed_dim]

    bool dropped() const;
};

struct ModelInput {
    Tensor x_t;               // [H,W,C] noised image in model space
    double t = 0.0;
    std::vector<int> prompt;  // token ids, at least one
    std::vector<IdentityCondition> identities;
};

// y, the per-identity offsets and the map from sequence position to the
// conditioning row used by every modulation layer (row 0 = y, row 1 + i =
// y_i = y + delta_i).
struct ModulationState {
    ad::Var y;                     // [1, d]
    std::vector<ad::Var> deltas;   // [1, d] each
    ad::Var per_identity;          // [1 + n, d] rows y, y_1, ..., y_n
    std::vector<std::size_t> token_rows;
};

// A_pq = 1 if p in T u I; 1 if p in F_i and q in T u I u F_i; 0 otherwise.
AttentionMask build_identity_isolated_mask(const TokenSequence& seq);

// x + gamma * F((1 + alpha) * LN(x) + beta) with [alpha | beta | gamma] the
// column blocks of `mods` ([N, 3d]).
ad::Var modulated_sublayer(const ad::Var& x, const ad::Var& mods,
                           const std::function<ad::Var(const ad::Var&)>& sublayer);

// Sinusoidal embedding of t (scaled by 1000) with `dim` entries: cos then sin.
Tensor timestep_embedding(double t, std::size_t dim);

class DiTModel {
   public:
    DiTModel(const DiTConfig& config, std::uint64_t seed);

    const DiTConfig& config() const { return config_; }
    ParameterStore& params() { return params_; }
    const ParameterStore& params() const { return params_; }
    PatchGrid grid() const { return grid_; }

    ad::Var global_conditioning(double t, const ad::Var& prompt_features) const;
    ad::Var identity_offset(const Tensor& embedding) const;
    ad::Var text_tokens(const std::vector<int>& prompt) const;

    TokenSequence build_sequence(const ModelInput& input) const;
    ModulationState modulation(const ModelInput& input, const TokenSequence& seq) const;
    AttentionMask attention_mask(const TokenSequence& seq) const;

    // Per-token [alpha | beta | gamma] of one block's attention (sublayer 0)
    // or MLP (sublayer 1) modulation.
    ad::Var modulation_params(std::size_t block, int sublayer, const ModulationState& state) const;

    // Predicted velocity over the image, shape [H,W,C].
    ad::Var forward(const ModelInput& input) const;

    // Raw output head over the image, shape [H,W,C].
    ad::Var head_output(const ModelInput& input) const;

    // One masked multi-head attention pass over an already-modulated
    // sequence (exposed for isolation tests).
    ad::Var attention(std::size_t block, const ad::Var& x, const TokenSequence& seq,
                      const AttentionMask& mask) const;

   private:
    struct Block {
        Linear attn_mod, qkv, attn_out;
        Linear mlp_mod, fc1, fc2;
    };

    DiTConfig config_;
    PatchGrid grid_;
    RopeLayout rope_;
    ParameterStore params_;
    Linear patch_embed_;
    ad::Var text_table_;
    Linear time_in_, time_out_;
    Linear id_in_, id_out_;
    std::vector<Block> blocks_;
    Linear head_;
};

}  // namespace idcanvas
