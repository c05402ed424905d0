#include "idcanvas/dit.hpp"

#include <algorithm>
#include <cmath>

#include "idcanvas/errors.hpp"

namespace idcanvas {

void DiTConfig::validate() const {
    if (width == 0 || heads == 0 || width % heads != 0)
        throw ConfigError("model width must be a positive multiple of the head count");
    if (blocks == 0) throw ConfigError("model needs at least one block");
    if (vocab == 0 || embed_dim == 0 || id_hidden == 0) throw ConfigError("empty model dimension");
    patch_grid(image_size, image_size, patch);
    RopeLayout::make(head_dim(), rope_base);
    if (!(time_floor > 0.0 && time_floor <= 1.0)) throw ConfigError("time floor must lie in (0, 1]");
}

bool IdentityCondition::dropped() const {
    return std::none_of(token_mask.begin(), token_mask.end(), [](auto b) { return b != 0; });
}

AttentionMask build_identity_isolated_mask(const TokenSequence& seq) {
    const std::size_t n = seq.size();
    AttentionMask mask(n, false);
    for (std::size_t p = 0; p < n; ++p) {
        const BranchLabel& bp = seq.branch[p];
        for (std::size_t q = 0; q < n; ++q) {
            const BranchLabel& bq = seq.branch[q];
            const bool allowed = bp.is_global() || bq.is_global() || bq.identity == bp.identity;
            mask.set(p, q, allowed);
        }
    }
    return mask;
}

ad::Var modulated_sublayer(const ad::Var& x, const ad::Var& mods,
                           const std::function<ad::Var(const ad::Var&)>& sublayer) {
    const std::size_t d = x.cols();
    require(mods.rows() == x.rows() && mods.cols() == 3 * d,
            "modulated_sublayer: modulation must be [N, 3d]");
    const ad::Var alpha = ad::slice_cols(mods, 0, d);
    const ad::Var beta = ad::slice_cols(mods, d, 2 * d);
    const ad::Var gamma = ad::slice_cols(mods, 2 * d, 3 * d);
    const ad::Var normed = ad::add(ad::mul(ad::add_scalar(alpha, 1.0), ad::layer_norm(x)), beta);
    return ad::add(x, ad::mul(gamma, sublayer(normed)));
}

Tensor timestep_embedding(double t, std::size_t dim) {
    Tensor e({1, dim});
    const std::size_t half = dim / 2;
    for (std::size_t k = 0; k < half; ++k) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
        const double arg = 1000.0 * t * freq;
        e[k] = std::cos(arg);
        e[half + k] = std::sin(arg);
    }
    return e;
}

DiTModel::DiTModel(const DiTConfig& config, std::uint64_t seed)
    : config_(config),
      grid_(patch_grid(config.image_size, config.image_size, config.patch)),
      rope_(RopeLayout::make(config.head_dim(), config.rope_base)) {
    config_.validate();
    Rng rng(seed);
    const std::size_t d = config_.width;
    patch_embed_ = Linear::create(params_, "patch_embed", config_.patch_dim(), d, rng);
    {
        Tensor table({config_.vocab, d});
        for (double& v : table.data()) v = normal(rng, 0.0, 1.0);
        text_table_ = params_.add("text_embed.table", std::move(table)).var;
    }
    time_in_ = Linear::create(params_, "cond.time_in", 2 * d, d, rng);
    time_out_ = Linear::create(params_, "cond.time_out", d, d, rng);
    id_in_ = Linear::create(params_, "id_proj.fc1", config_.embed_dim, config_.id_hidden, rng);
    id_out_ = Linear::create(params_, "id_proj.fc2", config_.id_hidden, d, rng, 0.0);

    auto zero_gate = [d](Linear& mod) {
        Tensor& w = mod.weight.mutable_value();
        for (std::size_t r = 0; r < w.rows(); ++r)
            for (std::size_t c = 2 * d; c < 3 * d; ++c) w.at(r, c) = 0.0;
    };
    for (std::size_t b = 0; b < config_.blocks; ++b) {
        const std::string pre = "blocks." + std::to_string(b) + ".";
        Block blk;
        blk.attn_mod = Linear::create(params_, pre + "attn_mod", d, 3 * d, rng, 0.5);
        zero_gate(blk.attn_mod);
        blk.qkv = Linear::create(params_, pre + "qkv", d, 3 * d, rng);
        blk.attn_out = Linear::create(params_, pre + "attn_out", d, d, rng);
        blk.mlp_mod = Linear::create(params_, pre + "mlp_mod", d, 3 * d, rng, 0.5);
        zero_gate(blk.mlp_mod);
        blk.fc1 = Linear::create(params_, pre + "fc1", d, config_.mlp_ratio * d, rng);
        blk.fc2 = Linear::create(params_, pre + "fc2", config_.mlp_ratio * d, d, rng);
        blocks_.push_back(std::move(blk));
    }
    head_ = Linear::create(params_, "head", d, config_.patch_dim(), rng, 0.5);
}

ad::Var DiTModel::global_conditioning(double t, const ad::Var& prompt_features) const {
    require(t >= 0.0 && t <= 1.0, "global_conditioning: t must lie in [0,1]");
    const ad::Var parts[] = {ad::constant(timestep_embedding(t, config_.width)), prompt_features};
    return time_out_(ad::gelu(time_in_(ad::concat_cols(parts))));
}

ad::Var DiTModel::identity_offset(const Tensor& embedding) const {
    require(embedding.size() == config_.embed_dim, "identity embedding has the wrong length");
    const ad::Var e = ad::constant(embedding.reshaped({1, config_.embed_dim}));
    return id_out_(ad::gelu(id_in_(e)));
}

ad::Var DiTModel::text_tokens(const std::vector<int>& prompt) const {
    require(!prompt.empty(), "prompt must contain at least one token");
    std::vector<std::size_t> rows;
    for (int id : prompt) {
        require(id >= 0 && static_cast<std::size_t>(id) < config_.vocab, "prompt token out of vocabulary");
        rows.push_back(static_cast<std::size_t>(id));
    }
    return ad::gather_rows(text_table_, rows);
}

TokenSequence DiTModel::build_sequence(const ModelInput& input) const {
    const std::size_t S = config_.image_size;
    require(input.x_t.shape() == Shape({S, S, config_.channels}), "x_t has the wrong shape");
    const ad::Var text = text_tokens(input.prompt);
    const ad::Var image = patch_embed(ad::constant(input.x_t), config_.patch, patch_embed_.weight,
                                      patch_embed_.bias);
    std::vector<IdentityTokens> ids;
    ids.reserve(input.identities.size());
    for (const auto& cond : input.identities) {
        require(cond.token_mask.size() == grid_.size(), "identity token mask does not match the grid");
        if (cond.dropped()) {
            ids.push_back({ad::constant(Tensor({0, config_.width})), {}, {}});
            continue;
        }
        require(cond.canvas.shape() == input.x_t.shape(), "identity canvas has the wrong shape");
        const ad::Var canvas_tokens = patch_embed(ad::constant(cond.canvas), config_.patch,
                                                  patch_embed_.weight, patch_embed_.bias);
        ids.push_back(prune_identity_tokens(canvas_tokens, cond.token_mask, grid_));
    }
    return assemble_sequence(text, image, grid_coords(grid_), ids);
}

ModulationState DiTModel::modulation(const ModelInput& input, const TokenSequence& seq) const {
    ModulationState st;
    st.y = global_conditioning(input.t, ad::mean_rows(ad::slice_rows(seq.tokens, seq.text().begin, seq.text().end)));
    std::vector<ad::Var> rows{st.y};
    for (const auto& cond : input.identities) {
        ad::Var delta = identity_offset(cond.embedding);
        st.deltas.push_back(delta);
        rows.push_back(config_.identity_modulation ? ad::add(st.y, delta) : st.y);
    }
    st.per_identity = ad::concat_rows(rows);
    st.token_rows.resize(seq.size(), 0);
    for (std::size_t p = 0; p < seq.size(); ++p)
        if (!seq.branch[p].is_global())
            st.token_rows[p] = 1 + static_cast<std::size_t>(seq.branch[p].identity);
    return st;
}

AttentionMask DiTModel::attention_mask(const TokenSequence& seq) const {
    if (config_.mask == MaskMode::AllVisible) return AttentionMask::all_visible(seq.size());
    return build_identity_isolated_mask(seq);
}

ad::Var DiTModel::modulation_params(std::size_t block, int sublayer, const ModulationState& state) const {
    const Block& blk = blocks_.at(block);
    const Linear& mod = sublayer == 0 ? blk.attn_mod : blk.mlp_mod;
    return ad::gather_rows(mod(ad::gelu(state.per_identity)), state.token_rows);
}

ad::Var DiTModel::attention(std::size_t block, const ad::Var& x, const TokenSequence& seq,
                            const AttentionMask& mask) const {
    const Block& blk = blocks_.at(block);
    const std::size_t d = config_.width, dh = config_.head_dim();
    const RopeTable rope = build_rope_table(seq.coords, rope_);
    const ad::Var qkv = blk.qkv(x);
    std::vector<ad::Var> heads;
    for (std::size_t h = 0; h < config_.heads; ++h) {
        const ad::Var q = apply_rope(ad::slice_cols(qkv, h * dh, (h + 1) * dh), rope);
        const ad::Var k = apply_rope(ad::slice_cols(qkv, d + h * dh, d + (h + 1) * dh), rope);
        const ad::Var v = ad::slice_cols(qkv, 2 * d + h * dh, 2 * d + (h + 1) * dh);
        heads.push_back(ad::masked_softmax_attention(q, k, v, mask));
    }
    return blk.attn_out(config_.heads == 1 ? heads.front() : ad::concat_cols(heads));
}

ad::Var DiTModel::forward(const ModelInput& input) const {
    const ad::Var out = head_output(input);
    if (config_.prediction == Prediction::Velocity) return out;
    return ad::scale(ad::sub(ad::constant(input.x_t), out), 1.0 / std::max(input.t, config_.time_floor));
}

ad::Var DiTModel::head_output(const ModelInput& input) const {
    const TokenSequence seq = build_sequence(input);
    const ModulationState state = modulation(input, seq);
    const AttentionMask mask = attention_mask(seq);

    ad::Var x = seq.tokens;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const Block& blk = blocks_[b];
        x = modulated_sublayer(x, modulation_params(b, 0, state),
                               [&](const ad::Var& h) { return attention(b, h, seq, mask); });
        x = modulated_sublayer(x, modulation_params(b, 1, state),
                               [&](const ad::Var& h) { return blk.fc2(ad::gelu(blk.fc1(h))); });
    }
    const ad::Var image_tokens = ad::slice_rows(x, seq.image().begin, seq.image().end);
    const ad::Var patches = head_(ad::layer_norm(image_tokens));
    return unpatchify(patches, config_.image_size, config_.image_size, config_.channels, config_.patch);
}

}  // namespace idcanvas
