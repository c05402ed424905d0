#include "idcanvas/selfcheck.hpp"

#include <algorithm>
#include <cstdio>

#include "idcanvas/dit.hpp"
#include "idcanvas/flow.hpp"
#include "idcanvas/gradcheck.hpp"
#include "idcanvas/log.hpp"
#include "idcanvas/metrics.hpp"
#include "idcanvas/op_catalog.hpp"

namespace idcanvas {

namespace {

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

CheckLine op_gradients() {
    double worst = 0.0;
    std::string where;
    bool finite = true;
    for (const auto& op : checks::differentiable_ops()) {
        Rng rng(derive_seed(99, op.name.size(), op.name[0]));
        for (int p = 0; p < 10; ++p) {
            const auto r = check_gradient(op.fn, checks::random_tensor(op.input_shape, rng), 1e-5, 1000 + p);
            finite = finite && !r.non_finite;
            if (r.max_rel_error > worst) {
                worst = r.max_rel_error;
                where = op.name;
            }
        }
    }
    return {"op gradients", finite && worst < 1e-4, "max rel err " + sci(worst) + " (" + where + ")"};
}

CheckLine model_gradients() {
    DiTConfig c;
    c.image_size = 8;
    c.patch = 2;
    c.width = 16;
    c.heads = 1;
    c.blocks = 2;
    c.vocab = 6;
    c.embed_dim = 8;
    c.id_hidden = 12;
    c.mlp_ratio = 2;
    const std::size_t g = c.image_size / c.patch;
    double worst = 0.0;
    for (int p = 0; p < 3; ++p) {
        DiTModel model(c, 41 + p);
        Rng rng(derive_seed(39, p));
        for (auto& param : model.params().all())
            for (double& v : param.value().data()) v = normal(rng, 0.0, 0.25);
        ModelInput in{checks::random_tensor({8, 8, 3}, rng), uniform(rng, 0.3, 1.0), {1, 4}, {}};
        for (int i = 0; i < 2; ++i) {
            IdentityCondition id;
            id.canvas = Tensor({8, 8, 3}, 1.0);
            id.token_mask.assign(g * g, 0);
            for (std::size_t k = 0; k < g * g; ++k) id.token_mask[k] = bernoulli(rng, 0.5);
            id.token_mask[static_cast<std::size_t>(i)] = 1;
            for (double& v : id.canvas.data()) v = uniform(rng, -1.0, 1.0);
            id.embedding = checks::random_tensor({c.embed_dim}, rng);
            in.identities.push_back(id);
        }
        const ad::Var target = ad::constant(checks::random_tensor({8, 8, 3}, rng));
        std::vector<ad::Var> inputs;
        for (auto& param : model.params().all()) inputs.push_back(param.var);
        const auto r = check_gradient(inputs, [&] { return ad::mse(model.forward(in), target); }, 1e-4, 64);
        worst = std::max(worst, r.non_finite ? 1e300 : r.max_rel_error);
    }
    return {"2-block model gradients", worst < 1e-4, "max rel err " + sci(worst)};
}

CheckLine oracle_checks() {
    const OracleEmbedder oracle;
    Rng rng(11);
    double affine = 0.0, same_min = 1.0;
    std::size_t separated = 0;
    const std::size_t n = 50;
    for (std::size_t k = 0; k < n; ++k) {
        const Tensor z = sample_identity(rng);
        const Tensor face = render_identity(z, 16);
        Tensor shifted = face;
        const double a = uniform(rng, 0.5, 2.0), b = uniform(rng, -0.5, 0.5);
        for (double& v : shifted.data()) v = a * v + b;
        affine = std::max(affine, max_abs_diff(oracle.embed(face), oracle.embed(shifted)));
        const Tensor other_size = render_identity(z, 20, Nuisance::sample(rng), &rng);
        const double same = cosine_sim(oracle.embed(face), oracle.embed(other_size));
        same_min = std::min(same_min, same);
        const double cross = cosine_sim(oracle.embed(face), oracle.embed(render_identity(sample_identity(rng), 16)));
        separated += cross < same;
    }
    const bool pass = affine < 1e-12 && same_min > 0.95 && separated >= n * 95 / 100;
    return {"oracle invariance and calibration", pass,
            "affine drift " + sci(affine) + ", min same-identity cos " + sci(same_min) + ", separated " +
                std::to_string(separated) + "/" + std::to_string(n)};
}

CheckLine cp_poles() {
    const OracleEmbedder oracle;
    Rng rng(5);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
        const Tensor r = oracle.embed(render_identity(sample_identity(rng), 16));
        const Tensor t = oracle.embed(render_identity(sample_identity(rng), 16));
        worst = std::max({worst, std::abs(copy_paste_metric({r, t, t}) + 1.0),
                          std::abs(copy_paste_metric({r, t, r}) - 1.0)});
    }
    return {"copy-paste poles", worst <= 0.005, "max distance from +-1: " + sci(worst)};
}

CheckLine mask_rule() {
    Rng rng(3);
    std::size_t bad = 0;
    for (int trial = 0; trial < 300; ++trial) {
        TokenSequence seq;
        std::size_t pos = 0;
        const std::size_t n = rng() % 5;
        for (std::size_t s = 0; s < n + 2; ++s) {
            const BranchLabel label = s == 0 ? BranchLabel::text()
                                      : s == 1 ? BranchLabel::image()
                                               : BranchLabel::id(static_cast<int>(s - 2));
            const std::size_t len = s < 2 ? 1 + rng() % 6 : rng() % 7;
            seq.segments.push_back({label, pos, pos + len});
            for (std::size_t i = 0; i < len; ++i) {
                seq.branch.push_back(label);
                seq.coords.push_back({});
            }
            pos += len;
        }
        const AttentionMask m = build_identity_isolated_mask(seq);
        for (std::size_t p = 0; p < pos; ++p)
            for (std::size_t q = 0; q < pos; ++q) {
                const BranchLabel& bp = seq.branch[p];
                const BranchLabel& bq = seq.branch[q];
                const bool global_p = bp == BranchLabel::text() || bp == BranchLabel::image();
                const bool global_q = bq == BranchLabel::text() || bq == BranchLabel::image();
                bad += m.allowed(p, q) != (global_p || global_q || bp == bq);
            }
    }
    return {"identity-isolated mask rule", bad == 0, std::to_string(bad) + " mismatched entries"};
}

}  // namespace

std::vector<CheckLine> run_self_checks() {
    const LogLevel saved = log_level();
    set_log_level(LogLevel::Warn);
    std::vector<CheckLine> lines{op_gradients(), model_gradients(), oracle_checks(), cp_poles(), mask_rule()};
    set_log_level(saved);
    return lines;
}

}  // namespace idcanvas
