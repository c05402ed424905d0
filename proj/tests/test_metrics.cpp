#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "idcanvas/errors.hpp"
#include "idcanvas/gradcheck.hpp"
#include "idcanvas/log.hpp"
#include "idcanvas/metrics.hpp"
#include "op_registry.hpp"

using namespace idcanvas;
using namespace idcanvas::testing;

namespace {

Tensor random_patch(std::size_t h, std::size_t w, Rng& rng) {
    Tensor p({h, w, 3});
    for (double& v : p.data()) v = uniform(rng, 0.2, 0.8);
    return p;
}

Tensor random_unit(std::size_t n, Rng& rng) {
    Tensor v = random_tensor({n}, rng);
    double ss = 0.0;
    for (double x : v.data()) ss += x * x;
    for (double& x : v.data()) x /= std::sqrt(ss);
    return v;
}

// Rotation in the plane of coordinates (i, j).
Tensor givens(const Tensor& v, std::size_t i, std::size_t j, double angle) {
    Tensor out = v;
    out[i] = std::cos(angle) * v[i] - std::sin(angle) * v[j];
    out[j] = std::sin(angle) * v[i] + std::cos(angle) * v[j];
    return out;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST_CASE("area weights preserve constants and integrate correctly") {
    for (std::size_t n : {8, 12, 16, 20, 5}) {
        const Tensor w = area_weights(n, 8);
        for (std::size_t i = 0; i < 8; ++i) {
            double row = 0.0;
            for (std::size_t k = 0; k < n; ++k) row += w.at(i, k);
            CHECK(row == doctest::Approx(1.0).epsilon(1e-14));
        }
        double total = 0.0;
        for (double v : w.data()) total += v;
        CHECK(total * static_cast<double>(n) / 8.0 == doctest::Approx(static_cast<double>(n)));
    }
    const Tensor w = area_weights(16, 8);
    CHECK(w.at(3, 6) == 0.5);
    CHECK(w.at(3, 7) == 0.5);
}

TEST_CASE("embed: affine photometric invariance and unit norm") {
    Rng rng(1);
    const OracleEmbedder oracle;
    const Tensor p = random_patch(16, 16, rng);
    Tensor q = p;
    for (double& v : q.data()) v = 1.5 * v + 0.1;
    const Tensor ep = oracle.embed(p), eq = oracle.embed(q);
    CHECK(max_abs_diff(ep, eq) < 1e-12);
    CHECK(std::sqrt(dot(ep, ep)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ep.size() == kOracleDim);

    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 4 + rng() % 24;
        const Tensor x = random_patch(n, n, rng);
        const double a = uniform(rng, 1e-3, 3.0), b = uniform(rng, -0.3, 0.3);
        Tensor y = x;
        for (double& v : y.data()) v = a * v + b;
        CHECK(max_abs_diff(oracle.embed(x), oracle.embed(y)) < 1e-12);
    }
}

TEST_CASE("embed is deterministic per seed and differs across seeds") {
    Rng rng(2);
    const Tensor p = random_patch(12, 12, rng);
    CHECK(OracleEmbedder(5).embed(p) == OracleEmbedder(5).embed(p));
    CHECK_FALSE(OracleEmbedder(5).embed(p) == OracleEmbedder(6).embed(p));
}

TEST_CASE("embed on a constant patch stays finite") {
    const OracleEmbedder oracle;
    set_log_level(LogLevel::Error);
    const Tensor e = oracle.embed(Tensor({16, 16, 3}, 0.5));
    set_log_level(LogLevel::Info);
    CHECK(e.all_finite());
}

TEST_CASE("embed gradient matches finite differences") {
    Rng rng(3);
    const OracleEmbedder oracle;
    for (std::size_t n : {8, 12, 16}) {
        auto r = check_gradient([&](const ad::Var& x) { return oracle.embed(x); },
                                random_patch(n, n, rng), 1e-5);
        CHECK(r.max_rel_error < 1e-5);
    }
}

TEST_CASE("renderer/oracle calibration") {
    Rng rng(4);
    const OracleEmbedder oracle;
    SUBCASE("same identity under brightness and contrast changes") {
        for (int trial = 0; trial < 50; ++trial) {
            const Tensor z = sample_identity(rng);
            Nuisance n;
            n.contrast = uniform(rng, 0.8, 1.2);
            n.brightness = uniform(rng, -0.05, 0.05);
            CHECK(cosine_sim(oracle.embed(render_identity(z, 16)),
                             oracle.embed(render_identity(z, 16, n))) > 0.99);
        }
    }
    SUBCASE("same identity across sizes and sampled nuisance") {
        for (int trial = 0; trial < 50; ++trial) {
            const Tensor z = sample_identity(rng);
            const std::size_t size = 12 + 4 * (rng() % 3);
            Nuisance n = Nuisance::sample(rng);
            CHECK(cosine_sim(oracle.embed(render_identity(z, 16)),
                             oracle.embed(render_identity(z, size, n, &rng))) > 0.95);
        }
    }
    SUBCASE("distinct identities are separated") {
        int separated = 0;
        for (int trial = 0; trial < 100; ++trial) {
            const Tensor a = sample_identity(rng), b = sample_identity(rng);
            if (std::abs(cosine_sim(oracle.embed(render_identity(a, 16)),
                                    oracle.embed(render_identity(b, 16)))) < 0.8)
                ++separated;
        }
        MESSAGE("separated pairs: " << separated << "/100");
        CHECK(separated >= 95);
    }
}

TEST_CASE("render_identity contract") {
    Rng rng(5);
    const Tensor z = sample_identity(rng);
    CHECK(render_identity(z, 16) == render_identity(z, 16));
    Nuisance n;
    n.noise = 0.01;
    CHECK_THROWS_AS(render_identity(z, 16, n), ContractViolation);
    CHECK_THROWS_AS(render_identity(Tensor({3}), 16), ContractViolation);
    const Tensor img = render_identity(z, 20, Nuisance::sample(rng), &rng);
    for (double v : img.data()) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("cosine_sim examples") {
    const Tensor a({3}, std::vector<double>{1.0, 2.0, -1.0});
    CHECK(cosine_sim(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    const Tensor o({3}, std::vector<double>{2.0, -1.0, 0.0});
    CHECK(cosine_sim(a, o) == 0.0);
    Tensor neg = a;
    for (double& v : neg.data()) v = -v;
    CHECK(cosine_sim(a, neg) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK_THROWS_AS(cosine_sim(a, Tensor({3})), ContractViolation);
}

TEST_CASE("copy_paste_metric poles and recomputation") {
    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor r = random_unit(kOracleDim, rng), t = random_unit(kOracleDim, rng);
        CHECK(copy_paste_metric({r, t, t}) == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(copy_paste_metric({r, t, r}) == doctest::Approx(1.0).epsilon(1e-12));
    }
    // r == t: theta_tr = 0, the eps floor keeps the value finite
    const Tensor r = random_unit(4, rng), g = random_unit(4, rng);
    CHECK(std::isfinite(copy_paste_metric({r, r, g})));
    CHECK(copy_paste_metric({r, r, g}) == 0.0);

    for (int trial = 0; trial < 200; ++trial) {
        const Tensor a = random_unit(6, rng), b = random_unit(6, rng), c = random_unit(6, rng);
        const double direct =
            (std::acos(dot(c, b)) - std::acos(dot(c, a))) / std::max(std::acos(dot(b, a)), 1e-3);
        CHECK(std::abs(copy_paste_metric({a, b, c}) - direct) < 1e-12);
        // antisymmetry under swapping r and t
        CHECK(copy_paste_metric({b, a, c}) == -copy_paste_metric({a, b, c}));
        // invariance under a common rotation
        const std::size_t i = rng() % 6, j = (i + 1 + rng() % 5) % 6;
        const double ang = uniform(rng, -3.0, 3.0);
        CHECK(std::abs(copy_paste_metric({givens(a, i, j, ang), givens(b, i, j, ang), givens(c, i, j, ang)}) -
                       copy_paste_metric({a, b, c})) < 1e-12);
        CHECK(std::abs(copy_paste_metric({a, b, c})) <= 1.0 + 1e-12);
    }
    CHECK_THROWS_AS(copy_paste_metric({Tensor({4}), g, g}), ContractViolation);
}

TEST_CASE("ranking_filter thresholds") {
    std::vector<IdentityRecord> recs(3);
    recs[0].sim_gt = 0.39;
    recs[0].sim_ref = 0.9;
    recs[1].sim_gt = 0.41;
    recs[1].sim_ref = 0.49;
    recs[2].sim_gt = 0.8;
    recs[2].sim_ref = 0.8;
    recs[2].excluded = "crop outside image";
    const RankingViews v = ranking_filter(recs);
    CHECK_FALSE(recs[0].cp_eligible);
    CHECK(recs[0].quality_eligible);
    CHECK(recs[1].cp_eligible);
    CHECK_FALSE(recs[1].quality_eligible);
    CHECK_FALSE(recs[2].cp_eligible);
    CHECK(v.cp.size() == 1);
    CHECK(v.quality.size() == 1);

    std::vector<IdentityRecord> none;
    const RankingViews e = ranking_filter(none);
    CHECK(e.cp.empty());
    CHECK(e.quality.empty());

    // idempotent
    auto cp_view = v.cp;
    CHECK(ranking_filter(cp_view).cp.size() == v.cp.size());
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<IdentityRecord> rs(10);
        for (auto& r : rs) {
            r.sim_gt = uniform(rng, -1.0, 1.0);
            r.sim_ref = uniform(rng, -1.0, 1.0);
        }
        auto once = ranking_filter(rs);
        auto twice = ranking_filter(once.cp);
        CHECK(twice.cp.size() == once.cp.size());
        auto q = ranking_filter(once.quality);
        CHECK(q.quality.size() == once.quality.size());
    }
}

TEST_CASE("evaluate_run poles and report") {
    Rng rng(8);
    const OracleEmbedder oracle;
    EvalCase c;
    c.case_id = "scene0";
    c.ground_truth = make_image(32, 32, 0.5);
    c.boxes = {{0, 0, 16, 16}, {16, 16, 16, 16}};
    std::vector<Tensor> gt_patches;
    for (const Box& b : c.boxes) {
        const Tensor z = sample_identity(rng);
        const Tensor gt = render_identity(z, 16, Nuisance::sample(rng), &rng);
        for (std::size_t y = 0; y < 16; ++y)
            for (std::size_t x = 0; x < 16; ++x)
                for (std::size_t k = 0; k < 3; ++k) c.ground_truth.at(b.y0 + y, b.x0 + x, k) = gt.at(y, x, k);
        c.references.push_back(render_identity(z, 16, Nuisance::sample(rng), &rng));
    }

    SUBCASE("generated equals ground truth") {
        c.generated = c.ground_truth;
        const EvalReport rep = evaluate_run({c}, oracle);
        REQUIRE(rep.records.size() == 2);
        for (const auto& r : rep.records) {
            CHECK(r.sim_gt == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(r.cp == doctest::Approx(-1.0).epsilon(1e-9));
        }
    }
    SUBCASE("generated pastes the references") {
        c.generated = c.ground_truth;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t y = 0; y < 16; ++y)
                for (std::size_t x = 0; x < 16; ++x)
                    for (std::size_t k = 0; k < 3; ++k)
                        c.generated.at(c.boxes[i].y0 + y, c.boxes[i].x0 + x, k) = c.references[i].at(y, x, k);
        const EvalReport rep = evaluate_run({c}, oracle);
        for (const auto& r : rep.records) {
            CHECK(r.sim_ref == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(r.cp == doctest::Approx(1.0).epsilon(1e-9));
        }
        CHECK(rep.summary.scored == 2);
        CHECK(rep.summary.mean_sim_ref == doctest::Approx(1.0));
    }
    SUBCASE("out-of-image box is flagged") {
        c.generated = c.ground_truth;
        c.boxes[1] = {24, 24, 16, 16};
        const EvalReport rep = evaluate_run({c}, oracle);
        CHECK(rep.records[1].excluded == "crop outside image");
        CHECK_FALSE(rep.records[1].cp_eligible);
        CHECK(rep.summary.excluded == 1);

        const auto path = std::filesystem::temp_directory_path() / "idcanvas_report.csv";
        write_report_csv(path.string(), rep.records);
        std::ifstream in(path);
        std::string header, row0, row1;
        std::getline(in, header);
        std::getline(in, row0);
        std::getline(in, row1);
        CHECK(header == "case_id,identity_idx,sim_gt,sim_ref,cp,cp_eligible,quality_eligible");
        CHECK(row0.rfind("scene0,0,", 0) == 0);
        CHECK(row1 == "scene0,1,nan,nan,nan,0,0");
        std::filesystem::remove(path);
    }
}
