#include "idcanvas/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "idcanvas/errors.hpp"

namespace idcanvas {

namespace {

double norm(const Tensor& a) {
    double ss = 0.0;
    for (double v : a.data()) ss += v * v;
    return std::sqrt(ss);
}

}  // namespace

void EmbeddingTriple::validate() const {
    for (const Tensor* v : {&r, &t, &g}) {
        require(v->size() == r.size(), "EmbeddingTriple: length mismatch");
        require(std::abs(norm(*v) - 1.0) <= 1e-9, "EmbeddingTriple: embeddings must be unit norm");
    }
}

double cosine_sim(const Tensor& a, const Tensor& b) {
    require(a.size() == b.size(), "cosine_sim: length mismatch");
    const double na = norm(a), nb = norm(b);
    require(na > 0.0 && nb > 0.0, "cosine_sim: zero-norm vector");
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

double angular_distance(const Tensor& a, const Tensor& b) { return std::acos(cosine_sim(a, b)); }

double copy_paste_metric(const EmbeddingTriple& e, double eps) {
    require(eps > 0.0, "copy_paste_metric: eps must be positive");
    e.validate();
    const double theta_gt = angular_distance(e.g, e.t);
    const double theta_gr = angular_distance(e.g, e.r);
    const double theta_tr = angular_distance(e.t, e.r);
    return (theta_gt - theta_gr) / std::max(theta_tr, eps);
}

RankingViews ranking_filter(std::vector<IdentityRecord>& records, const RankingThresholds& th) {
    RankingViews views;
    for (auto& rec : records) {
        const bool scored = rec.excluded.empty();
        rec.cp_eligible = scored && rec.sim_gt > th.sim_gt_min;
        rec.quality_eligible = scored && rec.sim_ref > th.sim_ref_min;
        if (rec.cp_eligible) views.cp.push_back(rec);
        if (rec.quality_eligible) views.quality.push_back(rec);
    }
    return views;
}

EvalReport evaluate_run(const std::vector<EvalCase>& cases, const OracleEmbedder& oracle,
                        const RankingThresholds& th, double eps) {
    EvalReport report;
    for (const auto& c : cases) {
        require(c.boxes.size() == c.references.size(),
                "evaluate_run: one reference per box required in case " + c.case_id);
        for (std::size_t i = 0; i < c.boxes.size(); ++i) {
            IdentityRecord rec;
            rec.case_id = c.case_id;
            rec.identity_idx = i;
            const Box& box = c.boxes[i];
            const bool inside = box.w > 0 && box.h > 0 &&
                                box.x0 + box.w <= image_width(c.generated) &&
                                box.y0 + box.h <= image_height(c.generated) &&
                                c.generated.shape() == c.ground_truth.shape();
            if (!inside) {
                rec.excluded = "crop outside image";
                report.records.push_back(rec);
                continue;
            }
            EmbeddingTriple e{oracle.embed(c.references[i]),
                              oracle.embed(crop_image(c.ground_truth, box)),
                              oracle.embed(crop_image(c.generated, box))};
            rec.sim_gt = cosine_sim(e.t, e.g);
            rec.sim_ref = cosine_sim(e.r, e.g);
            rec.cp = copy_paste_metric(e, eps);
            report.records.push_back(rec);
        }
    }

    const RankingViews views = ranking_filter(report.records, th);
    EvalSummary& s = report.summary;
    for (const auto& rec : report.records) {
        if (!rec.excluded.empty()) {
            ++s.excluded;
            continue;
        }
        ++s.scored;
        s.mean_sim_gt += rec.sim_gt;
        s.mean_sim_ref += rec.sim_ref;
    }
    if (s.scored > 0) {
        s.mean_sim_gt /= static_cast<double>(s.scored);
        s.mean_sim_ref /= static_cast<double>(s.scored);
    }
    for (const auto& rec : views.cp) s.mean_cp += rec.cp;
    if (!views.cp.empty()) s.mean_cp /= static_cast<double>(views.cp.size());
    s.cp_eligible = views.cp.size();
    s.quality_eligible = views.quality.size();
    return report;
}

void write_report_csv(const std::string& path, const std::vector<IdentityRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "case_id,identity_idx,sim_gt,sim_ref,cp,cp_eligible,quality_eligible\n";
    out << std::setprecision(17);
    for (const auto& r : records) {
        out << r.case_id << ',' << r.identity_idx << ',';
        if (r.excluded.empty())
            out << r.sim_gt << ',' << r.sim_ref << ',' << r.cp;
        else
            out << "nan,nan,nan";
        out << ',' << (r.cp_eligible ? 1 : 0) << ',' << (r.quality_eligible ? 1 : 0) << '\n';
    }
}

}  // namespace idcanvas
