#pragma once

#include <optional>
#include <string>
#include <vector>

#include "idcanvas/image.hpp"
#include "idcanvas/oracle.hpp"

namespace idcanvas {

constexpr double kCopyPasteEps = 1e-3;

// Reference, ground-truth and generated embeddings of one identity slot.
struct EmbeddingTriple {
    Tensor r, t, g;

    void validate() const;  // unit norm within 1e-9
};

double cosine_sim(const Tensor& a, const Tensor& b);
double angular_distance(const Tensor& a, const Tensor& b);

// (theta_gt - theta_gr) / max(theta_tr, eps): -1 reproduces the ground
// truth, +1 pastes the reference.
double copy_paste_metric(const EmbeddingTriple& e, double eps = kCopyPasteEps);

struct RankingThresholds {
    double sim_gt_min = 0.40;
    double sim_ref_min = 0.50;
};

struct IdentityRecord {
    std::string case_id;
    std::size_t identity_idx = 0;
    double sim_gt = 0.0;
    double sim_ref = 0.0;
    double cp = 0.0;
    bool cp_eligible = false;
    bool quality_eligible = false;
    std::string excluded;  // non-empty when the slot could not be scored
};

struct RankingViews {
    std::vector<IdentityRecord> cp;       // Sim(GT) above threshold
    std::vector<IdentityRecord> quality;  // Sim(Ref) above threshold
};

// Sets the eligibility flags in place and returns the two filtered views.
RankingViews ranking_filter(std::vector<IdentityRecord>& records,
                            const RankingThresholds& th = {});

struct EvalCase {
    std::string case_id;
    Tensor generated;                  // [H,W,3]
    Tensor ground_truth;               // [H,W,3]
    std::vector<Box> boxes;
    std::vector<Tensor> references;    // reference patches, one per box
};

struct EvalSummary {
    std::size_t scored = 0;
    std::size_t excluded = 0;
    double mean_sim_gt = 0.0;
    double mean_sim_ref = 0.0;
    double mean_cp = 0.0;          // over CP-eligible slots
    std::size_t cp_eligible = 0;
    std::size_t quality_eligible = 0;
};

struct EvalReport {
    std::vector<IdentityRecord> records;
    EvalSummary summary;
};

EvalReport evaluate_run(const std::vector<EvalCase>& cases, const OracleEmbedder& oracle,
                        const RankingThresholds& th = {}, double eps = kCopyPasteEps);

// case_id, identity_idx, sim_gt, sim_ref, cp, cp_eligible, quality_eligible
void write_report_csv(const std::string& path, const std::vector<IdentityRecord>& records);

}  // namespace idcanvas
