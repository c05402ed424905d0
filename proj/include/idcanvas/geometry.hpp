#pragma once

#include <array>

namespace idcanvas {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Five facial keypoints (eyes, nose tip, mouth corners) in pixel units of
// either a face patch or the full image.
struct Landmarks5 {
    std::array<Point2, 5> points{};

    // Throws DegenerateGeometry for non-finite or fully coincident points.
    void validate() const;

    // The canonical 112x112 alignment template rescaled to a square of `size`
    // pixels whose top-left corner is (x0, y0).
    static Landmarks5 canonical(double size, double x0 = 0.0, double y0 = 0.0);

    // p -> scale * R(angle) * p + (tx, ty)
    Landmarks5 transformed(double scale, double angle_rad, double tx, double ty) const;
};

struct SimilarityFit {
    double scale_hat = 1.0;                         // sqrt(|det A|)
    std::array<double, 4> linear{1.0, 0.0, 0.0, 1.0};  // A, row-major
    Point2 translation{};                           // t
};

// Least-squares similarity A, t minimizing sum_j |A src_j + t - dst_j|^2
// (closed-form Umeyama solution; proper rotations only).
SimilarityFit estimate_similarity(const Landmarks5& src, const Landmarks5& dst);

inline constexpr double kMinPasteScale = 0.2;
inline constexpr double kMaxPasteScale = 5.0;

// clip(1 / s_hat, 0.2, 5.0); s_hat is the image->patch scale, so the result
// is the patch->image scale.
double patch_to_image_scale(double s_hat);

struct PasteOffset {
    long x = 0;
    long y = 0;
    bool operator==(const PasteOffset&) const = default;
};

// floor of the mean residual (1/5) sum_j (dst_j - s * src_j).
PasteOffset translation_offset(const Landmarks5& src, const Landmarks5& dst, double s);

}  // namespace idcanvas
