#include "idcanvas/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "idcanvas/errors.hpp"

namespace idcanvas {

namespace {

// ArcFace 112x112 reference landmarks.
constexpr std::array<Point2, 5> kTemplate112{{{38.2946, 51.6963},
                                               {73.5318, 51.5014},
                                               {56.0252, 71.7366},
                                               {41.5493, 92.3655},
                                               {70.7299, 92.2041}}};

Point2 centroid(const Landmarks5& l) {
    Point2 c;
    for (const auto& p : l.points) {
        c.x += p.x;
        c.y += p.y;
    }
    c.x /= 5.0;
    c.y /= 5.0;
    return c;
}

double spread(const Landmarks5& l) {
    const Point2 c = centroid(l);
    double s = 0.0;
    for (const auto& p : l.points) s += (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
    return s;
}

double magnitude(const Landmarks5& l) {
    double m = 0.0;
    for (const auto& p : l.points) m = std::max({m, std::abs(p.x), std::abs(p.y)});
    return m;
}

}  // namespace

void Landmarks5::validate() const {
    for (const auto& p : points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw DegenerateGeometry("landmark coordinate is not finite");
    const double m = std::max(1.0, magnitude(*this));
    if (spread(*this) <= 1e-18 * m * m) throw DegenerateGeometry("landmarks are all coincident");
}

Landmarks5 Landmarks5::canonical(double size, double x0, double y0) {
    Landmarks5 l;
    for (std::size_t i = 0; i < 5; ++i) {
        l.points[i].x = x0 + kTemplate112[i].x / 112.0 * size;
        l.points[i].y = y0 + kTemplate112[i].y / 112.0 * size;
    }
    return l;
}

Landmarks5 Landmarks5::transformed(double scale, double angle_rad, double tx, double ty) const {
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    Landmarks5 out;
    for (std::size_t i = 0; i < 5; ++i) {
        const auto& p = points[i];
        out.points[i].x = scale * (c * p.x - s * p.y) + tx;
        out.points[i].y = scale * (s * p.x + c * p.y) + ty;
    }
    return out;
}

SimilarityFit estimate_similarity(const Landmarks5& src, const Landmarks5& dst) {
    src.validate();
    dst.validate();
    const Point2 ms = centroid(src), md = centroid(dst);
    // For 2-D similarities A = [[a, -b], [b, a]]; with centred points the
    // Umeyama solution reduces to a = sum(s . d) / sum|s|^2 and
    // b = sum(s x d) / sum|s|^2.
    double dot = 0.0, cross = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        const double sx = src.points[i].x - ms.x, sy = src.points[i].y - ms.y;
        const double dx = dst.points[i].x - md.x, dy = dst.points[i].y - md.y;
        dot += sx * dx + sy * dy;
        cross += sx * dy - sy * dx;
        ss += sx * sx + sy * sy;
    }
    const double a = dot / ss, b = cross / ss;
    SimilarityFit fit;
    fit.linear = {a, -b, b, a};
    const double det = a * a + b * b;
    fit.scale_hat = std::sqrt(std::abs(det));
    if (!(fit.scale_hat > 0.0) || !std::isfinite(fit.scale_hat))
        throw DegenerateGeometry("landmark fit has zero scale");
    fit.translation.x = md.x - (a * ms.x - b * ms.y);
    fit.translation.y = md.y - (b * ms.x + a * ms.y);
    return fit;
}

double patch_to_image_scale(double s_hat) {
    require(s_hat > 0.0 && std::isfinite(s_hat), "patch_to_image_scale needs s_hat > 0");
    return std::clamp(1.0 / s_hat, kMinPasteScale, kMaxPasteScale);
}

PasteOffset translation_offset(const Landmarks5& src, const Landmarks5& dst, double s) {
    double rx = 0.0, ry = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
        rx += dst.points[i].x - s * src.points[i].x;
        ry += dst.points[i].y - s * src.points[i].y;
    }
    rx /= 5.0;
    ry /= 5.0;
    // Residuals that are integral up to rounding noise (1e-9 px) floor to
    // that integer rather than the one below.
    constexpr double kSnap = 1e-9;
    return {static_cast<long>(std::floor(rx + kSnap)), static_cast<long>(std::floor(ry + kSnap))};
}

}  // namespace idcanvas
