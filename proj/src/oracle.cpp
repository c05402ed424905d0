#include "idcanvas/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "idcanvas/errors.hpp"
#include "idcanvas/image.hpp"
#include "idcanvas/log.hpp"

namespace idcanvas {

namespace {

constexpr double kBlobAmplitude = 0.35;
constexpr double kMinIdentityStd = 0.07;
constexpr std::size_t kReferenceSize = 16;

double pixel_std(const Tensor& img) {
    double mean = 0.0;
    for (double v : img.data()) mean += v;
    mean /= static_cast<double>(img.size());
    double var = 0.0;
    for (double v : img.data()) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(img.size()));
}

}  // namespace

Nuisance Nuisance::sample(Rng& rng) {
    Nuisance n;
    n.contrast = uniform(rng, 0.8, 1.2);
    n.brightness = uniform(rng, -0.05, 0.05);
    n.noise = uniform(rng, 0.0, 0.01);
    return n;
}

Tensor sample_identity(Rng& rng) {
    for (;;) {
        Tensor z({kIdentityDim});
        for (double& v : z.data()) v = uniform(rng, -1.0, 1.0);
        if (pixel_std(render_identity(z, kReferenceSize)) > kMinIdentityStd) return z;
    }
}

Tensor render_identity(const Tensor& z, std::size_t size, const Nuisance& nuisance, Rng* rng) {
    require(z.size() == kIdentityDim, "render_identity: identity vector must have 8 entries");
    require(size >= 2, "render_identity: size must be at least 2");
    require(nuisance.noise == 0.0 || rng != nullptr, "render_identity: noise needs an rng");
    Tensor img = make_image(size, size, 0.5);
    for (std::size_t b = 0; b < 2; ++b) {
        const double cx = 0.5 + 0.32 * z[4 * b];
        const double cy = 0.5 + 0.32 * z[4 * b + 1];
        const double hue = std::numbers::pi * z[4 * b + 2];
        const double sigma = 0.16 + 0.04 * z[4 * b + 3];
        const double colour[3] = {std::cos(hue), std::cos(hue - 2.0 * std::numbers::pi / 3.0),
                                  std::cos(hue + 2.0 * std::numbers::pi / 3.0)};
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                const double px = (static_cast<double>(x) + 0.5) / static_cast<double>(size);
                const double py = (static_cast<double>(y) + 0.5) / static_cast<double>(size);
                const double w = std::exp(-((px - cx) * (px - cx) + (py - cy) * (py - cy)) /
                                          (2.0 * sigma * sigma));
                for (std::size_t k = 0; k < 3; ++k) img.at(y, x, k) += kBlobAmplitude * w * colour[k];
            }
    }
    for (double& v : img.data()) {
        v = 0.5 + nuisance.contrast * (v - 0.5) + nuisance.brightness;
        if (nuisance.noise > 0.0) v += normal(*rng, 0.0, nuisance.noise);
    }
    clamp_unit(img);
    return img;
}

Tensor area_weights(std::size_t n, std::size_t m) {
    require(n > 0 && m > 0, "area_weights: empty extent");
    Tensor w({m, n});
    const double step = static_cast<double>(n) / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double lo = static_cast<double>(i) * step, hi = lo + step;
        for (std::size_t k = 0; k < n; ++k) {
            const double overlap = std::min(hi, static_cast<double>(k + 1)) -
                                   std::max(lo, static_cast<double>(k));
            if (overlap > 0.0) w.at(i, k) = overlap / step;
        }
    }
    return w;
}

OracleEmbedder::OracleEmbedder(std::uint64_t seed)
    : projection_({3 * kOracleGrid * kOracleGrid, kOracleDim}) {
    Rng rng(seed);
    const double sd = 1.0 / std::sqrt(static_cast<double>(kOracleDim));
    for (double& v : projection_.data()) v = normal(rng, 0.0, sd);
}

ad::Var OracleEmbedder::embed(const ad::Var& patch) const {
    require(patch.value().rank() == 3 && patch.value().shape()[2] == 3,
            "embed: patch must be [h, w, 3]");
    const std::size_t h = patch.value().shape()[0], w = patch.value().shape()[1];
    const std::size_t n = h * w * 3;
    const ad::Var flat = ad::reshape(patch, {1, n});

    const double s = pixel_std(patch.value());
    if (s < 1e-9) log_warn("embed: near-constant patch, embedding is degenerate");
    const ad::Var standardized = ad::layer_norm(flat);

    // Separable area resampling as one [g*g, h*w] operator on pixel rows.
    const Tensor wy = area_weights(h, kOracleGrid), wx = area_weights(w, kOracleGrid);
    Tensor resample({kOracleGrid * kOracleGrid, h * w});
    for (std::size_t i = 0; i < kOracleGrid; ++i)
        for (std::size_t y = 0; y < h; ++y) {
            const double a = wy.at(i, y);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < kOracleGrid; ++j)
                for (std::size_t x = 0; x < w; ++x)
                    resample.at(i * kOracleGrid + j, y * w + x) = a * wx.at(j, x);
        }
    const ad::Var pooled = ad::matmul(ad::constant(std::move(resample)),
                                      ad::reshape(standardized, {h * w, 3}));
    const ad::Var features = ad::reshape(pooled, {1, 3 * kOracleGrid * kOracleGrid});
    const ad::Var projected = ad::matmul(features, ad::constant(projection_));
    return ad::reshape(ad::l2_normalize(projected), {kOracleDim});
}

Tensor OracleEmbedder::embed(const Tensor& patch) const {
    return embed(ad::constant(patch)).value();
}

}  // namespace idcanvas
