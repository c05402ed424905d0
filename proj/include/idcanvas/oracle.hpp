#pragma once

#include <cstdint>

#include "idcanvas/autodiff.hpp"
#include "idcanvas/rng.hpp"
#include "idcanvas/tensor.hpp"

namespace idcanvas {

// Toy identities: z in [-1,1]^8 places two coloured Gaussian blobs on a
// mid-grey tile. Per blob: centre (2), hue (1), width (1).
constexpr std::size_t kIdentityDim = 8;
constexpr std::size_t kOracleDim = 32;
constexpr std::size_t kOracleGrid = 8;
constexpr std::uint64_t kOracleSeed = 0x1dca'0bac1eULL;

// Appearance changes that leave identity untouched.
struct Nuisance {
    double contrast = 1.0;    // about 0.5
    double brightness = 0.0;
    double noise = 0.0;       // per-pixel Gaussian sigma

    static Nuisance sample(Rng& rng);
    bool is_identity() const { return contrast == 1.0 && brightness == 0.0 && noise == 0.0; }
};

// Identity vector in [-1,1]^8. Near-flat renders (std <= 0.07 at 16 px)
// are rejected and redrawn.
Tensor sample_identity(Rng& rng);

// [size, size, 3] in [0,1]. `rng` is only drawn from when nuisance.noise > 0.
Tensor render_identity(const Tensor& z, std::size_t size, const Nuisance& nuisance = {},
                       Rng* rng = nullptr);

// Stand-in for a face-recognition network: standardise the patch, area-
// resample to 8x8, project with a fixed seeded matrix, L2-normalise.
class OracleEmbedder {
   public:
    explicit OracleEmbedder(std::uint64_t seed = kOracleSeed);

    // patch: [h, w, 3], any value range. Differentiable.
    ad::Var embed(const ad::Var& patch) const;
    Tensor embed(const Tensor& patch) const;

    const Tensor& projection() const { return projection_; }

   private:
    Tensor projection_;  // [3 * grid * grid, dim]
};

// Row-stochastic box-filter weights taking n samples to m (area overlap).
Tensor area_weights(std::size_t n, std::size_t m);

}  // namespace idcanvas
