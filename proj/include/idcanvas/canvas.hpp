#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idcanvas/geometry.hpp"
#include "idcanvas/rng.hpp"
#include "idcanvas/tensor.hpp"

namespace idcanvas {

// Norm-cropped face: RGB pixels [H,W,3] and coverage alpha [H,W], both in [0,1].
struct FacePatch {
    Tensor pixels;
    Tensor alpha;

    static FacePatch opaque(Tensor pixels);
    std::size_t height() const { return pixels.dim(0); }
    std::size_t width() const { return pixels.dim(1); }
    void validate() const;
};

struct PasteRecord {
    double raw_scale = 1.0;  // s_hat from the landmark fit (1 / scale when pasted directly)
    double scale = 1.0;      // s_i, patch -> image
    PasteOffset offset;
    std::size_t width = 0;   // resized footprint
    std::size_t height = 0;
    bool clipped = false;    // part (or all) of the footprint fell outside the canvas
};

// Image-sized canvas that starts pure white with an empty mask. Faces are
// source-over composited in paste order; the mask is the union of every
// pasted alpha > 0.
class LocationCanvas {
   public:
    LocationCanvas(std::size_t height, std::size_t width);

    std::size_t height() const { return pixels_.dim(0); }
    std::size_t width() const { return pixels_.dim(1); }
    const Tensor& pixels() const { return pixels_; }
    bool mask(std::size_t y, std::size_t x) const { return mask_[y * width() + x] != 0; }
    const std::vector<std::uint8_t>& mask_bits() const { return mask_; }
    Tensor mask_image() const;
    const std::vector<PasteRecord>& records() const { return records_; }

    void paste(const FacePatch& patch, double scale, PasteOffset offset, double raw_scale);

   private:
    Tensor pixels_;
    std::vector<std::uint8_t> mask_;
    std::vector<PasteRecord> records_;
};

// Resizes the patch by s_i (bilinear pixels, nearest-neighbour alpha) and
// composites it at the offset.
LocationCanvas paste_face(LocationCanvas canvas, const FacePatch& patch, double scale,
                          PasteOffset offset);

// Full landmark path: fit image->patch similarity, take the clamped
// reciprocal scale, compute the mean-residual offset, paste.
LocationCanvas place_face(LocationCanvas canvas, const FacePatch& patch,
                          const Landmarks5& patch_landmarks, const Landmarks5& image_landmarks);

// Side length of the patch after scaling by s_i.
std::size_t scaled_extent(std::size_t extent, double scale);

struct DegradationSpec {
    double brightness = 0.0;   // additive, [-0.2, 0.2]
    double contrast = 1.0;     // about mid-grey, [0.8, 1.25]
    bool blur = false;         // 3x3 binomial
    double noise_sigma = 0.0;  // additive Gaussian, [0, 0.05]
    bool flip = false;         // horizontal, also flips alpha
    bool grayscale = false;

    bool is_identity() const;
    void validate() const;

    // Comma-separated list such as "brightness=0.1,contrast=1.1,blur,noise=0.02,flip".
    // Unknown names or out-of-range magnitudes throw ConfigError.
    static DegradationSpec parse(const std::string& text);
    std::string to_string() const;

    // Each component switched on with probability 1/2, magnitudes uniform.
    static DegradationSpec sample(Rng& rng);
};

FacePatch degrade_patch(const FacePatch& patch, const DegradationSpec& spec, Rng& rng);

}  // namespace idcanvas
