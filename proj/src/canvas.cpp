#include "idcanvas/canvas.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "idcanvas/errors.hpp"
#include "idcanvas/image.hpp"

namespace idcanvas {

FacePatch FacePatch::opaque(Tensor pixels) {
    require(pixels.rank() == 3 && pixels.dim(2) == 3, "face patch pixels must be [H,W,3]");
    FacePatch p;
    p.alpha = Tensor({pixels.dim(0), pixels.dim(1)}, 1.0);
    p.pixels = std::move(pixels);
    return p;
}

void FacePatch::validate() const {
    require(pixels.rank() == 3 && pixels.dim(2) == 3, "face patch pixels must be [H,W,3]");
    require(alpha.rank() == 2 && alpha.dim(0) == pixels.dim(0) && alpha.dim(1) == pixels.dim(1),
            "face patch alpha extents must match pixels");
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    require(std::all_of(pixels.data().begin(), pixels.data().end(), in_unit) &&
                std::all_of(alpha.data().begin(), alpha.data().end(), in_unit),
            "face patch values must lie in [0,1]");
}

LocationCanvas::LocationCanvas(std::size_t height, std::size_t width)
    : pixels_(make_image(height, width, 1.0)), mask_(height * width, 0) {
    require(height > 0 && width > 0, "canvas extents must be positive");
}

Tensor LocationCanvas::mask_image() const {
    Tensor m({height(), width()});
    for (std::size_t i = 0; i < mask_.size(); ++i) m[i] = mask_[i];
    return m;
}

std::size_t scaled_extent(std::size_t extent, double scale) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(extent * scale)));
}

void LocationCanvas::paste(const FacePatch& patch, double scale, PasteOffset offset,
                           double raw_scale) {
    patch.validate();
    require(scale >= kMinPasteScale && scale <= kMaxPasteScale, "paste scale outside [0.2, 5]");
    const std::size_t ph = scaled_extent(patch.height(), scale);
    const std::size_t pw = scaled_extent(patch.width(), scale);
    const Tensor px = (ph == patch.height() && pw == patch.width())
                          ? patch.pixels
                          : resize_bilinear(patch.pixels, ph, pw);
    const Tensor al = (ph == patch.height() && pw == patch.width())
                          ? patch.alpha
                          : resize_nearest(patch.alpha, ph, pw);

    PasteRecord rec{raw_scale, scale, offset, pw, ph, false};
    const long H = static_cast<long>(height()), W = static_cast<long>(width());
    for (std::size_t y = 0; y < ph; ++y) {
        const long cy = offset.y + static_cast<long>(y);
        for (std::size_t x = 0; x < pw; ++x) {
            const long cx = offset.x + static_cast<long>(x);
            if (cy < 0 || cy >= H || cx < 0 || cx >= W) {
                rec.clipped = true;
                continue;
            }
            const double a = al.at(y, x);
            if (a <= 0.0) continue;
            const auto uy = static_cast<std::size_t>(cy), ux = static_cast<std::size_t>(cx);
            for (std::size_t k = 0; k < 3; ++k) {
                double& dst = pixels_.at(uy, ux, k);
                dst = a * px.at(y, x, k) + (1.0 - a) * dst;
            }
            mask_[uy * width() + ux] = 1;
        }
    }
    records_.push_back(rec);
}

LocationCanvas paste_face(LocationCanvas canvas, const FacePatch& patch, double scale,
                          PasteOffset offset) {
    canvas.paste(patch, scale, offset, 1.0 / scale);
    return canvas;
}

LocationCanvas place_face(LocationCanvas canvas, const FacePatch& patch,
                          const Landmarks5& patch_landmarks, const Landmarks5& image_landmarks) {
    const SimilarityFit fit = estimate_similarity(image_landmarks, patch_landmarks);
    const double s = patch_to_image_scale(fit.scale_hat);
    const PasteOffset off = translation_offset(patch_landmarks, image_landmarks, s);
    canvas.paste(patch, s, off, fit.scale_hat);
    return canvas;
}

// ---------------------------------------------------------------------------

bool DegradationSpec::is_identity() const {
    return brightness == 0.0 && contrast == 1.0 && !blur && noise_sigma == 0.0 && !flip &&
           !grayscale;
}

void DegradationSpec::validate() const {
    if (!(brightness >= -0.2 && brightness <= 0.2))
        throw ConfigError("brightness must lie in [-0.2, 0.2]");
    if (!(contrast >= 0.8 && contrast <= 1.25))
        throw ConfigError("contrast must lie in [0.8, 1.25]");
    if (!(noise_sigma >= 0.0 && noise_sigma <= 0.05))
        throw ConfigError("noise sigma must lie in [0, 0.05]");
}

DegradationSpec DegradationSpec::parse(const std::string& text) {
    DegradationSpec spec;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item.empty() || item == "none") continue;
        const auto eq = item.find('=');
        const std::string name = item.substr(0, eq);
        double value = 0.0;
        if (eq != std::string::npos) {
            try {
                value = std::stod(item.substr(eq + 1));
            } catch (const std::exception&) {
                throw ConfigError("bad degradation magnitude in '" + item + "'");
            }
        }
        if (name == "brightness" && eq != std::string::npos) spec.brightness = value;
        else if (name == "contrast" && eq != std::string::npos) spec.contrast = value;
        else if (name == "noise" && eq != std::string::npos) spec.noise_sigma = value;
        else if (name == "blur" && eq == std::string::npos) spec.blur = true;
        else if (name == "flip" && eq == std::string::npos) spec.flip = true;
        else if (name == "grayscale" && eq == std::string::npos) spec.grayscale = true;
        else throw ConfigError("unknown degradation '" + item + "'");
    }
    spec.validate();
    return spec;
}

std::string DegradationSpec::to_string() const {
    std::ostringstream os;
    os.precision(17);
    std::string sep;
    if (grayscale) os << sep << "grayscale", sep = ",";
    if (contrast != 1.0) os << sep << "contrast=" << contrast, sep = ",";
    if (brightness != 0.0) os << sep << "brightness=" << brightness, sep = ",";
    if (blur) os << sep << "blur", sep = ",";
    if (noise_sigma != 0.0) os << sep << "noise=" << noise_sigma, sep = ",";
    if (flip) os << sep << "flip", sep = ",";
    return sep.empty() ? "none" : os.str();
}

DegradationSpec DegradationSpec::sample(Rng& rng) {
    DegradationSpec s;
    if (bernoulli(rng, 0.5)) s.brightness = uniform(rng, -0.2, 0.2);
    if (bernoulli(rng, 0.5)) s.contrast = std::exp(uniform(rng, std::log(0.8), std::log(1.25)));
    s.blur = bernoulli(rng, 0.5);
    if (bernoulli(rng, 0.5)) s.noise_sigma = uniform(rng, 0.0, 0.05);
    s.flip = bernoulli(rng, 0.5);
    s.grayscale = bernoulli(rng, 0.2);
    return s;
}

namespace {

Tensor blur3(const Tensor& img) {
    const std::size_t h = img.dim(0), w = img.dim(1), c = img.dim(2);
    const double k[3] = {0.25, 0.5, 0.25};
    auto pass = [&](const Tensor& in, bool horizontal) {
        Tensor out(in.shape());
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    for (int d = -1; d <= 1; ++d) {
                        const long yy = horizontal ? static_cast<long>(y)
                                                   : std::clamp<long>(static_cast<long>(y) + d, 0, static_cast<long>(h) - 1);
                        const long xx = horizontal ? std::clamp<long>(static_cast<long>(x) + d, 0, static_cast<long>(w) - 1)
                                                   : static_cast<long>(x);
                        acc += k[d + 1] * in.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), ch);
                    }
                    out.at(y, x, ch) = acc;
                }
        return out;
    };
    return pass(pass(img, true), false);
}

}  // namespace

FacePatch degrade_patch(const FacePatch& patch, const DegradationSpec& spec, Rng& rng) {
    spec.validate();
    FacePatch out = patch;
    if (spec.is_identity()) return out;
    Tensor& px = out.pixels;
    const std::size_t h = out.height(), w = out.width();

    if (spec.grayscale)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                const double l = 0.299 * px.at(y, x, 0) + 0.587 * px.at(y, x, 1) + 0.114 * px.at(y, x, 2);
                for (std::size_t k = 0; k < 3; ++k) px.at(y, x, k) = l;
            }
    if (spec.contrast != 1.0)
        for (double& v : px.data()) v = 0.5 + spec.contrast * (v - 0.5);
    if (spec.brightness != 0.0)
        for (double& v : px.data()) v += spec.brightness;
    if (spec.blur) px = blur3(px);
    if (spec.noise_sigma > 0.0)
        for (double& v : px.data()) v += normal(rng, 0.0, spec.noise_sigma);
    if (spec.flip) {
        Tensor fp(px.shape());
        Tensor fa(out.alpha.shape());
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
                for (std::size_t k = 0; k < 3; ++k) fp.at(y, w - 1 - x, k) = px.at(y, x, k);
                fa.at(y, w - 1 - x) = out.alpha.at(y, x);
            }
        px = std::move(fp);
        out.alpha = std::move(fa);
    }
    clamp_unit(px);
    return out;
}

}  // namespace idcanvas
