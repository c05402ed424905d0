#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idcanvas/tensor.hpp"

namespace idcanvas {

// Images are rank-3 tensors [height, width, channels] with values in [0, 1].
inline Tensor make_image(std::size_t h, std::size_t w, double fill = 0.0, std::size_t c = 3) {
    return Tensor({h, w, c}, fill);
}

std::size_t image_height(const Tensor& img);
std::size_t image_width(const Tensor& img);
std::size_t image_channels(const Tensor& img);

// Half-pixel-centred bilinear resampling with edge clamping.
Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w);
Tensor resize_nearest(const Tensor& img, std::size_t out_h, std::size_t out_w);

void clamp_unit(Tensor& img);

// Axis-aligned pixel box [x0, x0 + w) x [y0, y0 + h).
struct Box {
    std::size_t x0 = 0, y0 = 0, w = 0, h = 0;

    bool contains(std::size_t x, std::size_t y) const {
        return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h;
    }
    bool overlaps(const Box& o) const {
        return x0 < o.x0 + o.w && o.x0 < x0 + w && y0 < o.y0 + o.h && o.y0 < y0 + h;
    }
    bool operator==(const Box&) const = default;
};

Tensor crop_image(const Tensor& img, const Box& box);

// Binary PPM (P6) / PGM (P5), maxval 255. Values are clamped to [0,1] and
// rounded to the nearest level.
void write_ppm(const std::string& path, const Tensor& rgb);
void write_pgm(const std::string& path, const Tensor& gray);
Tensor read_ppm(const std::string& path);

// Places images left to right on a white strip; heights may differ.
Tensor hstack_images(const std::vector<Tensor>& images, std::size_t gap = 2);

}  // namespace idcanvas
