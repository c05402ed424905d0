#include "idcanvas/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "idcanvas/errors.hpp"

namespace idcanvas {

std::size_t image_height(const Tensor& img) { return img.dim(0); }
std::size_t image_width(const Tensor& img) { return img.dim(1); }
std::size_t image_channels(const Tensor& img) { return img.rank() == 3 ? img.dim(2) : 1; }

namespace {

Tensor as_rank3(const Tensor& img) {
    if (img.rank() == 3) return img;
    require(img.rank() == 2, "image must be rank 2 or 3");
    return img.reshaped({img.dim(0), img.dim(1), 1});
}

double src_coord(std::size_t dst, std::size_t in, std::size_t out) {
    return (static_cast<double>(dst) + 0.5) * static_cast<double>(in) / static_cast<double>(out) -
           0.5;
}

}  // namespace

Tensor resize_bilinear(const Tensor& img, std::size_t out_h, std::size_t out_w) {
    const Tensor src = as_rank3(img);
    const std::size_t h = src.dim(0), w = src.dim(1), c = src.dim(2);
    require(h > 0 && w > 0 && out_h > 0 && out_w > 0, "resize of an empty image");
    Tensor out({out_h, out_w, c});
    for (std::size_t y = 0; y < out_h; ++y) {
        const double sy = std::clamp(src_coord(y, h, out_h), 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < out_w; ++x) {
            const double sx = std::clamp(src_coord(x, w, out_w), 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(std::floor(sx));
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double fx = sx - static_cast<double>(x0);
            for (std::size_t k = 0; k < c; ++k) {
                const double top = (1 - fx) * src.at(y0, x0, k) + fx * src.at(y0, x1, k);
                const double bot = (1 - fx) * src.at(y1, x0, k) + fx * src.at(y1, x1, k);
                out.at(y, x, k) = (1 - fy) * top + fy * bot;
            }
        }
    }
    return img.rank() == 3 ? out : out.reshaped({out_h, out_w});
}

Tensor resize_nearest(const Tensor& img, std::size_t out_h, std::size_t out_w) {
    const Tensor src = as_rank3(img);
    const std::size_t h = src.dim(0), w = src.dim(1), c = src.dim(2);
    require(h > 0 && w > 0 && out_h > 0 && out_w > 0, "resize of an empty image");
    Tensor out({out_h, out_w, c});
    for (std::size_t y = 0; y < out_h; ++y) {
        const std::size_t sy = std::min(h - 1, y * h / out_h);
        for (std::size_t x = 0; x < out_w; ++x) {
            const std::size_t sx = std::min(w - 1, x * w / out_w);
            for (std::size_t k = 0; k < c; ++k) out.at(y, x, k) = src.at(sy, sx, k);
        }
    }
    return img.rank() == 3 ? out : out.reshaped({out_h, out_w});
}

void clamp_unit(Tensor& img) {
    for (double& v : img.data()) v = std::clamp(v, 0.0, 1.0);
}

namespace {

unsigned char quantize(double v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void write_pnm(const std::string& path, const char* magic, std::size_t h, std::size_t w,
               const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << magic << "\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& rgb) {
    require(rgb.rank() == 3 && rgb.dim(2) == 3, "write_ppm expects [H,W,3]");
    std::vector<unsigned char> bytes(rgb.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) bytes[i] = quantize(rgb[i]);
    write_pnm(path, "P6", rgb.dim(0), rgb.dim(1), bytes);
}

void write_pgm(const std::string& path, const Tensor& gray) {
    require(gray.rank() == 2 || (gray.rank() == 3 && gray.dim(2) == 1), "write_pgm expects [H,W]");
    std::vector<unsigned char> bytes(gray.size());
    for (std::size_t i = 0; i < gray.size(); ++i) bytes[i] = quantize(gray[i]);
    write_pnm(path, "P5", gray.dim(0), gray.dim(1), bytes);
}

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic;
    std::size_t w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || maxval != 255) throw std::runtime_error(path + ": not a binary 8-bit PPM");
    in.get();
    std::vector<unsigned char> bytes(w * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw std::runtime_error(path + ": truncated pixel data");
    Tensor img({h, w, 3});
    for (std::size_t i = 0; i < bytes.size(); ++i) img[i] = bytes[i] / 255.0;
    return img;
}

Tensor hstack_images(const std::vector<Tensor>& images, std::size_t gap) {
    std::size_t h = 0, w = 0;
    for (const auto& im : images) {
        h = std::max(h, im.dim(0));
        w += im.dim(1);
    }
    if (!images.empty()) w += gap * (images.size() - 1);
    Tensor out = make_image(h, w, 1.0);
    std::size_t x0 = 0;
    for (const auto& im : images) {
        const Tensor src = as_rank3(im);
        for (std::size_t y = 0; y < src.dim(0); ++y)
            for (std::size_t x = 0; x < src.dim(1); ++x)
                for (std::size_t k = 0; k < 3; ++k)
                    out.at(y, x0 + x, k) = src.at(y, x, std::min(k, src.dim(2) - 1));
        x0 += src.dim(1) + gap;
    }
    return out;
}

Tensor crop_image(const Tensor& img, const Box& box) {
    const std::size_t c = image_channels(img);
    require(box.w > 0 && box.h > 0 && box.x0 + box.w <= image_width(img) &&
                box.y0 + box.h <= image_height(img),
            "crop_image: box outside the image");
    Tensor out({box.h, box.w, c});
    for (std::size_t y = 0; y < box.h; ++y)
        for (std::size_t x = 0; x < box.w; ++x)
            for (std::size_t k = 0; k < c; ++k) out.at(y, x, k) = img.at(box.y0 + y, box.x0 + x, k);
    return out;
}

}  // namespace idcanvas
