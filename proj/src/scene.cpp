#include "idcanvas/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "idcanvas/errors.hpp"
#include "idcanvas/oracle.hpp"

namespace idcanvas {

namespace {

constexpr double kColours[kColourWords][3] = {
    {0.78, 0.36, 0.32}, {0.36, 0.70, 0.42}, {0.36, 0.46, 0.80}, {0.82, 0.76, 0.36}};
constexpr double kPatternDepth = 0.12;
constexpr std::size_t kPatternPeriod = 16;

const char* const kWordNames[kVocabSize] = {"red",   "green",    "blue",     "yellow",
                                            "plain", "hstripes", "vstripes", "checker"};

static_assert(std::endian::native == std::endian::little, "archive I/O assumes little-endian");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("dataset archive truncated");
    return v;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    put<std::uint64_t>(out, t.rank());
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

Tensor get_tensor(std::istream& in) {
    Shape shape(get<std::uint64_t>(in));
    for (auto& d : shape) d = get<std::uint64_t>(in);
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data().data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("dataset archive truncated");
    return t;
}

void put_landmarks(std::ostream& out, const Landmarks5& l) {
    for (const auto& p : l.points) {
        put(out, p.x);
        put(out, p.y);
    }
}

Landmarks5 get_landmarks(std::istream& in) {
    Landmarks5 l;
    for (auto& p : l.points) {
        p.x = get<double>(in);
        p.y = get<double>(in);
    }
    return l;
}

}  // namespace

std::string word_name(int token) {
    require(token >= 0 && token < kVocabSize, "word_name: token out of range");
    return kWordNames[token];
}

void SceneSpec::validate() const {
    if (patch == 0 || image_size % patch != 0)
        throw ConfigError("scene: image size must be a multiple of the patch size");
    if (box_sizes.empty()) throw ConfigError("scene: no box sizes");
    for (std::size_t b : box_sizes)
        if (b == 0 || b % patch != 0 || b > image_size)
            throw ConfigError("scene: box size " + std::to_string(b) +
                              " must be a positive multiple of the patch size within the image");
    if (min_identities < 1 || min_identities > max_identities)
        throw ConfigError("scene: identity count range must satisfy 1 <= min <= max");
    if (reference_size < 4) throw ConfigError("scene: reference size too small");
}

void SyntheticScene::validate() const {
    const std::size_t h = image_height(image), w = image_width(image);
    for (std::size_t i = 0; i < identities.size(); ++i) {
        const Box& b = identities[i].box;
        require(b.w > 0 && b.h > 0 && b.x0 + b.w <= w && b.y0 + b.h <= h,
                "scene: identity box outside the image");
        for (std::size_t j = 0; j < i; ++j)
            require(!b.overlaps(identities[j].box), "scene: identity boxes overlap");
    }
}

Tensor render_background(const std::vector<int>& prompt, std::size_t size) {
    require(prompt.size() == 2 && prompt[0] >= 0 && prompt[0] < kColourWords &&
                prompt[1] >= kColourWords && prompt[1] < kVocabSize,
            "render_background: prompt must be (colour, pattern)");
    const double* colour = kColours[prompt[0]];
    const int pattern = prompt[1] - kColourWords;
    Tensor img = make_image(size, size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const bool by = (y / (kPatternPeriod / 2)) % 2 == 1;
            const bool bx = (x / (kPatternPeriod / 2)) % 2 == 1;
            bool dark = false;
            switch (pattern) {
                case 1: dark = by; break;
                case 2: dark = bx; break;
                case 3: dark = by != bx; break;
                default: break;
            }
            for (std::size_t k = 0; k < 3; ++k)
                img.at(y, x, k) = colour[k] - (dark ? kPatternDepth : 0.0);
        }
    return img;
}

SyntheticScene generate_scene(const SceneSpec& spec, Rng& rng, std::size_t n_identities) {
    spec.validate();
    if (n_identities == 0)
        n_identities = spec.min_identities + rng() % (spec.max_identities - spec.min_identities + 1);

    SyntheticScene scene;
    scene.prompt = {static_cast<int>(rng() % kColourWords),
                    kColourWords + static_cast<int>(rng() % kPatternWords)};
    scene.image = render_background(scene.prompt, spec.image_size);

    const std::size_t cells = spec.image_size / spec.patch;
    std::size_t attempts = 0;
    while (scene.identities.size() < n_identities) {
        if (++attempts > spec.max_packing_attempts)
            throw ConfigError("scene: could not pack " + std::to_string(n_identities) +
                              " disjoint boxes after " + std::to_string(spec.max_packing_attempts) +
                              " attempts");
        const std::size_t size = spec.box_sizes[rng() % spec.box_sizes.size()];
        const std::size_t span = cells - size / spec.patch + 1;
        Box box{spec.patch * (rng() % span), spec.patch * (rng() % span), size, size};
        const bool clash = std::any_of(scene.identities.begin(), scene.identities.end(),
                                       [&](const SceneIdentity& o) { return o.box.overlaps(box); });
        if (clash) continue;

        SceneIdentity id;
        id.z = sample_identity(rng);
        id.box = box;
        id.image_landmarks = Landmarks5::canonical(static_cast<double>(size),
                                                   static_cast<double>(box.x0),
                                                   static_cast<double>(box.y0));
        const Tensor face = render_identity(id.z, size, Nuisance::sample(rng), &rng);
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x)
                for (std::size_t k = 0; k < 3; ++k)
                    scene.image.at(box.y0 + y, box.x0 + x, k) = face.at(y, x, k);
        id.reference = render_identity(id.z, spec.reference_size, Nuisance::sample(rng), &rng);
        id.reference_landmarks = Landmarks5::canonical(static_cast<double>(spec.reference_size));
        scene.identities.push_back(std::move(id));
    }
    return scene;
}

std::vector<SyntheticScene> generate_dataset(const SceneSpec& spec, std::size_t count,
                                             std::uint64_t seed, std::size_t n_identities) {
    std::vector<SyntheticScene> scenes;
    scenes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, i));
        scenes.push_back(generate_scene(spec, rng, n_identities));
    }
    return scenes;
}

void save_dataset(const std::string& path, const std::vector<SyntheticScene>& scenes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write("IDCS", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, scenes.size());
    for (const auto& s : scenes) {
        put_tensor(out, s.image);
        put<std::uint64_t>(out, s.prompt.size());
        for (int t : s.prompt) put<std::int32_t>(out, t);
        put<std::uint64_t>(out, s.identities.size());
        for (const auto& id : s.identities) {
            put_tensor(out, id.z);
            put_tensor(out, id.reference);
            put_landmarks(out, id.reference_landmarks);
            for (std::size_t v : {id.box.x0, id.box.y0, id.box.w, id.box.h}) put<std::uint64_t>(out, v);
            put_landmarks(out, id.image_landmarks);
        }
    }
}

std::vector<SyntheticScene> load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "IDCS") throw std::runtime_error(path + ": not a dataset archive");
    if (get<std::uint32_t>(in) != 1) throw std::runtime_error(path + ": unsupported dataset version");
    std::vector<SyntheticScene> scenes(get<std::uint64_t>(in));
    for (auto& s : scenes) {
        s.image = get_tensor(in);
        s.prompt.resize(get<std::uint64_t>(in));
        for (int& t : s.prompt) t = get<std::int32_t>(in);
        s.identities.resize(get<std::uint64_t>(in));
        for (auto& id : s.identities) {
            id.z = get_tensor(in);
            id.reference = get_tensor(in);
            id.reference_landmarks = get_landmarks(in);
            id.box.x0 = get<std::uint64_t>(in);
            id.box.y0 = get<std::uint64_t>(in);
            id.box.w = get<std::uint64_t>(in);
            id.box.h = get<std::uint64_t>(in);
            id.image_landmarks = get_landmarks(in);
        }
        s.validate();
    }
    return scenes;
}

}  // namespace idcanvas
