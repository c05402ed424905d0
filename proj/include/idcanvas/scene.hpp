#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "idcanvas/geometry.hpp"
#include "idcanvas/image.hpp"
#include "idcanvas/rng.hpp"

namespace idcanvas {

// Prompt vocabulary: a colour word followed by a pattern word.
inline constexpr int kColourWords = 4;   // red, green, blue, yellow
inline constexpr int kPatternWords = 4;  // plain, hstripes, vstripes, checker
inline constexpr int kVocabSize = kColourWords + kPatternWords;

std::string word_name(int token);

struct SceneSpec {
    std::size_t image_size = 64;
    std::size_t patch = 4;
    std::size_t reference_size = 16;
    std::vector<std::size_t> box_sizes{12, 16, 20};
    std::size_t min_identities = 1;
    std::size_t max_identities = 4;
    std::size_t max_packing_attempts = 200;

    void validate() const;  // ConfigError
};

struct SceneIdentity {
    Tensor z;                     // identity vector
    Tensor reference;             // [ref, ref, 3], independent nuisance
    Landmarks5 reference_landmarks;
    Box box;                      // patch-aligned location in the image
    Landmarks5 image_landmarks;
};

struct SyntheticScene {
    Tensor image;  // ground truth, [H,W,3] in [0,1]
    std::vector<int> prompt;
    std::vector<SceneIdentity> identities;

    // Boxes inside the image and pairwise disjoint.
    void validate() const;
};

Tensor render_background(const std::vector<int>& prompt, std::size_t size);

// n_identities = 0 draws the count uniformly from [min_identities, max_identities].
SyntheticScene generate_scene(const SceneSpec& spec, Rng& rng, std::size_t n_identities = 0);

// Scene i is drawn from its own stream derive_seed(seed, i).
std::vector<SyntheticScene> generate_dataset(const SceneSpec& spec, std::size_t count,
                                             std::uint64_t seed, std::size_t n_identities = 0);

// Flat binary archive ("IDCS" magic, little-endian) and its reader.
void save_dataset(const std::string& path, const std::vector<SyntheticScene>& scenes);
std::vector<SyntheticScene> load_dataset(const std::string& path);

}  // namespace idcanvas
