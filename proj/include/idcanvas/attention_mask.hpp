#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace idcanvas {

// Square query x key visibility matrix; allowed(p, q) == true means query p
// may attend to key q.
class AttentionMask {
   public:
    AttentionMask() = default;
    explicit AttentionMask(std::size_t n, bool fill = true) : n_(n), bits_(n * n, fill ? 1 : 0) {}

    static AttentionMask all_visible(std::size_t n) { return AttentionMask(n, true); }

    std::size_t size() const { return n_; }
    bool allowed(std::size_t p, std::size_t q) const { return bits_[p * n_ + q] != 0; }
    void set(std::size_t p, std::size_t q, bool v) { bits_[p * n_ + q] = v ? 1 : 0; }
    const std::uint8_t* row(std::size_t p) const { return bits_.data() + p * n_; }

    bool operator==(const AttentionMask& other) const = default;

   private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace idcanvas
