#pragma once

#include <vector>

#include "idcanvas/attention_mask.hpp"
#include "idcanvas/tokenizer.hpp"

namespace idcanvas::testing {

// lengths = {|T|, |I|, |F_1|, ..., |F_n|}; branch layout only, no tokens.
inline TokenSequence label_sequence(const std::vector<std::size_t>& lengths) {
    TokenSequence seq;
    std::size_t pos = 0;
    for (std::size_t s = 0; s < lengths.size(); ++s) {
        BranchLabel label = s == 0   ? BranchLabel::text()
                            : s == 1 ? BranchLabel::image()
                                     : BranchLabel::id(static_cast<int>(s - 2));
        seq.segments.push_back({label, pos, pos + lengths[s]});
        for (std::size_t i = 0; i < lengths[s]; ++i) {
            seq.branch.push_back(label);
            seq.coords.push_back({});
        }
        pos += lengths[s];
    }
    return seq;
}

// The three-case rule written against raw segment offsets:
//   p in T u I                      -> 1
//   p in F_i and q in T u I u F_i   -> 1
//   otherwise                       -> 0
inline AttentionMask rule_enumeration_mask(const std::vector<std::size_t>& lengths) {
    std::vector<std::size_t> starts{0};
    for (std::size_t len : lengths) starts.push_back(starts.back() + len);
    const std::size_t n = starts.back();
    const std::size_t global_end = starts[2];
    auto segment_of = [&](std::size_t pos) {
        std::size_t s = 0;
        while (pos >= starts[s + 1]) ++s;
        return s;
    };
    AttentionMask m(n, false);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q) {
            bool allowed = false;
            if (p < global_end) {
                allowed = true;
            } else {
                const std::size_t fp = segment_of(p);
                if (q < global_end || segment_of(q) == fp) allowed = true;
            }
            m.set(p, q, allowed);
        }
    return m;
}

}  // namespace idcanvas::testing
