#pragma once

#include <string>
#include <vector>

namespace idcanvas {

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Gradient catalogue, model-level gradients, oracle invariance and
// calibration, copy-paste poles and the attention-mask rule on random
// layouts. Each suite reports one line.
std::vector<CheckLine> run_self_checks();

}  // namespace idcanvas
