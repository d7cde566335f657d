#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gridface/rng.hpp"
#include "gridface/tensor.hpp"

namespace gridface {

// Central finite differences against the tape gradients. The builder must
// reconstruct the scalar objective from the leaves' current data on every
// call. Coordinates are subsampled when a leaf is large.
struct FdCheckOptions {
    double step = 1e-5;
    double rtol = 1e-6;
    double atol = 1e-9;
    int max_coords_per_leaf = 24;
    uint64_t coord_seed = 7;
};

struct FdCheckResult {
    double max_rel_err = 0.0;   // max over checked coords of |a-fd| / max(|a|,|fd|)
    double max_abs_err = 0.0;
    int checked = 0;
    int skipped = 0;  // coordinates straddling a kink (relu/bilinear facet)
    bool pass = true;
};

FdCheckResult check_gradients(const std::function<TensorPtr(Tape&)>& build,
                              const std::vector<TensorPtr>& leaves, const FdCheckOptions& opts);

struct GradCheckReport {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

// The full suite: every differentiable op at primitive tolerance, the warp
// and deformation ops, and the complete joint objective, each across
// several seeded configurations. Prints one line per entry when verbose.
std::vector<GradCheckReport> run_gradcheck_suite(bool verbose);

bool gradcheck_all_passed(const std::vector<GradCheckReport>& reports);

}  // namespace gridface
