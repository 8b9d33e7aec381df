#pragma once

#include <functional>
#include <map>
#include <string>

#include "nighttrack/params.hpp"

namespace nighttrack {

struct FdClassStat {
    double max_rel_error = 0.0;
    int64_t coords = 0;
};

struct FdReport {
    double max_rel_error = 0.0;
    int64_t coords_checked = 0;
    int64_t coords_skipped_frozen = 0;
    // Keyed by parameter class (see class_of); the default class is the
    // parameter name itself.
    std::map<std::string, FdClassStat> by_class;
    bool passes(double tol) const { return max_rel_error < tol; }
};

// Compares analytic gradients of a scalar-valued function against central
// finite differences, coordinate by coordinate, over all trainable
// parameters. `loss_fn` must rebuild the graph from the current parameter
// values on every call; it is evaluated twice up front and a mismatch is a
// DeterminismError. Relative error per coordinate:
//   |analytic - central| / max(1e-12, |analytic| + |central|)
FdReport finite_diff_check(
    const std::function<Tensor()>& loss_fn, ModelParams& params, double eps,
    const std::function<std::string(const std::string&)>& class_of = {});

}  // namespace nighttrack
