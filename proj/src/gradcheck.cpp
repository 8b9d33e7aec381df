#include "nighttrack/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "nighttrack/tensor.hpp"

namespace nighttrack {

FdReport finite_diff_check(const std::function<Tensor()>& loss_fn, ModelParams& params,
                           double eps,
                           const std::function<std::string(const std::string&)>& class_of) {
    if (eps <= 0.0) throw ContractError("finite_diff_check: eps must be positive");

    const double v0 = loss_fn().value();
    const double v1 = loss_fn().value();
    if (v0 != v1) {
        throw DeterminismError("finite_diff_check: two evaluations of f differ (" +
                               std::to_string(v0) + " vs " + std::to_string(v1) + ")");
    }

    // Analytic gradients from one reverse sweep.
    params.zero_grad();
    Tensor loss = loss_fn();
    backward(loss);
    GradMap analytic = params.collect_grads();

    FdReport report;
    for (auto& p : params.all()) {
        if (p.frozen) {
            report.coords_skipped_frozen += p.value.numel();
            continue;
        }
        const std::vector<double>& ag = analytic.at(p.name);
        std::vector<double>& w = p.value.data();
        const std::string cls = class_of ? class_of(p.name) : p.name;
        FdClassStat& stat = report.by_class[cls];
        for (size_t i = 0; i < w.size(); ++i) {
            const double save = w[i];
            w[i] = save + eps;
            const double fp = loss_fn().value();
            w[i] = save - eps;
            const double fm = loss_fn().value();
            w[i] = save;
            const double central = (fp - fm) / (2.0 * eps);
            const double rel = std::abs(ag[i] - central) /
                               std::max(1e-12, std::abs(ag[i]) + std::abs(central));
            stat.max_rel_error = std::max(stat.max_rel_error, rel);
            stat.coords += 1;
            report.max_rel_error = std::max(report.max_rel_error, rel);
            report.coords_checked += 1;
        }
    }
    return report;
}

}  // namespace nighttrack
