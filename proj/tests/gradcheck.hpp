#pragma once

// Central finite-difference gradient checker used across the kernel and
// model tests. Everything runs in double; the comparison is the max
// relative error over probed coordinates.

#include <functional>
#include <vector>

#include "f2r/autograd/ops.hpp"
#include "f2r/core/rng.hpp"

namespace f2r::testing {

using BuildFn =
    std::function<ag::VarId(ag::Tape<double>&, const std::vector<ag::VarId>&)>;

struct GradCheck {
    double max_rel_err = 0.0;
    int coords_checked = 0;
};

inline double eval_loss(const std::vector<TensorD>& inputs, const BuildFn& build) {
    ag::Tape<double> tape;
    std::vector<ag::VarId> ids;
    for (const auto& t : inputs) ids.push_back(tape.leaf(t, false));
    return tape.val(build(tape, ids)).data[0];
}

// Probes up to `per_tensor` random coordinates of every input (all of them
// when the tensor is small). step = 1e-4 per the double-precision check
// convention used throughout.
inline GradCheck grad_check(std::vector<TensorD> inputs, const BuildFn& build,
                            int per_tensor = 32, double step = 1e-4, uint64_t seed = 0xfd) {
    ag::Tape<double> tape;
    std::vector<ag::VarId> ids;
    for (const auto& t : inputs) ids.push_back(tape.leaf(t, true));
    const ag::VarId loss = build(tape, ids);
    tape.backward(loss);

    GradCheck res;
    Rng rng(seed);
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        const std::size_t n = inputs[ti].numel();
        std::vector<std::size_t> coords;
        if (static_cast<int>(n) <= per_tensor) {
            for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int i = 0; i < per_tensor; ++i)
                coords.push_back(static_cast<std::size_t>(rng.uniform_int(static_cast<int>(n))));
        }
        for (std::size_t c : coords) {
            const double keep = inputs[ti].data[c];
            inputs[ti].data[c] = keep + step;
            const double fp = eval_loss(inputs, build);
            inputs[ti].data[c] = keep - step;
            const double fm = eval_loss(inputs, build);
            inputs[ti].data[c] = keep;
            const double numeric = (fp - fm) / (2.0 * step);
            const double analytic =
                tape.has_grad(ids[ti]) ? tape.grad(ids[ti]).data[c] : 0.0;
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
            res.max_rel_err = std::max(res.max_rel_err, std::abs(numeric - analytic) / denom);
            ++res.coords_checked;
        }
    }
    return res;
}

inline TensorD random_tensor(const std::vector<int>& shape, uint64_t seed, double lo = -1.0,
                             double hi = 1.0) {
    TensorD t(shape);
    Rng rng(seed);
    for (auto& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Flow values at least 0.15 away from integers so the finite-difference
// step never crosses a bilinear cell boundary.
inline TensorD random_flow(int h, int w, uint64_t seed, int max_mag = 2) {
    TensorD t({2, h, w});
    Rng rng(seed);
    for (auto& v : t.data) {
        const int k = rng.uniform_int(2 * max_mag + 1) - max_mag;
        const double frac = rng.uniform(0.15, 0.85);
        v = k + (rng.uniform() < 0.5 ? frac : -frac);
    }
    return t;
}

}  // namespace f2r::testing
