#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tacl/ops.hpp"

namespace tacl {

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    double analytic_at_worst = 0.0;
    double numeric_at_worst = 0.0;
    size_t worst_coord = 0;
    size_t n_coords = 0;

    std::string to_string() const {
        return std::string(pass ? "pass" : "FAIL") + " max_rel_err=" +
               std::to_string(max_rel_err) + " at coord " + std::to_string(worst_coord) + " (" +
               std::to_string(n_coords) + " coords, analytic=" +
               std::to_string(analytic_at_worst) + ", numeric=" +
               std::to_string(numeric_at_worst) + ")";
    }
};

// Central-difference check of d(loss)/d(wrt[i]) for a scalar-valued builder.
// `build` must be deterministic: every call reconstructs the same computation
// from the current tensor values (seed any internal randomness per call).
template <typename T>
GradCheckReport grad_check_fn(const std::function<Tensor<T>(Graph<T>&)>& build,
                              std::vector<Tensor<T>> wrt, double eps, double tol) {
    if (eps <= 0) throw ValueError("grad_check: eps must be positive");
    for (auto& t : wrt) t.set_requires_grad(true);

    Graph<T> g;
    Tensor<T> loss = build(g);
    if (loss.numel() != 1) throw ShapeError("grad_check: function must be scalar-valued");
    g.backward(loss);

    std::vector<std::vector<T>> analytic;
    analytic.reserve(wrt.size());
    for (auto& t : wrt)
        analytic.emplace_back(t.grad().begin(), t.grad().end());

    auto eval = [&]() -> double {
        Graph<T> ng(false);
        return static_cast<double>(build(ng).value());
    };

    GradCheckReport rep;
    size_t coord = 0;
    for (size_t ti = 0; ti < wrt.size(); ++ti) {
        Tensor<T>& t = wrt[ti];
        for (size_t i = 0; i < t.numel(); ++i, ++coord) {
            T orig = t.at(i);
            t.at(i) = orig + T(eps);
            double fp = eval();
            t.at(i) = orig - T(eps);
            double fm = eval();
            t.at(i) = orig;
            double numeric = (fp - fm) / (2.0 * eps);
            double a = static_cast<double>(analytic[ti][i]);
            double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
            if (rel >= rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_coord = coord;
                rep.analytic_at_worst = a;
                rep.numeric_at_worst = numeric;
            }
        }
    }
    rep.n_coords = coord;
    rep.pass = rep.max_rel_err <= tol;
    return rep;
}

// Convenience form for a single-input function f(g, x) -> scalar.
template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>(Graph<T>&, Tensor<T>)>& f, Tensor<T> x,
                           double eps, double tol) {
    return grad_check_fn<T>([&](Graph<T>& g) { return f(g, x); }, {x}, eps, tol);
}

}  // namespace tacl
