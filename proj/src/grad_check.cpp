#include "sta/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sta/errors.hpp"

namespace sta {

namespace {

double finite_or_throw(double v, std::size_t index) {
    if (!std::isfinite(v)) {
        throw NumericError("grad_check: non-finite function value at coordinate " + std::to_string(index));
    }
    return v;
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

}  // namespace

bool near_zero_kink(std::size_t, double value) { return std::fabs(value) < 1e-7; }

GradCheckResult grad_check(const ScalarFn& f, const Tensor& x, double eps, const KinkFn& skip) {
    Tensor analytic;
    {
        ad::Graph g;
        ad::Var xv = g.input(x, true);
        ad::Var y = f(g, xv);
        finite_or_throw(y.item(), 0);
        g.backward(y);
        analytic = xv.grad();
    }
    auto eval = [&](const Tensor& at, std::size_t index) {
        ad::Graph g;
        ad::Var xv = g.input(at, false);
        return finite_or_throw(f(g, xv).item(), index);
    };

    GradCheckResult result;
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (skip && skip(i, x[i])) {
            ++result.skipped;
            continue;
        }
        probe[i] = x[i] + eps;
        const double up = eval(probe, i);
        probe[i] = x[i] - eps;
        const double down = eval(probe, i);
        probe[i] = x[i];
        const double numeric = (up - down) / (2.0 * eps);
        result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[i], numeric));
        ++result.checked;
    }
    return result;
}

GradCheckResult compare_finite_differences(std::span<Tensor* const> params, std::span<const Tensor> analytic,
                                           const std::function<double()>& value, double eps) {
    if (params.size() != analytic.size()) throw ContractError("compare_finite_differences: size mismatch");
    GradCheckResult result;
    std::size_t flat = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& t = *params[p];
        if (!t.same_shape(analytic[p])) throw DimensionError("compare_finite_differences: gradient shape mismatch");
        for (std::size_t i = 0; i < t.size(); ++i, ++flat) {
            const double saved = t[i];
            t[i] = saved + eps;
            const double up = finite_or_throw(value(), flat);
            t[i] = saved - eps;
            const double down = finite_or_throw(value(), flat);
            t[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[p][i], numeric));
            ++result.checked;
        }
    }
    return result;
}

}  // namespace sta
