#include "protofs/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "protofs/core/errors.hpp"
#include "protofs/core/rng.hpp"

namespace protofs {

namespace {

double evaluate(const LossFn& loss_fn) {
    Tape tape(Tape::Mode::NoGrad);
    const double value = loss_fn(tape).item();
    if (!std::isfinite(value)) throw NumericError("finite_diff_check: loss is not finite");
    return value;
}

} // namespace

FiniteDiffReport finite_diff_report(std::span<Tensor> params, const LossFn& loss_fn,
                                    const FiniteDiffOptions& options) {
    if (!(options.h > 0.0)) throw ContractError("finite_diff_check: h must be positive");
    for (auto& p : params) {
        p.set_requires_grad(true);
        p.clear_grad();
    }
    {
        Tape tape;
        const Tensor loss = loss_fn(tape);
        if (!std::isfinite(loss.item())) throw NumericError("finite_diff_check: loss is not finite");
        backward(loss, tape);
    }

    FiniteDiffReport report;
    Rng rng(options.seed, 0x6772616463686b);
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& p = params[t];
        std::vector<std::size_t> coords;
        if (options.max_coords_per_tensor == 0 || options.max_coords_per_tensor >= p.size()) {
            coords.resize(p.size());
            std::iota(coords.begin(), coords.end(), std::size_t{0});
        } else {
            coords = rng.sample_without_replacement(p.size(), options.max_coords_per_tensor);
            std::sort(coords.begin(), coords.end());
        }
        const std::vector<double> analytic = p.has_grad() ? std::vector<double>(p.grad().begin(), p.grad().end())
                                                          : std::vector<double>(p.size(), 0.0);
        for (auto i : coords) {
            const double original = p.data()[i];
            p.data()[i] = original + options.h;
            const double up = evaluate(loss_fn);
            p.data()[i] = original - options.h;
            const double down = evaluate(loss_fn);
            p.data()[i] = original;
            const double numeric = (up - down) / (2.0 * options.h);
            const double err =
                std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
            ++report.coordinates_checked;
            if (err > report.max_relative_error || report.coordinates_checked == 1) {
                report.max_relative_error = std::max(report.max_relative_error, err);
                if (err >= report.max_relative_error) {
                    report.worst_tensor = t;
                    report.worst_coordinate = i;
                    report.worst_analytic = analytic[i];
                    report.worst_numeric = numeric;
                }
            }
        }
    }
    return report;
}

double finite_diff_check(std::span<Tensor> params, const LossFn& loss_fn, const FiniteDiffOptions& options) {
    return finite_diff_report(params, loss_fn, options).max_relative_error;
}

} // namespace protofs
