#include "memroute/grad_check.hpp"

#include <cmath>

#include "memroute/tape.hpp"

namespace memroute {

double grad_check(const std::function<TensorD(const TensorD&)>& f, const TensorD& x,
                  double h) {
    TensorD probe = x.clone();
    probe.set_requires_grad(true);
    std::vector<double> analytic;
    {
        Tape<double> tape;
        TensorD y = f(probe);
        tape.backward(y);
        auto g = probe.grad();
        analytic.assign(g.begin(), g.end());
        if (analytic.empty()) analytic.assign(x.size(), 0.0);
    }
    double max_err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        TensorD hi = x.clone();
        hi.mut_data()[i] += h;
        TensorD lo = x.clone();
        lo.mut_data()[i] -= h;
        const double fd = (f(hi).item() - f(lo).item()) / (2.0 * h);
        const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

}  // namespace memroute
