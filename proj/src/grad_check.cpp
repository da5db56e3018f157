#include "mitd/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "mitd/errors.hpp"

namespace mitd {

namespace {

double scalarize(const Tensor& t) {
    double s = 0.0;
    for (double v : t.values()) {
        s += v;
    }
    return s;
}

double rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
    return std::abs(analytic - numeric) / denom;
}

} // namespace

GradCheckReport grad_check(Module& module, const Tensor& input, double epsilon, double tol) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-4)) {
        throw ConfigError("grad_check: epsilon must lie in [1e-7, 1e-4]");
    }
    GradCheckReport report;
    const auto params = module.parameters();

    const Tensor first = module.forward(input);
    const Tensor second = module.forward(input);
    if (first != second) {
        report.valid = false;
        return report;
    }

    zero_grads(params);
    const Tensor out = module.forward(input);
    const Tensor grad_in = module.backward(Tensor(out.shape(), 1.0));

    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (auto* p : params) {
        analytic.push_back(p->grad);
    }

    const auto record = [&](double a, double n, const std::string& where) {
        const double e = rel_error(a, n);
        ++report.coordinates;
        if (e > report.max_rel_error || std::isnan(e)) {
            report.max_rel_error = std::isnan(e) ? INFINITY : e;
            report.worst = where;
        }
    };

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& value = params[pi]->value;
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + epsilon;
            const double plus = scalarize(module.forward(input));
            value[i] = saved - epsilon;
            const double minus = scalarize(module.forward(input));
            value[i] = saved;
            record(analytic[pi][i], (plus - minus) / (2.0 * epsilon),
                   params[pi]->name + "[" + std::to_string(i) + "]");
        }
    }

    if (!grad_in.empty()) {
        require_shape(grad_in, input.shape(), "grad_check input gradient");
        Tensor probe = input;
        for (std::size_t i = 0; i < probe.size(); ++i) {
            const double saved = probe[i];
            probe[i] = saved + epsilon;
            const double plus = scalarize(module.forward(probe));
            probe[i] = saved - epsilon;
            const double minus = scalarize(module.forward(probe));
            probe[i] = saved;
            record(grad_in[i], (plus - minus) / (2.0 * epsilon), "input[" + std::to_string(i) + "]");
        }
    }

    // Leave the module's caches and gradients as a plain single pass would.
    zero_grads(params);
    module.forward(input);
    module.backward(Tensor(out.shape(), 1.0));

    report.passed = report.max_rel_error <= tol;
    return report;
}

} // namespace mitd
