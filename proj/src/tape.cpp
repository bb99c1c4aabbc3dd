#include "hinf/tape.hpp"

#include <cmath>

#include "hinf/normal.hpp"

namespace hinf {

Tape::id Tape::exp_(id a) {
    double e = std::exp(val(a));
    return push(e, a, e);
}

Tape::id Tape::log_(id a) { return push(std::log(val(a)), a, 1.0 / val(a)); }

Tape::id Tape::tanh_(id a) {
    double th = std::tanh(val(a));
    return push(th, a, 1.0 - th * th);
}

Tape::id Tape::relu_(id a) {
    double v = val(a);
    return v > 0.0 ? push(v, a, 1.0) : push(0.0, a, 0.0);
}

Tape::id Tape::logistic_(id a) {
    double g = 1.0 / (1.0 + std::exp(-val(a)));
    return push(g, a, g * (1.0 - g));
}

Tape::id Tape::softplus_(id a) {
    double v = val(a);
    double sp = v > 30.0 ? v : std::log1p(std::exp(v));
    return push(sp, a, 1.0 / (1.0 + std::exp(-v)));
}

Tape::id Tape::norm_cdf_(id a) { return push(norm_cdf(val(a)), a, norm_pdf(val(a))); }

Tape::id Tape::norm_pdf_(id a) {
    double p = norm_pdf(val(a));
    return push(p, a, -val(a) * p);
}

std::vector<double> Tape::grad_reverse(id output) const {
    require(output >= 0 && static_cast<std::size_t>(output) < nodes_.size(), errc::internal,
            "BadNode", "grad_reverse output id out of range");
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[static_cast<std::size_t>(output)] = 1.0;
    for (std::size_t k = static_cast<std::size_t>(output) + 1; k-- > 0;) {
        const Node& n = nodes_[k];
        const double a = adj[k];
        if (a == 0.0) continue;
        if (n.p0 >= 0) adj[static_cast<std::size_t>(n.p0)] += a * n.d0;
        if (n.p1 >= 0) adj[static_cast<std::size_t>(n.p1)] += a * n.d1;
    }
    std::vector<double> g(leaves_.size());
    for (std::size_t i = 0; i < leaves_.size(); ++i)
        g[i] = adj[static_cast<std::size_t>(leaves_[i])];
    return g;
}

}  // namespace hinf
