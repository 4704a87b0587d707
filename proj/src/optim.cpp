#include "vwapx/optim.hpp"

#include <cmath>

namespace vwapx::nn {

double global_grad_norm(const ParamStore& store) {
    double s = 0.0;
    for (const auto& [name, e] : store.entries)
        for (int64_t i = 0; i < e.grad.size(); ++i) s += e.grad[i] * e.grad[i];
    return std::sqrt(s);
}

void clip_grad_norm(ParamStore& store, double max_norm) {
    const double norm = global_grad_norm(store);
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    for (auto& [name, e] : store.entries)
        for (int64_t i = 0; i < e.grad.size(); ++i) e.grad[i] *= scale;
}

void adam_step(ParamStore& store, double lr, double beta1, double beta2, double eps) {
    store.adam_step_count += 1;
    const double t = static_cast<double>(store.adam_step_count);
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (auto& [name, e] : store.entries) {
        for (int64_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g;
            e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g * g;
            const double mhat = e.m[i] / bc1;
            const double vhat = e.v[i] / bc2;
            e.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

double linear_anneal(double lr_start, double lr_end, int64_t step, int64_t total) {
    if (total <= 0) throw std::invalid_argument("linear_anneal: total must be positive");
    const double f = std::min(static_cast<double>(step) / static_cast<double>(total), 1.0);
    return lr_start + (lr_end - lr_start) * f;
}

} // namespace vwapx::nn
