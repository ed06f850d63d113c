#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "sfnet/errors.hpp"
#include "sfnet/matrix.hpp"
#include "sfnet/tape.hpp"

namespace sfnet {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment buffers, one slot per parameter in registry order.
struct AdamState {
    struct Slot {
        Matrix m;
        Matrix v;
    };
    std::vector<Slot> slots;
    int64_t step = 0;
};

inline AdamState init_adam_state(const std::vector<Param*>& params) {
    AdamState state;
    state.slots.reserve(params.size());
    for (const Param* p : params) {
        state.slots.push_back({Matrix(p->value.rows(), p->value.cols()),
                               Matrix(p->value.rows(), p->value.cols())});
    }
    return state;
}

// Rows to update per parameter. nullopt means dense (every coordinate);
// embedding tables pass the rows touched by the batch so the step cost does
// not scale with vocabulary size. Untouched rows keep value and moments.
using ActiveRows = std::vector<std::optional<std::vector<uint32_t>>>;

namespace detail {

inline void adam_update_span(std::span<double> values, std::span<double> m, std::span<double> v,
                             std::span<const double> grads, const AdamConfig& cfg, double bc1,
                             double bc2) {
    for (size_t i = 0; i < values.size(); ++i) {
        const double g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        values[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
}

}  // namespace detail

// Bias-corrected Adam step over Param::grad buffers. Returns false (and
// leaves parameters, moments and the step counter untouched) when any
// inspected gradient is non-finite.
inline bool adam_step(const std::vector<Param*>& params, AdamState& state,
                      const AdamConfig& cfg, const ActiveRows* active = nullptr) {
    check(state.slots.size() == params.size(), "adam_step: state does not match parameters");
    check(!active || active->size() == params.size(),
          "adam_step: active row list does not match parameters");

    auto rows_of = [&](size_t i) -> const std::optional<std::vector<uint32_t>>& {
        static const std::optional<std::vector<uint32_t>> dense = std::nullopt;
        return active ? (*active)[i] : dense;
    };

    for (size_t i = 0; i < params.size(); ++i) {
        const Matrix& g = params[i]->grad;
        if (const auto& rows = rows_of(i); rows) {
            for (uint32_t r : *rows) {
                for (double v : g.row(r)) {
                    if (!std::isfinite(v)) return false;
                }
            }
        } else {
            if (!g.all_finite()) return false;
        }
    }

    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    for (size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        AdamState::Slot& slot = state.slots[i];
        if (const auto& rows = rows_of(i); rows) {
            for (uint32_t r : *rows) {
                detail::adam_update_span(p.value.row(r), slot.m.row(r), slot.v.row(r),
                                         p.grad.row(r), cfg, bc1, bc2);
            }
        } else {
            detail::adam_update_span({p.value.data(), p.value.size()},
                                     {slot.m.data(), slot.m.size()},
                                     {slot.v.data(), slot.v.size()},
                                     {p.grad.data(), p.grad.size()}, cfg, bc1, bc2);
        }
    }
    return true;
}

}  // namespace sfnet
