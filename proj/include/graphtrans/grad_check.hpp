#pragma once

#include <cmath>
#include <cstring>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "graphtrans/tensor.hpp"

namespace graphtrans {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t entries_checked = 0;

    bool passes(double threshold) const { return max_rel_err < threshold; }
};

namespace detail {

// Evenly spaced sample of k indices out of n (deduplicated, ascending).
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k) {
    std::vector<std::size_t> out;
    if (k == 0 || k >= n) {
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = i;
        return out;
    }
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t idx = (i * n) / k;
        if (out.empty() || out.back() != idx) out.push_back(idx);
    }
    return out;
}

}  // namespace detail

// Compares reverse-mode gradients against central finite differences.
//
// `forward` must rebuild the scalar objective from scratch on every call and
// must be a pure function of the parameter buffers: the checker first calls
// it twice and demands bitwise-identical results before trusting any
// difference quotient. Gradients are taken once under a fresh tape; numeric
// derivatives then perturb each sampled entry in place by +/-step.
// Relative error per entry: |a - n| / max(|a|, |n|, 1e-8).
// `max_entries_per_param` == 0 checks every entry.
template <class S>
GradCheckReport check_gradients(const std::function<Tensor<S>()>& forward,
                                const std::vector<std::pair<std::string, Tensor<S>>>& params,
                                S step = static_cast<S>(1e-5),
                                std::size_t max_entries_per_param = 0) {
    auto eval = [&]() -> S {
        Tensor<S> v = forward();
        if (v.numel() != 1) {
            throw ShapeError("check_gradients: objective must be scalar, got " +
                             shape_str(v.shape()));
        }
        return v.data()[0];
    };

    const S probe1 = eval();
    const S probe2 = eval();
    if (std::memcmp(&probe1, &probe2, sizeof(S)) != 0) {
        throw DeterminismError(
            "check_gradients: two identical forward calls disagree bitwise; "
            "the objective is not a pure function of its parameters");
    }

    for (const auto& [name, p] : params) {
        (void)name;
        p.zero_grad();
    }
    std::vector<std::vector<S>> analytic;
    {
        Tape<S> tape;
        typename Tape<S>::Scope scope(tape);
        Tensor<S> loss = forward();
        if (loss.numel() != 1) {
            throw ShapeError("check_gradients: objective must be scalar, got " +
                             shape_str(loss.shape()));
        }
        tape.backward(loss);
        analytic.reserve(params.size());
        for (const auto& [name, p] : params) {
            (void)name;
            analytic.push_back(p.grad());
        }
    }

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const auto& name = params[pi].first;
        Tensor<S> p = params[pi].second;
        S* buf = p.data().data();
        const auto picks = detail::sample_indices(p.numel(), max_entries_per_param);
        for (std::size_t idx : picks) {
            const S saved = buf[idx];
            buf[idx] = saved + step;
            const S up = eval();
            buf[idx] = saved - step;
            const S down = eval();
            buf[idx] = saved;
            const double numeric = (static_cast<double>(up) - static_cast<double>(down)) /
                                   (2.0 * static_cast<double>(step));
            const double a = static_cast<double>(analytic[pi][idx]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            const double rel = std::abs(a - numeric) / denom;
            ++report.entries_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = name;
                report.worst_index = idx;
            }
        }
    }
    return report;
}

}  // namespace graphtrans
