#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "koopfr/errors.hpp"
#include "koopfr/system.hpp"

namespace koopfr {

/// Uniformly sampled solution of a skew-product system.
struct Trajectory {
    double dt = 0.0;
    double t0 = 0.0;
    std::vector<CVector> states;
    std::vector<Input> inputs;
    std::vector<cplx> outputs;
    std::shared_ptr<const SkewSystem> sys;

    std::size_t size() const noexcept { return outputs.size(); }
    double time(std::size_t k) const noexcept { return t0 + static_cast<double>(k) * dt; }
    double end_time() const noexcept { return size() == 0 ? t0 : time(size() - 1); }
};

struct SimSettings {
    double dt = 0.0;  // 0 selects default_dt()
    double horizon_periods = 60.0;
    double min_horizon = 0.0;
    double periodicity_tol = 1e-7;
    std::optional<double> slowest_decay;  // |Re lambda| of the slowest mode, when known
    int max_extensions = 3;                // horizon doublings tried before giving up on steady state
};

/// Finest of P/128 and 0.01: at least 128 samples per forcing period.
inline double default_dt(double omega) {
    return std::min(2.0 * std::numbers::pi / omega / 128.0, 0.01);
}

/// Integration horizon: the larger of the requested period count, six
/// slowest-decay time constants (when known), and the floor min_horizon.
inline double default_horizon(double omega, const SimSettings& s) {
    double T = s.horizon_periods * 2.0 * std::numbers::pi / omega;
    if (s.slowest_decay && *s.slowest_decay > 0.0) T = std::max(T, 6.0 / *s.slowest_decay);
    return std::max(T, s.min_horizon);
}

/// Step snapped so that one forcing period is an integer number of steps.
inline double snap_dt(double period, double dt) {
    const double steps = std::ceil(period / dt - 1e-9);
    return period / std::max(1.0, steps);
}

/// Classical RK4 on x' = F(x, u(t)) with the exact input u(t) = u0 e^{i omega t}.
///
/// dt is snapped down so that 2 pi / omega is an integer multiple of it; the
/// horizon is rounded up to the next sample.
inline Trajectory integrate(const SkewSystem& sys, const CVector& x0, double T, double dt) {
    const double period = sys.period();
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(T >= dt)) throw ConfigError("horizon must be at least one step");
    if (dt > period / 64.0 * (1.0 + 1e-12))
        throw ConfigError("dt exceeds the resolution floor of 64 samples per period");
    if (x0.size() != sys.dim()) throw ConfigError("initial state has the wrong dimension");

    Trajectory tr;
    tr.sys = std::make_shared<const SkewSystem>(sys);
    tr.dt = snap_dt(period, dt);
    const auto steps = static_cast<std::size_t>(std::ceil(T / tr.dt - 1e-9));
    tr.states.reserve(steps + 1);
    tr.inputs.reserve(steps + 1);
    tr.outputs.reserve(steps + 1);

    const double h = tr.dt;
    CVector x = x0, k1, k2, k3, k4, tmp;
    auto record = [&](std::size_t k, const CVector& state) {
        const Input u = sys.input_at(tr.time(k));
        tr.states.push_back(state);
        tr.inputs.push_back(u);
        tr.outputs.push_back(sys.observe(state, u));
    };
    record(0, x);
    for (std::size_t k = 0; k < steps; ++k) {
        const double t = tr.time(k);
        const Input u0 = tr.inputs.back();
        const Input uh = sys.input_at(t + 0.5 * h);
        const Input u1 = sys.input_at(tr.time(k + 1));
        sys.field(x, u0, k1);
        tmp = x + (0.5 * h) * k1;
        sys.field(tmp, uh, k2);
        tmp = x + (0.5 * h) * k2;
        sys.field(tmp, uh, k3);
        tmp = x + h * k3;
        sys.field(tmp, u1, k4);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!x.allFinite()) throw NonFiniteState(tr.time(k + 1));
        record(k + 1, x);
        if (!std::isfinite(std::abs(tr.outputs.back()))) throw NonFiniteState(tr.time(k + 1));
    }
    return tr;
}

/// Same trajectory observed through a different observable.
inline Trajectory reobserve(const Trajectory& tr, const Expr& g) {
    Trajectory out = tr;
    const Program prog(g, tr.sys->plant().params);
    for (std::size_t k = 0; k < tr.size(); ++k) out.outputs[k] = prog(as_span(tr.states[k]), tr.inputs[k]);
    return out;
}

struct PeriodicityReport {
    bool periodic = false;
    std::optional<double> detected_period;
    double residual = std::numeric_limits<double>::infinity();
    double transient_end = std::numeric_limits<double>::infinity();
};

namespace detail {

// out[k] = max(v[k..k+w]) for k + w < v.size().
inline std::vector<double> sliding_max(const std::vector<double>& v, std::size_t w) {
    std::vector<double> out;
    if (v.size() <= w) return out;
    out.reserve(v.size() - w);
    std::deque<std::size_t> dq;
    for (std::size_t i = 0; i < v.size(); ++i) {
        while (!dq.empty() && v[dq.back()] <= v[i]) dq.pop_back();
        dq.push_back(i);
        if (i >= w) {
            while (dq.front() + w < i) dq.pop_front();
            out.push_back(v[dq.front()]);
        }
    }
    return out;
}

}  // namespace detail

/// First window start t0 where max over [t0, t0+Tp] of |y(t+Tp) - y(t)| drops
/// below tol * (1 + max |y| over [t0, t0 + 2 Tp]).
///
/// y(t + Tp) is linearly interpolated when Tp is not a whole number of samples.
inline PeriodicityReport detect_periodicity(const Trajectory& tr, double candidate_period, double tol) {
    if (!(candidate_period > 0.0)) throw ConfigError("candidate period must be positive");
    const double span = tr.end_time() - tr.t0;
    if (tr.size() < 2 || span < 4.0 * candidate_period * (1.0 - 1e-12))
        throw TooShort("trajectory spans fewer than 4 candidate periods");

    const double shift = candidate_period / tr.dt;
    const std::size_t last = tr.size() - 1;
    const auto whole = static_cast<std::size_t>(std::floor(shift + 1e-9));
    const double frac = std::max(0.0, shift - static_cast<double>(whole));
    const bool exact = frac < 1e-9;

    auto shifted = [&](std::size_t k) {
        const std::size_t j = k + whole;
        if (exact) return tr.outputs[j];
        return (1.0 - frac) * tr.outputs[j] + frac * tr.outputs[j + 1];
    };
    const std::size_t reach = whole + (exact ? 0 : 1);  // furthest sample touched by shifted(k)
    const std::size_t n_diff = last - reach + 1;
    std::vector<double> diff(n_diff), mag(tr.size());
    for (std::size_t k = 0; k < n_diff; ++k) diff[k] = std::abs(shifted(k) - tr.outputs[k]);
    for (std::size_t k = 0; k < tr.size(); ++k) mag[k] = std::abs(tr.outputs[k]);

    const auto res = detail::sliding_max(diff, whole);
    const auto two = static_cast<std::size_t>(std::floor(2.0 * shift + 1e-9));
    const auto scale = detail::sliding_max(mag, two);
    const std::size_t starts = std::min(res.size(), scale.size());

    PeriodicityReport rep;
    for (std::size_t k = 0; k < starts; ++k) {
        rep.residual = res[k];
        if (res[k] < tol * (1.0 + scale[k])) {
            rep.periodic = true;
            rep.detected_period = candidate_period;
            rep.transient_end = tr.time(k);
            return rep;
        }
    }
    return rep;
}

/// Tries periods 2 pi/omega, 2 (2 pi/omega), 3 (2 pi/omega) and reports the smallest that passes.
inline PeriodicityReport find_steady_state(const Trajectory& tr, double tol) {
    const double base = tr.sys->period();
    PeriodicityReport first = detect_periodicity(tr, base, tol);
    if (first.periodic) return first;
    for (int n = 2; n <= 3; ++n) {
        const double p = n * base;
        if (tr.end_time() - tr.t0 < 4.0 * p) break;
        auto rep = detect_periodicity(tr, p, tol);
        if (rep.periodic) return rep;
    }
    return first;
}

// ---------------------------------------------------------------------------
// CSV export: t, re(x_i), im(x_i)..., re(u), im(u), re(y), im(y)

namespace detail {
inline void put_number(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    os << buf;
}
}  // namespace detail

inline void write_trajectory_csv(const Trajectory& tr, std::ostream& os) {
    const int d = tr.sys ? tr.sys->dim() : (tr.states.empty() ? 0 : static_cast<int>(tr.states[0].size()));
    os << "t";
    for (int i = 1; i <= d; ++i) os << ",re_x" << i << ",im_x" << i;
    os << ",re_u,im_u,re_y,im_y\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        detail::put_number(os, tr.time(k));
        for (int i = 0; i < d; ++i) {
            os << ',';
            detail::put_number(os, tr.states[k][i].real());
            os << ',';
            detail::put_number(os, tr.states[k][i].imag());
        }
        for (cplx v : {tr.inputs[k].value, tr.outputs[k]}) {
            os << ',';
            detail::put_number(os, v.real());
            os << ',';
            detail::put_number(os, v.imag());
        }
        os << '\n';
    }
}

inline void write_trajectory_csv(const Trajectory& tr, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    write_trajectory_csv(tr, os);
    if (!os) throw IoError("failed writing '" + path + "'");
}

}  // namespace koopfr
