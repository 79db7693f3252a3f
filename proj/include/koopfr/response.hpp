#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "koopfr/errors.hpp"
#include "koopfr/sim.hpp"

namespace koopfr {

/// Harmonic n: output at n*omega. Subharmonic n: output at omega/n.
struct OrderTag {
    enum class Kind { Harmonic, Subharmonic };
    Kind kind = Kind::Harmonic;
    int n = 1;

    static OrderTag harmonic(int n) { return checked({Kind::Harmonic, n}); }
    static OrderTag subharmonic(int n) { return checked({Kind::Subharmonic, n}); }

    double frequency(double omega) const { return kind == Kind::Harmonic ? n * omega : omega / n; }

    /// Number of forcing periods in one period of e^{i frequency t}, rounded up to whole periods.
    int periods_per_cycle() const { return kind == Kind::Harmonic ? 1 : n; }

    /// "2" for harmonic 2, "1/2" for subharmonic 2.
    std::string label() const { return kind == Kind::Harmonic ? std::to_string(n) : "1/" + std::to_string(n); }

    static OrderTag parse(std::string_view text) {
        auto to_int = [&](std::string_view s) {
            int v = 0;
            auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || end != s.data() + s.size() || v < 1)
                throw ConfigError("bad order '" + std::string(text) + "'");
            return v;
        };
        if (text.starts_with("1/")) return subharmonic(to_int(text.substr(2)));
        return harmonic(to_int(text));
    }

    friend bool operator==(const OrderTag&, const OrderTag&) = default;

   private:
    static OrderTag checked(OrderTag t) {
        if (t.n < 1) throw ConfigError("order index must be >= 1");
        return t;
    }
};

enum class Method { HarmonicAverage, AbelResidue, Dmd, ClosedForm };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::HarmonicAverage: return "harm";
        case Method::AbelResidue: return "abel";
        case Method::Dmd: return "dmd";
        case Method::ClosedForm: return "closed_form";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "harm") return Method::HarmonicAverage;
    if (s == "abel") return Method::AbelResidue;
    if (s == "dmd") return Method::Dmd;
    if (s == "closed_form") return Method::ClosedForm;
    throw ConfigError("unknown method '" + std::string(s) + "'");
}

struct FreqResponse {
    double omega = 0.0;
    OrderTag order;
    cplx value{};
    Method method = Method::HarmonicAverage;
    double err_estimate = 0.0;
    cplx u0{1.0};
};

/// u0^n for harmonic orders, |u0|^{1/n} e^{i arg(u0)/n} for subharmonic ones
/// (branch fixed by arg u0 in (-pi, pi]).
inline cplx input_power(cplx u0, const OrderTag& order) {
    if (order.kind == OrderTag::Kind::Harmonic) return detail::ipow(u0, order.n);
    return std::polar(std::pow(std::abs(u0), 1.0 / order.n), std::arg(u0) / order.n);
}

namespace detail {

inline std::size_t samples_per(const Trajectory& tr, double span) {
    const double steps = span / tr.dt;
    const double r = std::round(steps);
    if (std::abs(steps - r) > 1e-6 * std::max(1.0, steps))
        throw ConfigError("sample grid is not commensurate with the forcing period");
    return static_cast<std::size_t>(r);
}

// Trapezoid mean of y(t) e^{-i W t} over samples [first, last].
inline cplx fourier_mean(const Trajectory& tr, std::size_t first, std::size_t last, double W) {
    cplx acc{};
    for (std::size_t k = first; k <= last; ++k) {
        const double w = (k == first || k == last) ? 0.5 : 1.0;
        acc += w * tr.outputs[k] * std::polar(1.0, -W * tr.time(k));
    }
    return acc / static_cast<double>(last - first);
}

}  // namespace detail

/// Fourier coefficient of the output at the order's frequency over the last
/// @p window_periods steady periods, normalised by u0^n (or u0^{1/n}).
///
/// @p steady must come from find_steady_state / detect_periodicity on @p tr.
inline FreqResponse harmonic_average(const Trajectory& tr, const OrderTag& order, int window_periods,
                                     const PeriodicityReport& steady) {
    if (!steady.periodic || !steady.detected_period) throw NotSteady("no steady-state periodic output detected");
    if (window_periods < 1) throw WindowTooShort("window must span at least one period");
    const SkewSystem& sys = *tr.sys;

    const auto steady_mult = static_cast<int>(std::lround(*steady.detected_period / sys.period()));
    const int unit_mult = std::lcm(std::max(1, steady_mult), order.periods_per_cycle());
    const std::size_t unit = detail::samples_per(tr, unit_mult * sys.period());
    const std::size_t last = tr.size() - 1;
    const auto need = static_cast<std::size_t>(window_periods) * unit;
    if (need > last || tr.time(last - need) < steady.transient_end - 1e-9 * tr.dt)
        throw WindowTooShort("averaging window does not fit after the transient");

    const double W = order.frequency(sys.omega());
    const cplx norm = input_power(sys.u0(), order);
    const cplx full = detail::fourier_mean(tr, last - need, last, W) / norm;
    const auto half_periods = static_cast<std::size_t>(std::max(1, window_periods / 2));
    const cplx half = detail::fourier_mean(tr, last - half_periods * unit, last, W) / norm;

    double peak = 0.0;
    for (std::size_t k = last - need; k <= last; ++k) peak = std::max(peak, std::abs(tr.outputs[k]));
    const double roundoff = 64.0 * std::numeric_limits<double>::epsilon() * peak / std::abs(norm);

    FreqResponse r;
    r.omega = sys.omega();
    r.order = order;
    r.value = full;
    r.method = Method::HarmonicAverage;
    r.err_estimate = std::abs(full - half) + steady.residual / std::abs(norm) + roundoff;
    r.u0 = sys.u0();
    return r;
}

/// Default Abel schedule for a horizon T: four points, ratio 1/2, from 160/T down to 20/T.
inline std::vector<double> default_eps_schedule(double T) {
    std::vector<double> eps;
    for (int k = 0; k < 4; ++k) eps.push_back(160.0 / T / std::pow(2.0, k));
    return eps;
}

namespace detail {

// Neville evaluation at 0 of the polynomial through (x[i], f[i]), i in [lo, hi].
inline cplx neville_at_zero(const std::vector<double>& x, const std::vector<cplx>& f, std::size_t lo,
                            std::size_t hi) {
    std::vector<cplx> p(f.begin() + static_cast<std::ptrdiff_t>(lo), f.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    const std::size_t m = p.size();
    for (std::size_t level = 1; level < m; ++level)
        for (std::size_t i = 0; i + level < m; ++i) {
            const double xi = x[lo + i], xj = x[lo + i + level];
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    return p[0];
}

}  // namespace detail

/// Residue of the output's Laplace transform at i*Omega, by Abel regularisation:
/// eps * yhat(i Omega + eps) evaluated for each eps in the schedule and
/// polynomially extrapolated to eps = 0.
///
/// The extrapolant uses every point of the schedule; err_estimate is its
/// distance to the extrapolant that drops the largest eps.
inline FreqResponse abel_residue(const Trajectory& tr, const OrderTag& order, std::vector<double> eps_schedule = {}) {
    const SkewSystem& sys = *tr.sys;
    const double T = tr.end_time() - tr.t0;
    if (eps_schedule.empty()) eps_schedule = default_eps_schedule(T);
    std::sort(eps_schedule.begin(), eps_schedule.end(), std::greater<>());
    if (eps_schedule.back() <= 0.0) throw ConfigError("Abel schedule entries must be positive");
    if (std::adjacent_find(eps_schedule.begin(), eps_schedule.end()) != eps_schedule.end())
        throw ConfigError("Abel schedule entries must be distinct");
    if (T * eps_schedule.back() < 5.0)
        throw TruncationDominated("horizon too short for the smallest eps (T*eps = " +
                                  std::to_string(T * eps_schedule.back()) + " < 5)");

    const double W = order.frequency(sys.omega());
    const std::size_t n = eps_schedule.size();
    std::vector<cplx> f(n);
    for (std::size_t j = 0; j < n; ++j) {
        const cplx s{eps_schedule[j], W};
        cplx acc{};
        for (std::size_t k = 0; k < tr.size(); ++k) {
            const double w = (k == 0 || k + 1 == tr.size()) ? 0.5 : 1.0;
            acc += w * tr.outputs[k] * std::exp(-s * tr.time(k));
        }
        f[j] = eps_schedule[j] * tr.dt * acc;
    }

    double scale = 0.0;
    for (const auto& v : f) scale = std::max(scale, std::abs(v));

    if (n >= 3 && scale > 0.0) {
        bool grows = true;
        for (std::size_t j = 0; j + 1 < n; ++j)
            grows = grows && std::abs(f[j + 1]) >= 0.8 * (eps_schedule[j] / eps_schedule[j + 1]) * std::abs(f[j]);
        if (grows) throw PoleOrderSuspect("eps*yhat grows like 1/eps: pole is not simple");
    }

    cplx value = f.back();
    double err = 0.0;
    if (n >= 2) {
        value = detail::neville_at_zero(eps_schedule, f, 0, n - 1);
        const cplx lower = detail::neville_at_zero(eps_schedule, f, 1, n - 1);
        err = std::abs(value - lower);
        if (n >= 3) {
            const cplx lowest = detail::neville_at_zero(eps_schedule, f, 2, n - 1);
            const double prev = std::abs(lower - lowest);
            if (err > prev && err > 1e-3 * (1.0 + scale))
                throw ScheduleTooCoarse("Abel extrapolants diverge; use smaller eps with a longer horizon");
        }
    }

    const cplx norm = input_power(sys.u0(), order);
    FreqResponse r;
    r.omega = sys.omega();
    r.order = order;
    r.value = value / norm;
    r.method = Method::AbelResidue;
    r.err_estimate = err / std::abs(norm);
    r.u0 = sys.u0();
    return r;
}

struct CrossCheck {
    bool agree = false;
    cplx a{};
    cplx b{};
    double gap = 0.0;
    double rel_tol = 0.0;
};

/// Agreement test |a - b| <= rel_tol * (1 + max(|a|, |b|)) for two estimates of the same quantity.
inline CrossCheck cross_check(const FreqResponse& a, const FreqResponse& b, double rel_tol) {
    const bool same_omega = std::abs(a.omega - b.omega) <= 1e-12 * std::max(a.omega, b.omega);
    if (!same_omega || !(a.order == b.order) || std::abs(a.u0 - b.u0) > 1e-12 * std::abs(a.u0))
        throw MismatchedQuery("cross_check needs matching omega, order and u0");
    CrossCheck c;
    c.a = a.value;
    c.b = b.value;
    c.gap = std::abs(a.value - b.value);
    c.rel_tol = rel_tol;
    c.agree = c.gap <= rel_tol * (1.0 + std::max(std::abs(a.value), std::abs(b.value)));
    return c;
}

}  // namespace koopfr
