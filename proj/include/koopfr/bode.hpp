#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "koopfr/dmd.hpp"
#include "koopfr/errors.hpp"
#include "koopfr/response.hpp"
#include "koopfr/sim.hpp"

namespace koopfr {

// ---------------------------------------------------------------------------
// Single-frequency analysis

struct AnalysisSettings {
    SimSettings sim;
    cplx u0{1.0};
    CVector x0;  // empty: zero initial state
    std::vector<Method> methods{Method::HarmonicAverage};
    int window_periods = 16;
    std::vector<double> abel_schedule;  // empty: default_eps_schedule(T)
    double abel_min_horizon = 1000.0;
    int dmd_delay = 32;
    double dmd_rank_tol = 1e-10;
    double crosscheck_tol = 1e-2;
};

struct OrderResult {
    OrderTag order;
    std::vector<FreqResponse> estimates;  // one per method that produced a value, in request order
    std::vector<std::string> notes;       // per-method failures or remarks
    std::vector<CrossCheck> checks;       // every pair of estimates
    bool accepted = false;                // at least one estimate and every pair agrees
};

enum class PointStatus { Ok, Diverged, NotSteady, Failed };

inline const char* status_name(PointStatus s) {
    switch (s) {
        case PointStatus::Ok: return "ok";
        case PointStatus::Diverged: return "diverged";
        case PointStatus::NotSteady: return "not_steady";
        case PointStatus::Failed: return "failed";
    }
    return "?";
}

struct PointResult {
    double omega = 0.0;
    PointStatus status = PointStatus::Ok;
    std::string message;
    PeriodicityReport steady;
    double horizon = 0.0;
    double dt = 0.0;
    std::vector<OrderResult> orders;
};

namespace detail {

inline int max_cycle(const std::vector<OrderTag>& orders) {
    int m = 1;
    for (const auto& o : orders) m = std::lcm(m, o.periods_per_cycle());
    return m;
}

inline int max_harmonic(const std::vector<OrderTag>& orders) {
    int m = 1;
    for (const auto& o : orders)
        if (o.kind == OrderTag::Kind::Harmonic) m = std::max(m, o.n);
    return m;
}

inline bool window_fits(const Trajectory& tr, const PeriodicityReport& rep, int periods, int cycle) {
    if (!rep.periodic) return false;
    const double unit = std::lcm(static_cast<int>(std::lround(*rep.detected_period / tr.sys->period())), cycle) *
                        tr.sys->period();
    return tr.end_time() - rep.transient_end >= periods * unit * (1.0 + 1e-9);
}

}  // namespace detail

/// Largest DMD sampling interval that keeps every requested frequency well
/// inside the principal branch of log(mu) / dt: pi / (8 n_max omega).
inline double dmd_max_dt(const std::vector<OrderTag>& orders, double omega) {
    return std::numbers::pi / (8.0 * detail::max_harmonic(orders) * omega);
}

/// Integrate at one forcing frequency, wait for a steady state, and estimate
/// every requested order with every requested method.
///
/// The horizon is doubled (up to sim.max_extensions times) while no steady
/// state with room for the averaging window is found.
inline PointResult evaluate_point(const PlantSpec& plant, double omega, const std::vector<OrderTag>& orders,
                                  const AnalysisSettings& s) {
    PointResult out;
    out.omega = omega;
    const SkewSystem sys(plant, omega, s.u0);
    const CVector x0 = s.x0.size() == 0 ? CVector::Zero(plant.dim) : s.x0;
    auto wants = [&](Method m) { return std::find(s.methods.begin(), s.methods.end(), m) != s.methods.end(); };
    const bool want_abel = wants(Method::AbelResidue);
    const double dmd_dt = dmd_max_dt(orders, omega);

    out.dt = s.sim.dt > 0.0 ? s.sim.dt : default_dt(omega);
    if (wants(Method::Dmd)) {
        if (s.sim.dt > dmd_dt * (1.0 + 1e-12))
            throw ConfigError("dt exceeds pi/(8 n_max omega) = " + std::to_string(dmd_dt) + " required by dmd");
        out.dt = std::min(out.dt, dmd_dt);
    }
    out.horizon = default_horizon(omega, s.sim);
    if (want_abel) out.horizon = std::max(out.horizon, s.abel_min_horizon);
    const int cycle = detail::max_cycle(orders);

    Trajectory tr;
    try {
        for (int attempt = 0;; ++attempt) {
            tr = integrate(sys, x0, out.horizon, out.dt);
            out.steady = find_steady_state(tr, s.sim.periodicity_tol);
            if (detail::window_fits(tr, out.steady, s.window_periods, cycle) || attempt >= s.sim.max_extensions)
                break;
            out.horizon *= 2.0;
        }
    } catch (const NonFiniteState& e) {
        out.status = PointStatus::Diverged;
        out.message = e.what();
        return out;
    }
    if (!out.steady.periodic) {
        out.status = PointStatus::NotSteady;
        out.message = "no steady-state periodic output (residual " + std::to_string(out.steady.residual) + ")";
        return out;
    }

    for (const auto& order : orders) {
        OrderResult res;
        res.order = order;
        for (Method m : s.methods) {
            try {
                switch (m) {
                    case Method::HarmonicAverage:
                        res.estimates.push_back(harmonic_average(tr, order, s.window_periods, out.steady));
                        break;
                    case Method::AbelResidue:
                        res.estimates.push_back(abel_residue(tr, order, s.abel_schedule));
                        break;
                    case Method::Dmd: {
                        const int steady_mult =
                            static_cast<int>(std::lround(*out.steady.detected_period / sys.period()));
                        const std::size_t per_period = detail::samples_per(tr, sys.period());
                        const auto stride = std::max<std::size_t>(
                            1, static_cast<std::size_t>(std::floor(dmd_dt / tr.dt * (1.0 + 1e-9))));
                        const std::size_t span = static_cast<std::size_t>(s.window_periods) *
                                                 static_cast<std::size_t>(std::lcm(steady_mult, cycle)) * per_period;
                        const std::size_t count = std::min(span, tr.size() - 1) / stride + 1;
                        const std::size_t first = tr.size() - 1 - (count - 1) * stride;
                        const DmdResult dmd = hankel_dmd(tr, first, count, s.dmd_delay, s.dmd_rank_tol, stride);
                        try {
                            res.estimates.push_back(mode_to_response(dmd, omega, order, s.u0));
                        } catch (const EigenvalueNotFound& e) {
                            // No mode at this frequency: the coefficient is zero.
                            FreqResponse z;
                            z.omega = omega;
                            z.order = order;
                            z.method = Method::Dmd;
                            z.err_estimate = dmd.residual;
                            z.u0 = s.u0;
                            res.estimates.push_back(z);
                            res.notes.push_back(std::string("dmd: ") + e.what() + "; reported as 0");
                        }
                        break;
                    }
                    case Method::ClosedForm: res.notes.push_back("closed_form: not available for general plants"); break;
                }
            } catch (const Error& e) {
                res.notes.push_back(std::string(method_name(m)) + ": " + e.what());
            }
        }
        res.accepted = !res.estimates.empty();
        for (std::size_t i = 0; i < res.estimates.size(); ++i)
            for (std::size_t j = i + 1; j < res.estimates.size(); ++j) {
                res.checks.push_back(cross_check(res.estimates[i], res.estimates[j], s.crosscheck_tol));
                res.accepted = res.accepted && res.checks.back().agree;
            }
        out.orders.push_back(std::move(res));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps and tables

/// Log-spaced grid of angular frequencies.
struct Grid {
    double omega_min = 0.1;
    double omega_max = 10.0;
    int points = 25;

    std::vector<double> values() const {
        if (!(omega_min > 0.0) || !(omega_max > omega_min) || points < 2)
            throw ConfigError("grid needs 0 < omega_min < omega_max and at least 2 points");
        std::vector<double> w(static_cast<std::size_t>(points));
        const double lo = std::log10(omega_min), hi = std::log10(omega_max);
        for (int k = 0; k < points; ++k) w[static_cast<std::size_t>(k)] = std::pow(10.0, lo + (hi - lo) * k / (points - 1));
        w.front() = omega_min;
        w.back() = omega_max;
        return w;
    }

    /// "min:max:points"
    static Grid parse(std::string_view text) {
        Grid g;
        const auto a = text.find(':');
        const auto b = a == std::string_view::npos ? a : text.find(':', a + 1);
        if (b == std::string_view::npos) throw ConfigError("grid must be min:max:points");
        auto num = [&](std::string_view s, auto& out) {
            auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            if (ec != std::errc() || end != s.data() + s.size())
                throw ConfigError("bad grid '" + std::string(text) + "'");
        };
        num(text.substr(0, a), g.omega_min);
        num(text.substr(a + 1, b - a - 1), g.omega_max);
        num(text.substr(b + 1), g.points);
        g.values();
        return g;
    }
};

struct BodeRow {
    double omega = 0.0;
    std::optional<cplx> H;  // empty for failed points
    double gain_db = -std::numeric_limits<double>::infinity();
    double phase_deg = 0.0;
    std::string method;
    double err = 0.0;
    std::string status = "ok";
};

struct BodeTable {
    std::string plant_name;
    std::string observable_label;
    OrderTag order;
    Grid grid;
    std::vector<BodeRow> rows;
};

inline constexpr double kGainFloorDb = -200.0;

/// gain_db = 20 log10 |H| (-inf for H = 0); phase unwrapped along increasing omega.
inline void finalize_rows(std::vector<BodeRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const BodeRow& a, const BodeRow& b) { return a.omega < b.omega; });
    std::optional<double> prev;
    for (auto& r : rows) {
        if (!r.H) continue;
        const double mag = std::abs(*r.H);
        r.gain_db = mag > 0.0 ? 20.0 * std::log10(mag) : -std::numeric_limits<double>::infinity();
        if (mag == 0.0) {
            r.phase_deg = 0.0;
            continue;
        }
        double ph = std::arg(*r.H) * 180.0 / std::numbers::pi;
        if (prev) {
            while (ph - *prev > 180.0) ph -= 360.0;
            while (ph - *prev < -180.0) ph += 360.0;
        }
        r.phase_deg = ph;
        prev = ph;
    }
}

inline BodeRow row_from(const PointResult& p, std::size_t order_index) {
    BodeRow row;
    row.omega = p.omega;
    if (p.status != PointStatus::Ok) {
        row.status = status_name(p.status);
        return row;
    }
    const OrderResult& o = p.orders[order_index];
    if (o.estimates.empty()) {
        row.status = "failed";
        return row;
    }
    row.H = o.estimates.front().value;
    row.method = method_name(o.estimates.front().method);
    row.err = o.estimates.front().err_estimate;
    row.status = o.accepted ? "ok" : "crosscheck_failed";
    return row;
}

/// One table per order over the grid. Rows are evaluated in parallel and are
/// independent of thread count; failures become tagged rows.
inline std::vector<BodeTable> sweep(const PlantSpec& plant, const std::vector<OrderTag>& orders, const Grid& grid,
                                    const AnalysisSettings& s, const std::string& observable_label = "") {
    const auto omegas = grid.values();
    std::vector<PointResult> points(omegas.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < omegas.size(); k = next++) {
            try {
                points[k] = evaluate_point(plant, omegas[k], orders, s);
            } catch (const Error& e) {
                points[k].omega = omegas[k];
                points[k].status = PointStatus::Failed;
                points[k].message = e.what();
            }
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const auto n_threads = static_cast<unsigned>(std::min<std::size_t>(hw, omegas.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    std::vector<BodeTable> tables;
    for (std::size_t i = 0; i < orders.size(); ++i) {
        BodeTable t;
        t.plant_name = plant.name;
        t.observable_label = observable_label.empty() ? plant.observable.str() : observable_label;
        t.order = orders[i];
        t.grid = grid;
        for (const auto& p : points) t.rows.push_back(row_from(p, i));
        finalize_rows(t.rows);
        tables.push_back(std::move(t));
    }
    return tables;
}

/// Least-squares slope of gain (dB) against log10(omega) over the last @p points rows with a value.
inline double high_frequency_slope(const BodeTable& t, std::size_t points = 2) {
    std::vector<std::pair<double, double>> xy;
    for (auto it = t.rows.rbegin(); it != t.rows.rend() && xy.size() < points; ++it)
        if (it->H && std::isfinite(it->gain_db)) xy.emplace_back(std::log10(it->omega), it->gain_db);
    if (xy.size() < 2) throw ConfigError("need at least two finite rows to fit a slope");
    double mx = 0, my = 0;
    for (auto [x, y] : xy) mx += x, my += y;
    mx /= static_cast<double>(xy.size());
    my /= static_cast<double>(xy.size());
    double sxy = 0, sxx = 0;
    for (auto [x, y] : xy) sxy += (x - mx) * (y - my), sxx += (x - mx) * (x - mx);
    return sxy / sxx;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {
inline std::string fmt15(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}
}  // namespace detail

inline constexpr const char* kBodeCsvHeader = "omega,re_H,im_H,gain_db,phase_deg,method,err,status";

inline void emit_csv(const BodeTable& t, std::ostream& os) {
    os << kBodeCsvHeader << '\n';
    for (const auto& r : t.rows) {
        os << detail::fmt15(r.omega) << ',';
        if (r.H) {
            os << detail::fmt15(r.H->real()) << ',' << detail::fmt15(r.H->imag()) << ',';
            if (std::isfinite(r.gain_db)) os << detail::fmt15(r.gain_db);
            os << ',' << detail::fmt15(r.phase_deg);
        } else {
            os << ",,,";
        }
        os << ',' << r.method << ',' << detail::fmt15(r.err) << ',' << r.status << '\n';
    }
}

inline void emit_csv(const BodeTable& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    emit_csv(t, os);
    if (!os) throw IoError("failed writing '" + path + "'");
}

/// Rows of a CSV written by emit_csv. Table metadata is not part of the file.
inline BodeTable read_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kBodeCsvHeader) throw IoError("not a Bode CSV (header mismatch)");
    BodeTable t;
    auto num = [](const std::string& s) {
        double v = 0.0;
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || end != s.data() + s.size()) throw IoError("bad number '" + s + "' in CSV");
        return v;
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 8) throw IoError("CSV row has " + std::to_string(f.size()) + " fields");
        BodeRow r;
        r.omega = num(f[0]);
        if (!f[1].empty()) {
            r.H = cplx{num(f[1]), num(f[2])};
            r.gain_db = f[3].empty() ? -std::numeric_limits<double>::infinity() : num(f[3]);
            r.phase_deg = num(f[4]);
        }
        r.method = f[5];
        r.err = num(f[6]);
        r.status = f[7];
        t.rows.push_back(std::move(r));
    }
    return t;
}

// ---------------------------------------------------------------------------
// SVG: gain panel over phase panel, log-x, one trace per table in each panel

namespace detail {

inline std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string f2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string order_symbol(const OrderTag& o) {
    return o.kind == OrderTag::Kind::Harmonic ? std::to_string(o.n) : "1/" + std::to_string(o.n);
}

}  // namespace detail

inline void emit_svg(const std::vector<BodeTable>& tables, std::ostream& os) {
    if (tables.empty()) throw ConfigError("emit_svg needs at least one table");
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    constexpr double W = 720, Hh = 600, left = 80, right = 200, top = 30, panel_h = 230, gap = 60;
    const double plot_w = W - left - right;

    double wmin = std::numeric_limits<double>::infinity(), wmax = 0;
    double gmin = std::numeric_limits<double>::infinity(), gmax = -std::numeric_limits<double>::infinity();
    double pmin = gmin, pmax = gmax;
    auto visible = [](const BodeRow& r) { return r.H && std::isfinite(r.gain_db) && r.gain_db >= kGainFloorDb; };
    for (const auto& t : tables)
        for (const auto& r : t.rows) {
            wmin = std::min(wmin, r.omega);
            wmax = std::max(wmax, r.omega);
            if (!visible(r)) continue;
            gmin = std::min(gmin, r.gain_db);
            gmax = std::max(gmax, r.gain_db);
            pmin = std::min(pmin, r.phase_deg);
            pmax = std::max(pmax, r.phase_deg);
        }
    if (!std::isfinite(gmin)) gmin = -40, gmax = 0, pmin = -90, pmax = 0;
    if (!(wmax > wmin)) wmax = wmin * 10.0;
    const double x_lo = std::floor(std::log10(wmin)), x_hi = std::ceil(std::log10(wmax));
    const double g_lo = std::floor(gmin / 20.0) * 20.0, g_hi = std::max(g_lo + 20.0, std::ceil(gmax / 20.0) * 20.0);
    const double p_lo = std::floor(pmin / 45.0) * 45.0, p_hi = std::max(p_lo + 45.0, std::ceil(pmax / 45.0) * 45.0);

    auto px = [&](double w) { return left + (std::log10(w) - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double v, double lo, double hi, double y0) { return y0 + (hi - v) / (hi - lo) * panel_h; };

    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh << "\" viewBox=\"0 0 " << W
       << ' ' << Hh << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << Hh << "\" fill=\"white\"/>\n";

    struct Panel {
        const char* id;
        const char* label;
        double lo, hi, step, y0;
    };
    const Panel panels[] = {{"gain", "Gain [dB]", g_lo, g_hi, 20.0, top},
                            {"phase", "Phase [deg]", p_lo, p_hi, 45.0, top + panel_h + gap}};
    for (const auto& p : panels) {
        os << "<g class=\"panel\" id=\"panel-" << p.id << "\">\n";
        os << "<rect x=\"" << detail::f2(left) << "\" y=\"" << detail::f2(p.y0) << "\" width=\"" << detail::f2(plot_w)
           << "\" height=\"" << detail::f2(panel_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
        double step = p.step;
        while ((p.hi - p.lo) / step > 8) step *= 2;
        for (double v = p.lo; v <= p.hi + 1e-9; v += step) {
            const double y = py(v, p.lo, p.hi, p.y0);
            os << "<line x1=\"" << detail::f2(left) << "\" y1=\"" << detail::f2(y) << "\" x2=\""
               << detail::f2(left + plot_w) << "\" y2=\"" << detail::f2(y) << "\" stroke=\"#dddddd\"/>\n";
            os << "<text x=\"" << detail::f2(left - 6) << "\" y=\"" << detail::f2(y + 4) << "\" text-anchor=\"end\">"
               << detail::fmt15(v) << "</text>\n";
        }
        for (double e = x_lo; e <= x_hi + 1e-9; e += 1.0) {
            const double x = px(std::pow(10.0, e));
            os << "<line x1=\"" << detail::f2(x) << "\" y1=\"" << detail::f2(p.y0) << "\" x2=\"" << detail::f2(x)
               << "\" y2=\"" << detail::f2(p.y0 + panel_h) << "\" stroke=\"#dddddd\"/>\n";
            os << "<text x=\"" << detail::f2(x) << "\" y=\"" << detail::f2(p.y0 + panel_h + 14)
               << "\" text-anchor=\"middle\">" << detail::fmt15(std::pow(10.0, e)) << "</text>\n";
        }
        os << "<text x=\"20\" y=\"" << detail::f2(p.y0 + panel_h / 2) << "\" transform=\"rotate(-90 20 "
           << detail::f2(p.y0 + panel_h / 2) << ")\" text-anchor=\"middle\">" << p.label << "</text>\n";

        for (std::size_t ti = 0; ti < tables.size(); ++ti) {
            std::string d;
            bool pen_down = false;
            for (const auto& r : tables[ti].rows) {
                if (!visible(r)) {
                    pen_down = false;
                    continue;
                }
                const double v = p.id[0] == 'g' ? r.gain_db : r.phase_deg;
                d += (pen_down ? " L" : (d.empty() ? "M" : " M")) + detail::f2(px(r.omega)) + ',' +
                     detail::f2(py(v, p.lo, p.hi, p.y0));
                pen_down = true;
            }
            os << "<path class=\"trace-" << p.id << "\" d=\"" << d << "\" fill=\"none\" stroke=\""
               << palette[ti % 10] << "\" stroke-width=\"1.8\"/>\n";
        }
        os << "</g>\n";
    }
    os << "<text x=\"" << detail::f2(left + plot_w / 2) << "\" y=\"" << detail::f2(Hh - 8)
       << "\" text-anchor=\"middle\">Angular frequency [rad/s]</text>\n";

    os << "<g class=\"legend\">\n";
    for (std::size_t ti = 0; ti < tables.size(); ++ti) {
        const auto& t = tables[ti];
        const double y = top + 14 + 18.0 * static_cast<double>(ti);
        const double x = left + plot_w + 14;
        os << "<line x1=\"" << detail::f2(x) << "\" y1=\"" << detail::f2(y - 4) << "\" x2=\"" << detail::f2(x + 20)
           << "\" y2=\"" << detail::f2(y - 4) << "\" stroke=\"" << palette[ti % 10] << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << detail::f2(x + 26) << "\" y=\"" << detail::f2(y) << "\">"
           << detail::xml_escape("H" + detail::order_symbol(t.order) + "(w; " + t.observable_label + ")")
           << "</text>\n";
    }
    os << "</g>\n</svg>\n";
}

inline void emit_svg(const std::vector<BodeTable>& tables, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    emit_svg(tables, os);
    if (!os) throw IoError("failed writing '" + path + "'");
}

}  // namespace koopfr
