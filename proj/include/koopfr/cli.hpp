#pragma once

// Command-line front end: simulate, respond, sweep and validate.
//
// Exit codes: 0 ok, 2 configuration error, 3 divergence, 4 no steady state,
// 5 cross-check or validation failure.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "koopfr/bode.hpp"
#include "koopfr/dmd.hpp"
#include "koopfr/errors.hpp"
#include "koopfr/lti.hpp"
#include "koopfr/oracle.hpp"
#include "koopfr/plant_file.hpp"
#include "koopfr/response.hpp"
#include "koopfr/sim.hpp"

namespace koopfr::cli {

enum ExitCode : int { kOk = 0, kConfig = 2, kDiverged = 3, kNotSteady = 4, kCheckFailed = 5 };

/// Everything a run needs. Defaults are the documented CLI defaults.
struct RunConfig {
    std::string plant_path;
    std::string observable;  // empty: the plant file's y
    std::optional<double> omega;
    std::optional<Grid> grid;
    double u0_mag = 1.0;
    double u0_phase_deg = 0.0;
    std::vector<OrderTag> orders{OrderTag::harmonic(1)};
    double dt = 0.0;  // 0: min(P/128, 0.01), tightened for dmd
    double horizon_periods = 60.0;
    double tol = 1e-7;
    int window_periods = 16;
    std::vector<Method> methods{Method::HarmonicAverage, Method::AbelResidue};
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    std::vector<double> x0;  // empty: zero initial state

    cplx u0() const { return std::polar(u0_mag, u0_phase_deg * std::numbers::pi / 180.0); }

    bool wants(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

    double omega_max() const { return grid ? grid->omega_max : omega.value_or(0.0); }

    AnalysisSettings analysis() const {
        AnalysisSettings s;
        s.sim.dt = dt;
        s.sim.horizon_periods = horizon_periods;
        s.sim.periodicity_tol = tol;
        s.u0 = u0();
        s.methods = methods;
        s.window_periods = window_periods;
        if (!x0.empty()) {
            s.x0.resize(static_cast<Eigen::Index>(x0.size()));
            for (std::size_t k = 0; k < x0.size(); ++k) s.x0[static_cast<Eigen::Index>(k)] = x0[k];
        }
        return s;
    }

    /// Checks that do not need the plant, then the ones that do.
    void validate(const PlantSpec& plant) const {
        if (!(u0_mag > 0.0) || !std::isfinite(u0_mag)) throw ConfigError("--u0 magnitude must be positive");
        if (!std::isfinite(u0_phase_deg)) throw ConfigError("--u0 phase must be finite");
        if (omega && (!(*omega > 0.0) || !std::isfinite(*omega))) throw ConfigError("--omega must be positive");
        if (grid) grid->values();
        if (dt < 0.0 || !std::isfinite(dt)) throw ConfigError("--dt must be positive (0 selects the default)");
        if (!(horizon_periods >= 4.0)) throw ConfigError("--horizon-periods must be at least 4");
        if (!(tol > 0.0)) throw ConfigError("--tol must be positive");
        if (window_periods < 1) throw ConfigError("--window-periods must be >= 1");
        if (methods.empty()) throw ConfigError("--methods needs at least one of harm, abel, dmd");
        if (orders.empty()) throw ConfigError("at least one --order is required");
        if (!x0.empty() && static_cast<int>(x0.size()) != plant.dim)
            throw ConfigError("--x0 has " + std::to_string(x0.size()) + " entries, plant dimension is " +
                              std::to_string(plant.dim));
        const double w = omega_max();
        if (wants(Method::Dmd) && dt > 0.0 && w > 0.0) {
            const double bound = dmd_max_dt(orders, w);
            if (dt > bound * (1.0 + 1e-12))
                throw ConfigError("--dt " + detail::fmt15(dt) + " exceeds pi/(8 n_max omega_max) = " +
                                  detail::fmt15(bound) + " required by dmd");
        }
        if (dt > 0.0 && w > 0.0 && dt > 2.0 * std::numbers::pi / w / 64.0 * (1.0 + 1e-12))
            throw ConfigError("--dt exceeds 64 samples per forcing period at omega = " + detail::fmt15(w));
    }
};

/// "mag" or "mag@phase_deg".
inline std::pair<double, double> parse_u0(const std::string& text) {
    const auto at = text.find('@');
    auto num = [&](std::string_view s) {
        double v = 0.0;
        auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || end != s.data() + s.size())
            throw ConfigError("bad --u0 '" + text + "' (expected mag or mag@phase_deg)");
        return v;
    };
    const std::string_view sv(text);
    if (at == std::string::npos) return {num(sv), 0.0};
    return {num(sv.substr(0, at)), num(sv.substr(at + 1))};
}

inline PlantSpec load_run_plant(const RunConfig& cfg) {
    if (cfg.plant_path.empty()) throw ConfigError("--plant is required");
    PlantSpec plant = load_plant(cfg.plant_path);
    if (!cfg.observable.empty()) plant = plant.with_observable(parse(cfg.observable, plant.dim, plant.param_names()));
    cfg.validate(plant);
    return plant;
}

inline std::filesystem::path prepare_out(const RunConfig& cfg) {
    std::filesystem::path dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + cfg.out_dir + "': " + ec.message());
    return dir;
}

inline std::string file_label(const OrderTag& o) {
    return o.kind == OrderTag::Kind::Harmonic ? std::to_string(o.n) : "1_" + std::to_string(o.n);
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const RunConfig& cfg, std::ostream& out) {
    const PlantSpec plant = load_run_plant(cfg);
    if (!cfg.omega) throw ConfigError("simulate needs --omega");
    const double w = *cfg.omega;
    const SkewSystem sys(plant, w, cfg.u0());
    const AnalysisSettings s = cfg.analysis();
    const CVector x0 = s.x0.size() == 0 ? CVector::Zero(plant.dim) : s.x0;
    const double dt = cfg.dt > 0.0 ? cfg.dt : default_dt(w);
    const double horizon = default_horizon(w, s.sim);

    out << "[simulate]\n";
    out << "plant = " << plant.name << "\n";
    out << "omega = " << detail::fmt15(w) << "\n";
    out << "horizon = " << detail::fmt15(horizon) << "\n";
    Trajectory tr;
    try {
        tr = integrate(sys, x0, horizon, dt);
    } catch (const NonFiniteState& e) {
        out << "status = diverged\n";
        out << "diverged_at = " << detail::fmt15(e.time()) << "\n";
        return kDiverged;
    }
    const auto path = prepare_out(cfg) / (plant.name + "_trajectory.csv");
    write_trajectory_csv(tr, path.string());
    const PeriodicityReport rep = find_steady_state(tr, cfg.tol);
    out << "dt = " << detail::fmt15(tr.dt) << "\n";
    out << "samples = " << tr.size() << "\n";
    out << "periodic = " << (rep.periodic ? "true" : "false") << "\n";
    if (rep.detected_period) out << "detected_period = " << detail::fmt15(*rep.detected_period) << "\n";
    out << "residual = " << detail::fmt15(rep.residual) << "\n";
    if (rep.periodic) out << "transient_end = " << detail::fmt15(rep.transient_end) << "\n";
    out << "csv = " << path.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// respond

inline int cmd_respond(const RunConfig& cfg, std::ostream& out) {
    const PlantSpec plant = load_run_plant(cfg);
    if (!cfg.omega) throw ConfigError("respond needs --omega");
    const PointResult p = evaluate_point(plant, *cfg.omega, cfg.orders, cfg.analysis());

    out << "[respond]\n";
    out << "plant = " << plant.name << "\n";
    out << "observable = " << plant.observable.str() << "\n";
    out << "omega = " << detail::fmt15(p.omega) << "\n";
    out << "dt = " << detail::fmt15(p.dt) << "\n";
    out << "horizon = " << detail::fmt15(p.horizon) << "\n";
    out << "status = " << status_name(p.status) << "\n";
    if (p.status == PointStatus::Diverged) {
        out << "message = " << p.message << "\n";
        return kDiverged;
    }
    if (p.status == PointStatus::NotSteady) {
        out << "message = " << p.message << "\n";
        return kNotSteady;
    }
    out << "transient_end = " << detail::fmt15(p.steady.transient_end) << "\n";
    out << "detected_period = " << detail::fmt15(*p.steady.detected_period) << "\n";

    std::ostringstream csv;
    csv << "omega,order,method,re_H,im_H,err,accepted\n";
    bool all_accepted = true;
    for (const auto& o : p.orders) {
        for (const auto& e : o.estimates) {
            out << "\n[response]\n";
            out << "order = " << o.order.label() << "\n";
            out << "method = " << method_name(e.method) << "\n";
            out << "re_H = " << detail::fmt15(e.value.real()) << "\n";
            out << "im_H = " << detail::fmt15(e.value.imag()) << "\n";
            out << "abs_H = " << detail::fmt15(std::abs(e.value)) << "\n";
            out << "err = " << detail::fmt15(e.err_estimate) << "\n";
            csv << detail::fmt15(p.omega) << ',' << o.order.label() << ',' << method_name(e.method) << ','
                << detail::fmt15(e.value.real()) << ',' << detail::fmt15(e.value.imag()) << ','
                << detail::fmt15(e.err_estimate) << ',' << (o.accepted ? "true" : "false") << '\n';
        }
        out << "\n[order " << o.order.label() << "]\n";
        for (std::size_t i = 0, k = 0; i < o.estimates.size(); ++i)
            for (std::size_t j = i + 1; j < o.estimates.size(); ++j, ++k) {
                const auto& c = o.checks[k];
                out << "crosscheck " << method_name(o.estimates[i].method) << "/" << method_name(o.estimates[j].method)
                    << " = " << (c.agree ? "agree" : "disagree") << " (gap " << detail::fmt15(c.gap) << ", rel_tol "
                    << detail::fmt15(c.rel_tol) << ")\n";
            }
        for (const auto& n : o.notes) out << "note = " << n << "\n";
        out << "accepted = " << (o.accepted ? "true" : "false") << "\n";
        all_accepted = all_accepted && o.accepted;
    }
    const auto path = prepare_out(cfg) / (plant.name + "_respond.csv");
    std::ofstream f(path, std::ios::binary);
    if (!(f << csv.str())) throw IoError("cannot write '" + path.string() + "'");
    out << "\ncsv = " << path.string() << "\n";
    return all_accepted ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// sweep

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out) {
    const PlantSpec plant = load_run_plant(cfg);
    if (!cfg.grid) throw ConfigError("sweep needs --omega-grid min:max:points");
    const auto tables = sweep(plant, cfg.orders, *cfg.grid, cfg.analysis(), plant.observable.str());
    const auto dir = prepare_out(cfg);
    out << "[sweep]\n";
    out << "plant = " << plant.name << "\n";
    out << "observable = " << plant.observable.str() << "\n";
    out << "grid = " << detail::fmt15(cfg.grid->omega_min) << ":" << detail::fmt15(cfg.grid->omega_max) << ":"
        << cfg.grid->points << "\n";
    for (const auto& t : tables) {
        const auto path = dir / (plant.name + "_H" + file_label(t.order) + ".csv");
        emit_csv(t, path.string());
        std::size_t ok = 0;
        for (const auto& r : t.rows) ok += r.status == "ok";
        out << "table H" << t.order.label() << " = " << path.string() << " (" << ok << "/" << t.rows.size()
            << " rows ok)\n";
    }
    const auto svg = dir / (plant.name + "_bode.svg");
    emit_svg(tables, svg.string());
    out << "svg = " << svg.string() << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------
// validate

struct CheckResult {
    std::string name;
    double tol = 0.0;
    double value = 0.0;
    bool pass = false;
    std::string detail;
};

struct ValidateConfig {
    oracle::TwoDExample ex;
    std::uint64_t seed = 0;
};

/// Oracle, eigenfunction and cross-method checks on the two-state example
/// and the scalar linear plant.
inline std::vector<CheckResult> run_validation(const ValidateConfig& vc) {
    const oracle::TwoDExample ex = vc.ex;
    ex.validate();
    std::vector<CheckResult> out;
    auto check = [&](std::string name, double tol, const std::function<double()>& f) {
        CheckResult r;
        r.name = std::move(name);
        r.tol = tol;
        try {
            r.value = f();
            r.pass = r.value <= tol;
        } catch (const std::exception& e) {
            r.value = std::numeric_limits<double>::quiet_NaN();
            r.detail = e.what();
        }
        out.push_back(std::move(r));
    };

    std::mt19937_64 rng(vc.seed);
    std::normal_distribution<double> N;
    std::uniform_real_distribution<double> phase(-std::numbers::pi, std::numbers::pi), mag(0.3, 2.0);
    std::vector<std::pair<CVector, Input>> points;
    for (int k = 0; k < 100; ++k) {
        CVector x(2);
        x << cplx(N(rng), N(rng)), cplx(N(rng), N(rng));
        points.emplace_back(x, Input::polar(mag(rng), 4.0 * phase(rng)));
    }
    const SkewSystem sys(oracle::twod_plant(ex), ex.omega, 1.0);
    const cplx iw{0.0, ex.omega};
    auto generator_residual = [&](const Expr& f, cplx lambda) {
        double worst = 0.0;
        for (const auto& [x, u] : points) {
            const cplx v = eval(f, as_span(x), u, {});
            worst = std::max(worst, std::abs(sys.apply_generator(f, x, u) - lambda * v) / std::max(1.0, std::abs(v)));
        }
        return worst;
    };
    const auto ef = oracle::eigenfunctions(ex);
    check("generator: u^n, n = 1..3", 1e-10, [&] {
        double w = 0.0;
        for (int n = 1; n <= 3; ++n) w = std::max(w, generator_residual(parse("u^" + std::to_string(n), 2), double(n) * iw));
        return w;
    });
    check("generator: u^(1/n), n = 2, 3", 1e-10, [&] {
        double w = 0.0;
        for (int n = 2; n <= 3; ++n)
            w = std::max(w, generator_residual(parse("u^(1/" + std::to_string(n) + ")", 2), iw / double(n)));
        return w;
    });
    check("generator: phi_a1", 1e-10, [&] { return generator_residual(ef.phi_a1, ex.a1); });
    check("generator: phi_a2", 1e-10, [&] { return generator_residual(ef.phi_a2, ex.a2); });
    check("generator: phi_iw", 1e-10, [&] { return generator_residual(ef.phi_iw, iw); });

    const cplx h2 = oracle::closed_form_H(ex, oracle::Observable::X1, OrderTag::harmonic(2));
    const cplx h1x2 = oracle::closed_form_H(ex, oracle::Observable::X2, OrderTag::harmonic(1));
    check("lifted: g_y(u^2)(i 2w) vs H2(x1), relative", 1e-12, [&] {
        const auto L = oracle::lifted_system(ex);
        const cplx s{0.0, 2.0 * ex.omega};
        return std::max(std::abs(L.transfer_u2_to_y(s) - h2), std::abs(L.transfer_u2_to_y_from_matrix(s) - h2)) /
               std::abs(h2);
    });
    check("lifted: g_yu(s) = 0", 1e-12, [&] {
        return std::abs(oracle::lifted_system(ex).transfer_u_to_y_from_matrix(cplx(0.0, 2.0 * ex.omega)));
    });

    AnalysisSettings s;
    s.methods = {Method::HarmonicAverage, Method::AbelResidue, Method::Dmd};
    const auto order_of = [](const PointResult& p, int n) -> const OrderResult& {
        return p.orders[static_cast<std::size_t>(n - 1)];
    };
    const auto est = [](const OrderResult& o, Method m) -> cplx {
        for (const auto& e : o.estimates)
            if (e.method == m) return e.value;
        throw Error(std::string(method_name(m)) + " produced no estimate");
    };
    std::optional<PointResult> px1, px2;
    auto point = [&](oracle::Observable obs) -> const PointResult& {
        auto& slot = obs == oracle::Observable::X1 ? px1 : px2;
        if (!slot) {
            slot = evaluate_point(oracle::twod_plant(ex, obs), ex.omega,
                                  {OrderTag::harmonic(1), OrderTag::harmonic(2), OrderTag::harmonic(3)}, s);
            if (slot->status != PointStatus::Ok) throw Error("simulation: " + slot->message);
        }
        return *slot;
    };
    using oracle::Observable;
    check("harmonic average: H2(x1) vs closed form", 1e-6,
          [&] { return std::abs(est(order_of(point(Observable::X1), 2), Method::HarmonicAverage) - h2); });
    check("harmonic average: H1(x2) vs closed form", 1e-6,
          [&] { return std::abs(est(order_of(point(Observable::X2), 1), Method::HarmonicAverage) - h1x2); });
    check("harmonic average: |H1(x1)|, |H3(x1)|, |H2(x2)|", 1e-5, [&] {
        return std::max({std::abs(est(order_of(point(Observable::X1), 1), Method::HarmonicAverage)),
                         std::abs(est(order_of(point(Observable::X1), 3), Method::HarmonicAverage)),
                         std::abs(est(order_of(point(Observable::X2), 2), Method::HarmonicAverage))});
    });
    check("abel residue: H2(x1) vs closed form", 1e-3,
          [&] { return std::abs(est(order_of(point(Observable::X1), 2), Method::AbelResidue) - h2); });
    check("abel residue: H2(x2) = 0", 1e-3,
          [&] { return std::abs(est(order_of(point(Observable::X2), 2), Method::AbelResidue)); });
    check("dmd: H2(x1) vs closed form", 1e-3,
          [&] { return std::abs(est(order_of(point(Observable::X1), 2), Method::Dmd) - h2); });
    check("cross-check: harm/abel/dmd relative gap", 1e-2, [&] {
        double worst = 0.0;
        for (const auto* p : {&point(Observable::X1), &point(Observable::X2)})
            for (const auto& o : p->orders)
                for (const auto& c : o.checks)
                    worst = std::max(worst, c.gap / (1.0 + std::max(std::abs(c.a), std::abs(c.b))));
        return worst;
    });
    check("dmd: eigenvalue i 2w in steady-state data", 1e-4, [&] {
        const SkewSystem sx(oracle::twod_plant(ex), ex.omega, 1.0);
        const auto tr = integrate(sx, CVector::Zero(2), 60.0 * sx.period(), default_dt(ex.omega));
        const auto per = static_cast<std::size_t>(std::lround(sx.period() / tr.dt));
        const std::size_t stride = per / 32, count = 4 * 32 + 1;
        const auto r = hankel_dmd(tr, tr.size() - 1 - (count - 1) * stride, count, 16, 1e-10, stride);
        double best = std::numeric_limits<double>::infinity();
        for (cplx e : r.cont_eigs) best = std::min(best, std::abs(e - 2.0 * iw));
        return best;
    });
    check("koopman modes: reconstruction vs RK4, t in [0, 20]", 1e-6, [&] {
        CVector x0(2);
        x0 << cplx(N(rng), N(rng)), cplx(N(rng), N(rng));
        const cplx u0 = std::polar(1.0, phase(rng));
        const SkewSystem sx(oracle::twod_plant(ex), ex.omega, u0);
        const auto tr = integrate(sx, x0, 20.0, 1e-3);
        double worst = 0.0;
        for (std::size_t k = 0; k < tr.size(); k += 10) {
            const auto [x1, x2] = oracle::kmd_reconstruct(ex, x0, u0, tr.time(k));
            worst = std::max({worst, std::abs(x1 - tr.states[k][0]), std::abs(x2 - tr.states[k][1])});
        }
        return worst;
    });

    LtiPlant lin;
    lin.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
    lin.b = lin.c = Eigen::VectorXd::Ones(1);
    const PlantSpec lin_spec = to_plant_spec(lin, "linear1d");
    check("lti: harmonic average vs c^T (iwI - A)^-1 b", 1e-5, [&] {
        AnalysisSettings ls;
        const auto p = evaluate_point(lin_spec, ex.omega, {OrderTag::harmonic(1)}, ls);
        return std::abs(p.orders[0].estimates.at(0).value - lti_response(lin, ex.omega));
    });
    check("lti: skew eigenvector residual", 1e-10, [&] {
        const auto r = skew_eigencheck(lin, ex.omega);
        return std::max(r.left_residual, r.right_residual);
    });
    check("rk4: |error ratio under dt halving - 16|", 3.0, [&] {
        const SkewSystem sx(lin_spec, 1.0, 1.0);
        const double P = sx.period();
        auto error = [&](double dt) {
            const auto tr = integrate(sx, CVector::Zero(1), 5.0 * P, dt);
            const double t = tr.end_time();
            const cplx g = 1.0 / cplx(1.0, 1.0);
            return std::abs(tr.states.back()[0] - (-g * std::exp(-t) + g * std::exp(cplx(0.0, t))));
        };
        return std::abs(error(P / 64.0) / error(P / 128.0) - 16.0);
    });
    return out;
}

inline int cmd_validate(const ValidateConfig& vc, std::ostream& out) {
    out << "[validate]\n";
    out << "a1 = " << detail::fmt15(vc.ex.a1) << "\n";
    out << "a2 = " << detail::fmt15(vc.ex.a2) << "\n";
    out << "omega = " << detail::fmt15(vc.ex.omega) << "\n";
    out << "seed = " << vc.seed << "\n";
    std::vector<CheckResult> results;
    try {
        results = run_validation(vc);
    } catch (const DegenerateParameters& e) {
        out << "DegenerateParameters: " << e.what() << "\n";
        return kConfig;
    }
    std::size_t failed = 0;
    for (const auto& r : results) {
        char line[200];
        std::snprintf(line, sizeof line, "%-4s  %-52s  value %-10.3e  tol %.1e", r.pass ? "PASS" : "FAIL",
                      r.name.c_str(), r.value, r.tol);
        out << line;
        if (!r.detail.empty()) out << "  (" << r.detail << ")";
        out << "\n";
        failed += !r.pass;
    }
    out << (results.size() - failed) << "/" << results.size() << " checks passed\n";
    return failed == 0 ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Koopman frequency responses of forced nonlinear plants"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string u0_text = "1@0";
    std::vector<std::string> order_text;
    std::vector<std::string> method_text;
    std::string grid_text;
    double omega = 0.0;

    auto add_common = [&](CLI::App* sub, bool with_grid) {
        sub->add_option("--plant", cfg.plant_path, "Plant definition file")->required();
        sub->add_option("--observable", cfg.observable, "Override the plant's observable y");
        sub->add_option("--omega", omega, "Forcing frequency (rad per unit time)");
        if (with_grid) sub->add_option("--omega-grid", grid_text, "Log grid min:max:points")->required();
        sub->add_option("--u0", u0_text, "Input amplitude mag[@phase_deg]")->capture_default_str();
        sub->add_option("--order", order_text, "Order n or 1/n (repeatable, default 1)")->take_last()->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
        sub->add_option("--dt", cfg.dt, "Integration step (0: automatic)")->capture_default_str();
        sub->add_option("--horizon-periods", cfg.horizon_periods, "Simulated forcing periods")->capture_default_str();
        sub->add_option("--tol", cfg.tol, "Relative periodicity tolerance")->capture_default_str();
        sub->add_option("--window-periods", cfg.window_periods, "Averaging window in periods")->capture_default_str();
        sub->add_option("--methods", method_text, "Estimators: harm,abel,dmd (default harm,abel)")->delimiter(',');
        sub->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
        sub->add_option("--seed", cfg.seed, "Seed for randomized utilities")->capture_default_str();
        sub->add_option("--x0", cfg.x0, "Initial state, comma separated reals (use --x0=-1,2 for negatives)")
            ->delimiter(',');
    };
    CLI::App* simulate = app.add_subcommand("simulate", "Integrate one trajectory and report periodicity");
    add_common(simulate, false);
    CLI::App* respond = app.add_subcommand("respond", "Frequency response at a single omega");
    add_common(respond, false);
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Bode tables and plot over a frequency grid");
    add_common(sweep_cmd, true);

    ValidateConfig vc;
    CLI::App* validate = app.add_subcommand("validate", "Run the built-in oracle and consistency checks");
    validate->add_option("--a1", vc.ex.a1, "a1 of the two-state example")->capture_default_str();
    validate->add_option("--a2", vc.ex.a2, "a2 of the two-state example")->capture_default_str();
    validate->add_option("--omega", vc.ex.omega, "Forcing frequency")->capture_default_str();
    validate->add_option("--seed", vc.seed, "Seed for the random test points")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (validate->parsed()) return cmd_validate(vc, out);

        if (omega != 0.0) cfg.omega = omega;
        if (!grid_text.empty()) cfg.grid = Grid::parse(grid_text);
        std::tie(cfg.u0_mag, cfg.u0_phase_deg) = parse_u0(u0_text);
        if (!order_text.empty()) {
            cfg.orders.clear();
            for (const auto& o : order_text) cfg.orders.push_back(OrderTag::parse(o));
        }
        if (!method_text.empty()) {
            cfg.methods.clear();
            for (const auto& m : method_text) {
                const Method parsed = parse_method(m);
                if (parsed == Method::ClosedForm) throw ConfigError("closed_form is not a simulation method");
                cfg.methods.push_back(parsed);
            }
        }
        if (simulate->parsed()) return cmd_simulate(cfg, out);
        if (respond->parsed()) return cmd_respond(cfg, out);
        return cmd_sweep(cfg, out);
    } catch (const NonFiniteState& e) {
        err << "error: " << e.what() << "\n";
        return kDiverged;
    } catch (const NotSteady& e) {
        err << "error: " << e.what() << "\n";
        return kNotSteady;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kConfig;
    }
}

}  // namespace koopfr::cli
