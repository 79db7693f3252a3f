#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "koopfr/errors.hpp"
#include "koopfr/expr.hpp"

namespace koopfr {

using CVector = Eigen::VectorXcd;

inline std::span<const cplx> as_span(const CVector& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Plant x' = F(x, u), y = g(x, u) with named real parameters.
struct PlantSpec {
    std::string name = "plant";
    int dim = 1;
    std::vector<Expr> dynamics;  // F, one component per state
    Expr observable;             // g
    Params params;

    /// Parse a plant from expression text; throws on any parse error.
    static PlantSpec from_text(std::string name, int dim, Params params,
                               const std::vector<std::string>& dynamics, const std::string& observable) {
        PlantSpec p;
        p.name = std::move(name);
        p.dim = dim;
        p.params = std::move(params);
        const auto names = p.param_names();
        for (const auto& f : dynamics) p.dynamics.push_back(parse(f, dim, names));
        p.observable = parse(observable, dim, names);
        p.validate();
        return p;
    }

    std::set<std::string> param_names() const {
        std::set<std::string> out;
        for (const auto& [k, v] : params) out.insert(k);
        return out;
    }

    PlantSpec with_observable(Expr g) const {
        PlantSpec p = *this;
        p.observable = std::move(g);
        p.validate();
        return p;
    }

    void validate() const {
        if (dim < 1) throw InvalidPlant("plant dimension must be >= 1");
        if (static_cast<int>(dynamics.size()) != dim)
            throw InvalidPlant("plant '" + name + "' has " + std::to_string(dynamics.size()) +
                               " dynamics equations for dimension " + std::to_string(dim));
        for (const auto& [k, v] : params) {
            if (detail::is_reserved(k)) throw InvalidPlant("parameter name '" + k + "' is reserved");
            if (!std::isfinite(v)) throw InvalidPlant("parameter '" + k + "' is not finite");
        }
        auto check = [&](const Expr& e, const char* what) {
            if (e.empty()) throw InvalidPlant(std::string("missing ") + what);
            if (e.max_state_index() > dim) throw UnknownIdentifier("x" + std::to_string(e.max_state_index()));
            for (const auto& n : e.param_names())
                if (!params.count(n)) throw UnboundParameter(n);
        };
        for (const auto& f : dynamics) check(f, "dynamics expression");
        check(observable, "observable");
    }
};

/// Skew-product system: x' = F(x, u), u' = i omega u, observed through g.
///
/// Immutable after construction. The expressions are compiled once; all
/// member functions are const and safe to call concurrently.
class SkewSystem {
   public:
    SkewSystem(PlantSpec plant, double omega, cplx u0) : plant_(std::move(plant)), omega_(omega), u0_(u0) {
        if (!(omega_ > 0.0) || !std::isfinite(omega_)) throw InvalidPlant("omega must be a positive finite number");
        if (!(std::abs(u0_) > 0.0) || !std::isfinite(std::abs(u0_))) throw InvalidPlant("u0 must be non-zero");
        plant_.validate();
        for (const auto& f : plant_.dynamics) field_.emplace_back(f, plant_.params);
        output_ = Program(plant_.observable, plant_.params);
    }

    const PlantSpec& plant() const noexcept { return plant_; }
    int dim() const noexcept { return plant_.dim; }
    double omega() const noexcept { return omega_; }
    cplx u0() const noexcept { return u0_; }
    double period() const noexcept { return 2.0 * std::numbers::pi / omega_; }

    /// Exact input u(t) = u0 exp(i omega t) with unwrapped phase.
    Input input_at(double t) const { return Input::polar(std::abs(u0_), std::arg(u0_) + omega_ * t); }

    /// F(x, u).
    void field(const CVector& x, const Input& u, CVector& out) const {
        out.resize(plant_.dim);
        const auto xs = as_span(x);
        for (int k = 0; k < plant_.dim; ++k) out[k] = field_[static_cast<std::size_t>(k)](xs, u);
    }

    /// (F(x, u), i omega u).
    CVector augmented_field(const CVector& x, const Input& u) const {
        CVector f;
        field(x, u, f);
        CVector out(plant_.dim + 1);
        out.head(plant_.dim) = f;
        out[plant_.dim] = cplx{0.0, omega_} * u.value;
        return out;
    }
    CVector augmented_field(const CVector& x, cplx u) const { return augmented_field(x, Input::from_complex(u)); }

    /// y = g(x, u) for the plant's observable.
    cplx observe(const CVector& x, const Input& u) const { return output_(as_span(x), u); }

    /// Koopman generator of the skew-product system applied to @p f at (x, u):
    /// F(x,u) . grad_x f + i omega u df/du.
    cplx apply_generator(const Expr& f, const CVector& x, const Input& u) const {
        const Gradient g = eval_grad(f, as_span(x), u, plant_.params);
        CVector F;
        field(x, u, F);
        cplx acc = cplx{0.0, omega_} * u.value * g.du;
        for (int k = 0; k < plant_.dim; ++k) acc += F[k] * g.dx[static_cast<std::size_t>(k)];
        return acc;
    }
    cplx apply_generator(const Expr& f, const CVector& x, cplx u) const {
        return apply_generator(f, x, Input::from_complex(u));
    }

   private:
    PlantSpec plant_;
    double omega_;
    cplx u0_;
    std::vector<Program> field_;
    Program output_;
};

}  // namespace koopfr
