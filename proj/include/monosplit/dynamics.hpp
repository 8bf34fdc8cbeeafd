#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "operators.hpp"
#include "vector.hpp"

namespace monosplit {

struct Trajectory {
    std::vector<double> times;
    std::vector<Vector> points;
    /// ||dz/dt|| at each recorded point, when the system exposes it.
    std::vector<double> dz_norm;
    std::string system;
    /// Set for systems whose trajectories are not known to exist.
    bool experimental = false;
};

enum class Scheme { euler, rk4 };

struct IntegratorOptions {
    double h = 1e-3;
    double horizon = 1.0;
    Scheme scheme = Scheme::euler;
    /// Keep every n-th step (the final point is always kept).
    std::size_t record_every = 1;
    /// Reject h > lambda / 10 for the lambda-parameterized systems.
    bool enforce_step_guard = true;
};

namespace detail {

inline void check_options(const IntegratorOptions& o) {
    if (!(o.h > 0.0) || !std::isfinite(o.h)) throw std::invalid_argument("integrator: h must be positive");
    if (!(o.horizon > 0.0) || !std::isfinite(o.horizon))
        throw std::invalid_argument("integrator: horizon must be positive");
    if (o.record_every == 0) throw std::invalid_argument("integrator: record_every must be >= 1");
}

inline void check_guard(const IntegratorOptions& o, double lambda) {
    if (o.enforce_step_guard && o.h > lambda / 10.0 * (1.0 + 1e-12))
        throw std::invalid_argument("integrator: h must be <= lambda / 10");
}

/// Fixed-step integration of y' = f(y) on [0, horizon]; the last step is
/// shortened to land exactly on the horizon. `observe` maps the state to the
/// recorded point.
inline Trajectory integrate(const std::function<Vector(const Vector&)>& field, const Vector& y0,
                            const IntegratorOptions& o, const std::function<Vector(const Vector&)>& observe,
                            std::string system) {
    check_options(o);
    Trajectory traj;
    traj.system = std::move(system);
    const auto steps = static_cast<std::size_t>(std::ceil(o.horizon / o.h - 1e-9));
    Vector y = y0;
    auto record = [&](double t, const Vector& state, const Vector& slope) {
        traj.times.push_back(t);
        traj.points.push_back(observe(state));
        traj.dz_norm.push_back(norm(slope));
    };
    Vector slope = field(y);
    record(0.0, y, slope);
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * o.h;
        const double dt = std::min(o.h, o.horizon - t);
        try {
            if (o.scheme == Scheme::euler) {
                y = axpy(dt, slope, y);
            } else {
                const Vector k1 = slope;
                const Vector k2 = field(axpy(0.5 * dt, k1, y));
                const Vector k3 = field(axpy(0.5 * dt, k2, y));
                const Vector k4 = field(axpy(dt, k3, y));
                y = axpy(dt / 6.0, k1 + 2.0 * k2 + 2.0 * k3 + k4, y);
            }
            slope = field(y);
        } catch (const NonFiniteError&) {
            throw NonFiniteError(traj.system + ": non-finite state at t = " + std::to_string(t + dt));
        }
        const bool last = n + 1 == steps;
        if (last || (n + 1) % o.record_every == 0) record(last ? o.horizon : t + dt, y, slope);
    }
    return traj;
}

} // namespace detail

/// x' = -B(x), the flow shared by gradient descent and the proximal point method.
inline Trajectory integrate_forward_flow(const ForwardOp& b, const Vector& x0, const IntegratorOptions& o) {
    return detail::integrate([&](const Vector& x) { return -b(x); }, x0, o, [](const Vector& x) { return x; },
                             "forward-flow");
}

/// Continuous Douglas-Rachford system
///   z' = J_{lambda A}(2 J_{lambda B} z - z) - J_{lambda B} z,
/// which is z' + z = ((id + R_A R_B) / 2) z. Records z(t).
inline Trajectory integrate_dr_flow(const ResolventOp& a, const ResolventOp& b, double lambda, const Vector& z0,
                                    const IntegratorOptions& o) {
    require_positive_step(lambda, "integrate_dr_flow");
    detail::check_guard(o, lambda);
    auto field = [&](const Vector& z) {
        const Vector shadow = b(lambda, z);
        return a(lambda, axpy(2.0, shadow, -z)) - shadow;
    };
    return detail::integrate(field, z0, o, [](const Vector& z) { return z; }, "dr-flow");
}

/// Maps each recorded z(t) to its shadow J_{lambda B}(z(t)).
inline Trajectory shadow_of(const Trajectory& dr, const ResolventOp& b, double lambda) {
    Trajectory out = dr;
    out.system = dr.system + "-shadow";
    for (auto& p : out.points) p = b(lambda, p);
    return out;
}

/// Shadow system x' + x = J_{lambda A}(x - y) - y', y = lambda B(x), integrated
/// through z = x + lambda B(x) and reported as x(t) = J_{lambda B}(z(t)).
/// J_{lambda B} is the fixed-point inner solve, so lambda * L < 1 is required.
inline Trajectory integrate_shadow_flow(const ResolventOp& a, const ForwardOp& b, double lambda, const Vector& x0,
                                        const IntegratorOptions& o) {
    require_positive_step(lambda, "integrate_shadow_flow");
    detail::check_guard(o, lambda);
    if (!(lambda * b.lipschitz() < 1.0)) throw ContractionError("integrate_shadow_flow: lambda * L must be < 1");
    std::optional<Vector> warm;
    auto shadow = [&](const Vector& z) {
        Vector x = fixed_point_resolvent(b, lambda, z, warm);
        warm = x;
        return x;
    };
    auto field = [&](const Vector& z) {
        const Vector x = shadow(z);
        return a(lambda, axpy(2.0, x, -z)) - x;
    };
    const Vector z0 = axpy(lambda, b(x0), x0);
    return detail::integrate(field, z0, o, shadow, "shadow-flow");
}

/// Companion y(t) = lambda B(x(t)) of a shadow-flow trajectory.
inline std::vector<Vector> companion_y(const Trajectory& shadow, const ForwardOp& b, double lambda) {
    std::vector<Vector> ys;
    ys.reserve(shadow.points.size());
    for (const auto& x : shadow.points) ys.push_back(lambda * b(x));
    return ys;
}

/// Experimental: x' + x = J_{lambda A}(x - y - y'), y = lambda B(x), with y'
/// replaced by the backward difference of y along the computed trajectory
/// (explicit Euler only). Existence of trajectories is not established, so
/// the result is flagged experimental.
inline Trajectory integrate_dyn4_flow(const ResolventOp& a, const ForwardOp& b, double lambda, const Vector& x0,
                                      IntegratorOptions o) {
    require_positive_step(lambda, "integrate_dyn4_flow");
    detail::check_guard(o, lambda);
    detail::check_options(o);
    if (!(lambda * b.lipschitz() < 1.0)) throw ContractionError("integrate_dyn4_flow: lambda * L must be < 1");
    Trajectory traj;
    traj.system = "dyn4-flow";
    traj.experimental = true;
    const auto steps = static_cast<std::size_t>(std::ceil(o.horizon / o.h - 1e-9));
    Vector x = x0;
    Vector y = lambda * b(x);
    Vector y_prev = y;
    double dt_prev = o.h;
    auto slope = [&]() {
        const Vector ydot = (1.0 / dt_prev) * (y - y_prev);
        return a(lambda, x - y - ydot) - x;
    };
    Vector v = slope();
    traj.times.push_back(0.0);
    traj.points.push_back(x);
    traj.dz_norm.push_back(norm(v));
    for (std::size_t n = 0; n < steps; ++n) {
        const double t = static_cast<double>(n) * o.h;
        const double dt = std::min(o.h, o.horizon - t);
        x = axpy(dt, v, x);
        y_prev = y;
        y = lambda * b(x);
        dt_prev = dt;
        v = slope();
        const bool last = n + 1 == steps;
        if (last || (n + 1) % o.record_every == 0) {
            traj.times.push_back(last ? o.horizon : t + dt);
            traj.points.push_back(x);
            traj.dz_norm.push_back(norm(v));
        }
    }
    return traj;
}

/// Linear interpolation of the trajectory at time t.
inline Vector sample_at(const Trajectory& traj, double t) {
    if (traj.times.empty()) throw std::invalid_argument("sample_at: empty trajectory");
    if (t < 0.0 || t > traj.times.back() * (1.0 + 1e-12) + 1e-12)
        throw std::out_of_range("sample_at: time outside trajectory coverage");
    auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t);
    if (it == traj.times.end()) return traj.points.back();
    const auto hi = static_cast<std::size_t>(it - traj.times.begin());
    if (hi == 0 || *it == t) return traj.points[hi];
    const double t0 = traj.times[hi - 1];
    const double w = (t - t0) / (traj.times[hi] - t0);
    return axpy(w, traj.points[hi] - traj.points[hi - 1], traj.points[hi - 1]);
}

/// max_k ||x(k * time_step) - x_k||.
inline double trajectory_vs_iterates(const Trajectory& traj, const std::vector<Vector>& iterates, double time_step) {
    require_positive_step(time_step, "trajectory_vs_iterates");
    double worst = 0.0;
    for (std::size_t k = 0; k < iterates.size(); ++k) {
        const double t = static_cast<double>(k) * time_step;
        worst = std::max(worst, distance(sample_at(traj, t), iterates[k]));
    }
    return worst;
}

/// Trapezoidal estimate of the integral of ||z'(t)||^2 over the trajectory.
inline double integral_of_squared_speed(const Trajectory& traj) {
    double total = 0.0;
    for (std::size_t i = 1; i < traj.times.size(); ++i) {
        const double a = traj.dz_norm[i - 1];
        const double b = traj.dz_norm[i];
        total += 0.5 * (a * a + b * b) * (traj.times[i] - traj.times[i - 1]);
    }
    return total;
}

/// log2(||e(h) - e(h/2)|| / ||e(h/2) - e(h/4)||) for an endpoint map e.
inline double self_convergence_order(const std::function<Vector(double)>& endpoint, double h) {
    const Vector e1 = endpoint(h);
    const Vector e2 = endpoint(h / 2.0);
    const Vector e4 = endpoint(h / 4.0);
    return std::log2(distance(e1, e2) / distance(e2, e4));
}

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    if (traj.points.empty()) return;
    const std::size_t n = traj.points.front().size();
    const bool with_speed = traj.dz_norm.size() == traj.points.size();
    out << 't';
    for (std::size_t i = 1; i <= n; ++i) out << ",x" << i;
    if (with_speed) out << ",dz_norm";
    out << '\n';
    std::ostringstream line;
    line << std::setprecision(17);
    for (std::size_t r = 0; r < traj.points.size(); ++r) {
        line.str({});
        line << traj.times[r];
        for (std::size_t i = 0; i < n; ++i) line << ',' << traj.points[r][i];
        if (with_speed) line << ',' << traj.dz_norm[r];
        out << line.str() << '\n';
    }
}

} // namespace monosplit
