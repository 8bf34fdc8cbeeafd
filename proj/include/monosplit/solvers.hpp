#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "linear_map.hpp"
#include "operators.hpp"
#include "vector.hpp"

namespace monosplit {

enum class Method {
    gradient,
    prox_point,
    dr,
    shadow_dr,
    double_forward_dr,
    frb,
    pdhg,
    shadow_pd,
    reflected_pg,
};

inline constexpr std::array<std::pair<Method, std::string_view>, 9> method_names{{
    {Method::gradient, "gradient"},
    {Method::prox_point, "prox-point"},
    {Method::dr, "dr"},
    {Method::shadow_dr, "shadow-dr"},
    {Method::double_forward_dr, "double-forward-dr"},
    {Method::frb, "frb"},
    {Method::pdhg, "pdhg"},
    {Method::shadow_pd, "shadow-pd"},
    {Method::reflected_pg, "reflected-pg"},
}};

inline std::string_view method_name(Method m) {
    for (const auto& [method, name] : method_names)
        if (method == m) return name;
    return "unknown";
}

inline std::optional<Method> parse_method(std::string_view name) {
    for (const auto& [method, n] : method_names)
        if (n == name) return method;
    return std::nullopt;
}

inline bool is_primal_dual(Method m) { return m == Method::pdhg || m == Method::shadow_pd; }

struct SolverConfig {
    double lambda = 1.0;
    double tau = 1.0;
    double sigma = 1.0;
    double epsilon = 1e-2;
    std::size_t max_iters = 100000;
    double tol = 1e-8;
    /// Permit step sizes outside the proven ranges (exploratory sweeps).
    bool unsafe_stepsize = false;
};

/// Largest epsilon <= 1e-2 for which [eps, (1 - 3 eps)/(3L)] is nonempty
/// with room to spare.
inline double default_epsilon(double lipschitz) {
    return std::min(1e-2, 0.5 / (3.0 * lipschitz + 3.0));
}

/// 0.99 * (1 - 3 eps) / (3L), or 1 when B = 0.
inline double default_lambda(double lipschitz, double epsilon) {
    if (lipschitz <= 0.0) return 1.0;
    return 0.99 * (1.0 - 3.0 * epsilon) / (3.0 * lipschitz);
}

/// Iterate bundle shared by every method. Optional members are only present
/// for the methods that use them.
struct SolverState {
    std::size_t k = 0;
    Vector x_curr;
    Vector x_prev;
    /// B(x_prev), bit-identical to a fresh evaluation at x_prev.
    std::optional<Vector> b_prev;
    /// Douglas-Rachford governing variable (DR), or x_k + lambda B(x_{k-1}) (shadow-DR).
    std::optional<Vector> z_curr;
    std::optional<Vector> z_prev;
    std::optional<Vector> u_curr, u_prev;
    std::optional<Vector> v_curr, v_prev;
};

/// Thrown when a step produces a non-finite iterate; carries the last finite state.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, SolverState last)
        : std::runtime_error(what), last_(std::move(last)) {}
    const SolverState& last_state() const { return last_; }

private:
    SolverState last_;
};

namespace detail {

template <class F>
SolverState guarded_step(const SolverState& s, const char* name, F&& body) {
    try {
        return body();
    } catch (const NonFiniteError&) {
        throw DivergenceError(std::string(name) + ": non-finite iterate", s);
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// State for the primal methods. x_{-1} defaults to x0, so the first
/// correction term of the reflected methods vanishes.
inline SolverState init_primal(const Vector& x0, const ForwardOp* b = nullptr,
                               std::optional<Vector> x_minus1 = std::nullopt) {
    Vector xm = x_minus1 ? std::move(*x_minus1) : x0;
    require_same_dim(x0, xm);
    SolverState s{0, x0, xm, std::nullopt, std::nullopt, std::nullopt, {}, {}, {}, {}};
    if (b) s.b_prev = (*b)(s.x_prev);
    return s;
}

/// Shadow-DR state; also records z_0 = x_0 + lambda B(x_{-1}).
inline SolverState init_shadow_dr(const Vector& x0, const ForwardOp& b, double lambda,
                                  std::optional<Vector> x_minus1 = std::nullopt) {
    SolverState s = init_primal(x0, &b, std::move(x_minus1));
    s.z_curr = axpy(lambda, *s.b_prev, s.x_curr);
    return s;
}

/// DR state from the governing variable z_0; x_curr holds the shadow J_{lambda B}(z_0).
inline SolverState init_dr(const Vector& z0, const ResolventOp& b, double lambda) {
    Vector shadow = b(lambda, z0);
    SolverState s{0, shadow, shadow, std::nullopt, z0, std::nullopt, {}, {}, {}, {}};
    return s;
}

/// Primal-dual state; x_curr holds the stacked pair (u, v).
inline SolverState init_pd(const Vector& u0, const Vector& v0) {
    Vector stacked = Vector::stack(u0, v0);
    SolverState s{0, stacked, stacked, std::nullopt, std::nullopt, std::nullopt, u0, u0, v0, v0};
    return s;
}

// ---------------------------------------------------------------------------
// Primal steps
// ---------------------------------------------------------------------------

/// x_{k+1} = x_k - lambda B(x_k)
inline SolverState step_gradient(const SolverState& s, const ForwardOp& b, double lambda) {
    require_positive_step(lambda, "step_gradient");
    return detail::guarded_step(s, "gradient", [&] {
        Vector bx = b(s.x_curr);
        Vector next = axpy(-lambda, bx, s.x_curr);
        return SolverState{s.k + 1, std::move(next), s.x_curr, std::move(bx), {}, {}, {}, {}, {}, {}};
    });
}

/// x_{k+1} = J_{lambda A}(x_k - lambda B(x_k)); projected gradient when A = N_C.
inline SolverState step_forward_backward(const SolverState& s, const ResolventOp& a, const ForwardOp& b,
                                         double lambda) {
    require_positive_step(lambda, "step_forward_backward");
    return detail::guarded_step(s, "forward-backward", [&] {
        Vector bx = b(s.x_curr);
        Vector next = a(lambda, axpy(-lambda, bx, s.x_curr));
        return SolverState{s.k + 1, std::move(next), s.x_curr, std::move(bx), {}, {}, {}, {}, {}, {}};
    });
}

/// x_{k+1} = J_{lambda A}(x_k)
inline SolverState step_proximal_point(const SolverState& s, const ResolventOp& a, double lambda) {
    require_positive_step(lambda, "step_proximal_point");
    return detail::guarded_step(s, "prox-point", [&] {
        Vector next = a(lambda, s.x_curr);
        return SolverState{s.k + 1, std::move(next), s.x_curr, {}, {}, {}, {}, {}, {}, {}};
    });
}

/// z_{k+1} = z_k + J_{lambda A}(2 J_{lambda B} z_k - z_k) - J_{lambda B} z_k.
///
/// Requires x_curr == J_{lambda B}(z_curr) (as set up by init_dr); the new
/// state carries the shadow J_{lambda B}(z_{k+1}) in x_curr.
inline SolverState step_dr(const SolverState& s, const ResolventOp& a, const ResolventOp& b, double lambda) {
    require_positive_step(lambda, "step_dr");
    if (!s.z_curr) throw std::logic_error("step_dr: state has no governing variable z");
    return detail::guarded_step(s, "dr", [&] {
        const Vector& z = *s.z_curr;
        const Vector& shadow = s.x_curr;
        Vector z_next = z + a(lambda, axpy(2.0, shadow, -z)) - shadow;
        Vector shadow_next = b(lambda, z_next);
        return SolverState{s.k + 1, std::move(shadow_next), shadow, {}, std::move(z_next), z, {}, {}, {}, {}};
    });
}

/// x_{k+1} = J_{lambda A}(x_k - lambda B(x_k)) - lambda (B(x_k) - B(x_{k-1})).
///
/// One evaluation of B and one resolvent per step; b_prev is reused from
/// the previous step.
inline SolverState step_shadow_dr(const SolverState& s, const ResolventOp& a, const ForwardOp& b,
                                  double lambda) {
    require_positive_step(lambda, "step_shadow_dr");
    if (!s.b_prev) throw std::logic_error("step_shadow_dr: state has no cached B(x_prev)");
    return detail::guarded_step(s, "shadow-dr", [&] {
        Vector bx = b(s.x_curr);
        Vector forward = s.x_curr - lambda * bx;
        Vector next = a(lambda, forward) - lambda * (bx - *s.b_prev);
        Vector z_next = axpy(lambda, bx, next);
        return SolverState{s.k + 1, std::move(next), s.x_curr, std::move(bx), std::move(z_next), s.z_curr,
                           {}, {}, {}, {}};
    });
}

/// Implicit scheme x_{k+1} = J_{lambda A}(x_k - lambda B(x_k)) - lambda (B(x_{k+1}) - B(x_k)),
/// solved as x_{k+1} = J_{lambda B}(w) with w = J_{lambda A}(x_k - lambda B(x_k)) + lambda B(x_k)
/// by fixed-point inner iteration. z_curr holds (I + lambda B) x_k.
inline SolverState step_double_forward_dr(const SolverState& s, const ResolventOp& a, const ForwardOp& b,
                                          double lambda) {
    require_positive_step(lambda, "step_double_forward_dr");
    return detail::guarded_step(s, "double-forward-dr", [&] {
        Vector bx = b(s.x_curr);
        Vector w = a(lambda, axpy(-lambda, bx, s.x_curr)) + lambda * bx;
        Vector next = fixed_point_resolvent(b, lambda, w, s.x_curr);
        Vector z_prev = axpy(lambda, bx, s.x_curr);
        Vector z_next = axpy(lambda, b(next), next);
        return SolverState{s.k + 1, std::move(next), s.x_curr, std::move(bx), std::move(z_next),
                           std::move(z_prev), {}, {}, {}, {}};
    });
}

/// Forward-reflected-backward:
/// x_{k+1} = J_{lambda A}(x_k - lambda B(x_k) - lambda (B(x_k) - B(x_{k-1}))).
inline SolverState step_frb(const SolverState& s, const ResolventOp& a, const ForwardOp& b, double lambda) {
    require_positive_step(lambda, "step_frb");
    if (!s.b_prev) throw std::logic_error("step_frb: state has no cached B(x_prev)");
    return detail::guarded_step(s, "frb", [&] {
        Vector bx = b(s.x_curr);
        Vector next = a(lambda, s.x_curr - lambda * bx - lambda * (bx - *s.b_prev));
        return SolverState{s.k + 1, std::move(next), s.x_curr, std::move(bx), {}, {}, {}, {}, {}, {}};
    });
}

/// Reflected projected gradient: x_{k+1} = P_C(x_k - lambda B(2 x_k - x_{k-1})).
inline SolverState step_reflected_pg(const SolverState& s, const ResolventOp& project, const ForwardOp& b,
                                     double lambda) {
    require_positive_step(lambda, "step_reflected_pg");
    return detail::guarded_step(s, "reflected-pg", [&] {
        Vector reflected = axpy(2.0, s.x_curr, -s.x_prev);
        Vector next = project(lambda, axpy(-lambda, b(reflected), s.x_curr));
        return SolverState{s.k + 1, std::move(next), s.x_curr, {}, {}, {}, {}, {}, {}, {}};
    });
}

// ---------------------------------------------------------------------------
// Primal-dual steps for min_u max_v g(u) + <Ku, v> - f*(v)
// ---------------------------------------------------------------------------

namespace detail {

inline SolverState pd_state(const SolverState& s, Vector u_next, Vector v_next) {
    Vector stacked = Vector::stack(u_next, v_next);
    return SolverState{s.k + 1, std::move(stacked), s.x_curr, {}, {}, {},
                       std::move(u_next), s.u_curr, std::move(v_next), s.v_curr};
}

inline void require_pd(const SolverState& s, const LinearMap& k, double tau, double sigma) {
    if (!s.u_curr || !s.v_curr) throw std::logic_error("primal-dual step on a state without (u, v)");
    if (s.u_curr->size() != k.cols() || s.v_curr->size() != k.rows())
        throw DimensionError("primal-dual step: (u, v) dimensions do not match K");
    require_positive_step(tau, "primal-dual tau");
    require_positive_step(sigma, "primal-dual sigma");
}

} // namespace detail

/// u_{k+1} = prox_{tau g}(u_k - tau K^* v_k)
/// v_{k+1} = prox_{sigma f*}(v_k + sigma K(2u_{k+1} - u_k))
inline SolverState step_pdhg(const SolverState& s, const ResolventOp& g_prox, const ResolventOp& fstar_prox,
                             const LinearMap& k, double tau, double sigma) {
    detail::require_pd(s, k, tau, sigma);
    return detail::guarded_step(s, "pdhg", [&] {
        const Vector& u = *s.u_curr;
        const Vector& v = *s.v_curr;
        Vector u_next = g_prox(tau, axpy(-tau, k.adjoint_apply(v), u));
        Vector v_next = fstar_prox(sigma, axpy(sigma, k.apply(axpy(2.0, u_next, -u)), v));
        return detail::pd_state(s, std::move(u_next), std::move(v_next));
    });
}

/// u_{k+1} = prox_{tau g}(u_k - tau K^* v_k)
/// v_{k+1} = prox_{sigma f*}(v_k + sigma K u_{k+1}) + sigma (K u_{k+1} - K u_k)
inline SolverState step_shadow_pd(const SolverState& s, const ResolventOp& g_prox, const ResolventOp& fstar_prox,
                                  const LinearMap& k, double tau, double sigma) {
    detail::require_pd(s, k, tau, sigma);
    return detail::guarded_step(s, "shadow-pd", [&] {
        const Vector& u = *s.u_curr;
        const Vector& v = *s.v_curr;
        Vector u_next = g_prox(tau, axpy(-tau, k.adjoint_apply(v), u));
        Vector ku_next = k.apply(u_next);
        Vector v_next = fstar_prox(sigma, axpy(sigma, ku_next, v)) + sigma * (ku_next - k.apply(u));
        return detail::pd_state(s, std::move(u_next), std::move(v_next));
    });
}

enum class ArrowHurwiczVariant {
    /// v_{k+1} uses K u_k: explicit gradient descent-ascent.
    simultaneous,
    /// v_{k+1} uses K u_{k+1}: shadow-PD with its correction term removed.
    sequential,
};

/// Unreflected primal-dual update (no extrapolation, no correction).
inline SolverState step_arrow_hurwicz(const SolverState& s, const ResolventOp& g_prox,
                                      const ResolventOp& fstar_prox, const LinearMap& k, double tau,
                                      double sigma, ArrowHurwiczVariant variant) {
    detail::require_pd(s, k, tau, sigma);
    return detail::guarded_step(s, "arrow-hurwicz", [&] {
        const Vector& u = *s.u_curr;
        const Vector& v = *s.v_curr;
        Vector u_next = g_prox(tau, axpy(-tau, k.adjoint_apply(v), u));
        const Vector& coupled = variant == ArrowHurwiczVariant::sequential ? u_next : u;
        Vector v_next = fstar_prox(sigma, axpy(sigma, k.apply(coupled), v));
        return detail::pd_state(s, std::move(u_next), std::move(v_next));
    });
}

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

/// Fixed-point residual of the last completed step:
/// ||z_{k+1} - z_k|| for DR, max(||du||, ||dv||) for primal-dual methods,
/// ||x_{k+1} - x_k|| / lambda otherwise.
inline double residual(Method m, const SolverState& s, const SolverConfig& cfg) {
    if (s.k == 0) throw std::logic_error("residual: no completed step");
    if (m == Method::dr) return distance(*s.z_curr, *s.z_prev);
    if (is_primal_dual(m)) return std::max(distance(*s.u_curr, *s.u_prev), distance(*s.v_curr, *s.v_prev));
    return distance(s.x_curr, s.x_prev) / cfg.lambda;
}

} // namespace monosplit
