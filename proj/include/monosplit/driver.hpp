#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "diagnostics.hpp"
#include "problems.hpp"
#include "solvers.hpp"

namespace monosplit {

struct IncompatibleError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct StepSizeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Termination { converged, max_iters, diverged };

inline std::string_view termination_name(Termination t) {
    switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iters: return "max-iters";
    case Termination::diverged: return "diverged";
    }
    return "unknown";
}

/// Iterate norm beyond this multiple of max(1, ||x_0||) is declared divergence.
inline constexpr double divergence_factor = 1e6;

struct RunOptions {
    std::optional<Vector> x0;
    std::optional<Vector> x_minus1;
    /// Record wall time per iteration; off by default so traces are reproducible.
    bool timing = false;
};

struct RunResult {
    SolverState final_state;
    std::vector<TraceRecord> trace;
    Termination termination = Termination::max_iters;
    std::size_t iterations = 0;
    std::optional<double> final_residual;
};

/// Returns an empty string when `m` can run on `p`, else the reason.
inline std::string compatibility_error(Method m, const ProblemInstance& p) {
    const bool saddle = p.saddle.has_value();
    if (is_primal_dual(m) != saddle) return "incompatible method/problem";
    switch (m) {
    case Method::dr:
        if (!p.b_resolvent) return "incompatible method/problem";
        break;
    case Method::prox_point:
        if (!((p.a.is_identity() && p.b_resolvent && p.b_resolvent_matches_forward) || (p.b && p.b->is_zero())))
            return "incompatible method/problem";
        break;
    case Method::pdhg:
    case Method::shadow_pd:
        break;
    default:
        if (!p.b) return "incompatible method/problem";
    }
    return {};
}

/// Step-size conditions under which each method is proven to converge.
/// With cfg.unsafe_stepsize only positivity and the inner-solve contraction
/// of the double-forward scheme are enforced.
inline std::vector<std::string> step_size_errors(Method m, const ProblemInstance& p, const SolverConfig& cfg) {
    std::vector<std::string> errs;
    const double lip = p.lipschitz();
    if (is_primal_dual(m)) {
        if (!(cfg.tau > 0.0)) errs.emplace_back("tau must be positive");
        if (!(cfg.sigma > 0.0)) errs.emplace_back("sigma must be positive");
        if (errs.empty() && p.saddle && !cfg.unsafe_stepsize) {
            const double kn = p.saddle->k.norm_bound();
            if (!(cfg.tau * cfg.sigma * kn * kn < 1.0)) errs.emplace_back("tau*sigma*||K||^2 must be < 1");
        }
        return errs;
    }
    if (!(cfg.lambda > 0.0) || !std::isfinite(cfg.lambda)) {
        errs.emplace_back("lambda must be positive");
        return errs;
    }
    if (!(cfg.epsilon > 0.0)) errs.emplace_back("epsilon must be positive");
    if (m == Method::double_forward_dr && !(cfg.lambda * lip < 1.0))
        errs.emplace_back("double-forward-dr requires lambda*L < 1");
    if (cfg.unsafe_stepsize || lip == 0.0) return errs;
    if (m == Method::shadow_dr) {
        const double upper = (1.0 - 3.0 * cfg.epsilon) / (3.0 * lip);
        if (cfg.lambda < cfg.epsilon || cfg.lambda > upper) {
            std::ostringstream msg;
            msg << "shadow-dr requires lambda in [epsilon, (1-3*epsilon)/(3L)] = [" << cfg.epsilon << ", " << upper
                << "]";
            errs.push_back(msg.str());
        }
    }
    if (m == Method::frb && !(cfg.lambda * lip < 0.5)) errs.emplace_back("frb requires lambda < 1/(2L)");
    return errs;
}

namespace detail {

inline SolverState initial_state(Method m, const ProblemInstance& p, const SolverConfig& cfg,
                                 const RunOptions& opt) {
    const Vector x0 = opt.x0 ? *opt.x0 : p.x0;
    switch (m) {
    case Method::shadow_dr:
        return init_shadow_dr(x0, *p.b, cfg.lambda, opt.x_minus1);
    case Method::frb:
    case Method::gradient:
    case Method::double_forward_dr:
        return init_primal(x0, &*p.b, opt.x_minus1);
    case Method::reflected_pg:
    case Method::prox_point:
        return init_primal(x0, nullptr, opt.x_minus1);
    case Method::dr: {
        // z_0 = x_0 + lambda B(x_0) so that the shadow J_{lambda B}(z_0) is x_0.
        Vector z0 = p.b_resolvent_matches_forward && p.b ? axpy(cfg.lambda, (*p.b)(x0), x0) : x0;
        return init_dr(z0, *p.b_resolvent, cfg.lambda);
    }
    case Method::pdhg:
    case Method::shadow_pd: {
        const std::size_t n = p.saddle->k.cols();
        return init_pd(x0.head(n), x0.tail(p.saddle->k.rows()));
    }
    }
    throw std::logic_error("unknown method");
}

inline SolverState advance(Method m, const SolverState& s, const ProblemInstance& p, const SolverConfig& cfg) {
    switch (m) {
    case Method::gradient:
        if (p.a.is_identity()) return step_gradient(s, *p.b, cfg.lambda);
        return step_forward_backward(s, p.a, *p.b, cfg.lambda);
    case Method::prox_point:
        if (p.b && p.b->is_zero()) return step_proximal_point(s, p.a, cfg.lambda);
        return step_proximal_point(s, *p.b_resolvent, cfg.lambda);
    case Method::dr: return step_dr(s, p.a, *p.b_resolvent, cfg.lambda);
    case Method::shadow_dr: return step_shadow_dr(s, p.a, *p.b, cfg.lambda);
    case Method::double_forward_dr: return step_double_forward_dr(s, p.a, *p.b, cfg.lambda);
    case Method::frb: return step_frb(s, p.a, *p.b, cfg.lambda);
    case Method::reflected_pg: return step_reflected_pg(s, p.a, *p.b, cfg.lambda);
    case Method::pdhg:
        return step_pdhg(s, p.saddle->g_prox, p.saddle->fstar_prox, p.saddle->k, cfg.tau, cfg.sigma);
    case Method::shadow_pd:
        return step_shadow_pd(s, p.saddle->g_prox, p.saddle->fstar_prox, p.saddle->k, cfg.tau, cfg.sigma);
    }
    throw std::logic_error("unknown method");
}

} // namespace detail

/// Runs `m` on `p` until the method residual drops to cfg.tol (converged),
/// the iterate norm exceeds divergence_factor * max(1, ||x_0||) or becomes
/// non-finite (diverged), or cfg.max_iters steps are taken.
///
/// Row 0 of the trace describes the initial state. Lyapunov and step-inequality
/// columns are filled for shadow-DR (and the primal-dual Lyapunov for
/// shadow-PD) only when the problem carries a certified solution.
inline RunResult run(Method m, const ProblemInstance& p, const SolverConfig& cfg, const RunOptions& opt = {}) {
    if (auto err = compatibility_error(m, p); !err.empty()) throw IncompatibleError(err);
    if (auto errs = step_size_errors(m, p, cfg); !errs.empty()) throw StepSizeError(errs.front());

    const bool certified = p.solution.has_value();
    std::optional<SolutionPair> pair;
    if (certified && m == Method::shadow_dr) pair = solution_pair(p, cfg.lambda);

    auto row_for = [&](const SolverState& prev, const SolverState& s, std::optional<double> res) {
        TraceRecord r;
        r.k = s.k;
        r.residual = res;
        if (certified) r.dist_to_solution = distance(s.x_curr, *p.solution);
        if (pair) {
            r.lyapunov = lyapunov_value(s, *pair, cfg.lambda);
            if (s.k > 0) r.lemma3_slack = lemma3_slack(prev, s, *pair, cfg.lambda);
        }
        if (m == Method::shadow_pd && certified)
            r.lyapunov = pd_lyapunov(*s.u_curr, *s.v_curr, *p.saddle, cfg.tau, cfg.sigma);
        if (s.k > 0) {
            r.step_norm_x = distance(s.x_curr, s.x_prev);
            if (s.z_curr && s.z_prev) r.step_norm_z = distance(*s.z_curr, *s.z_prev);
        }
        return r;
    };

    RunResult result{detail::initial_state(m, p, cfg, opt), {}, Termination::max_iters, 0, std::nullopt};
    result.trace.push_back(row_for(result.final_state, result.final_state, std::nullopt));
    const double threshold = divergence_factor * std::max(1.0, norm(result.final_state.x_curr));

    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        std::optional<SolverState> next;
        try {
            next = detail::advance(m, result.final_state, p, cfg);
        } catch (const DivergenceError& e) {
            result.final_state = e.last_state();
            result.termination = Termination::diverged;
            return result;
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double res = residual(m, *next, cfg);
        TraceRecord row = row_for(result.final_state, *next, res);
        if (opt.timing) row.wall_nanos = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
        result.trace.push_back(row);
        result.final_state = std::move(*next);
        result.iterations = k;
        result.final_residual = res;
        if (norm(result.final_state.x_curr) > threshold) {
            result.termination = Termination::diverged;
            return result;
        }
        if (res <= cfg.tol) {
            result.termination = Termination::converged;
            return result;
        }
    }
    return result;
}

} // namespace monosplit
