#pragma once

#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "problems.hpp"
#include "solvers.hpp"
#include "vector.hpp"

namespace monosplit {

struct MissingCertificateError : std::logic_error {
    using std::logic_error::logic_error;
};

/// One row of a run trace. Empty optionals are written as empty CSV fields.
struct TraceRecord {
    std::size_t k = 0;
    std::optional<double> residual;
    std::optional<double> lyapunov;
    std::optional<double> lemma3_slack;
    std::optional<double> dist_to_solution;
    std::optional<double> step_norm_x;
    std::optional<double> step_norm_z;
    std::optional<std::int64_t> wall_nanos;
};

/// (x, y) with x in zer(A + B) and y = lambda B(x) in -lambda A(x).
struct SolutionPair {
    Vector x;
    Vector y;
};

inline SolutionPair solution_pair(const ProblemInstance& p, double lambda) {
    if (!p.solution) throw MissingCertificateError("problem has no certified solution");
    if (!p.b) throw MissingCertificateError("problem has no forward operator");
    return {*p.solution, lambda * (*p.b)(*p.solution)};
}

/// V_k = ||z_k - z||^2 + (1/3)||x_k - x_{k-1}||^2 with z_k = x_k + lambda B(x_{k-1}), z = x + y.
inline double lyapunov_value(const SolverState& s, const SolutionPair& sol, double lambda) {
    if (!s.b_prev) throw std::logic_error("lyapunov_value: state has no cached B(x_prev)");
    const Vector zk = axpy(lambda, *s.b_prev, s.x_curr);
    const Vector z = sol.x + sol.y;
    return squared_norm(zk - z) + squared_norm(s.x_curr - s.x_prev) / 3.0;
}

/// Right side minus left side of
///   ||(x_{k+1} + y_k) - (x + y)||^2 <= ||(x_k + y_{k-1}) - (x + y)||^2 - 2<y_k - y, x_k - x>
///       + 4<y_k - y_{k-1}, x_k - x_{k+1}> - ||x_{k+1} - x_k||^2 - 3||y_k - y_{k-1}||^2
/// for consecutive shadow-DR states, with y_k = lambda B(x_k).
inline double lemma3_slack(const SolverState& before, const SolverState& after, const SolutionPair& sol,
                           double lambda) {
    if (!before.b_prev || !after.b_prev) throw std::logic_error("lemma3_slack: states lack cached B values");
    const Vector& xk = before.x_curr;
    const Vector& xk1 = after.x_curr;
    const Vector yk = lambda * *after.b_prev;
    const Vector ykm1 = lambda * *before.b_prev;
    const Vector target = sol.x + sol.y;
    const Vector dy = yk - ykm1;
    const Vector dx = xk1 - xk;
    const double lhs = squared_norm((xk1 + yk) - target);
    const double rhs = squared_norm((xk + ykm1) - target) - 2.0 * inner(yk - sol.y, xk - sol.x) -
                       4.0 * inner(dy, dx) - squared_norm(dx) - 3.0 * squared_norm(dy);
    return rhs - lhs;
}

/// (1/tau)||u - u*||^2 + (1/sigma)||(v - sigma K u) - (v* - sigma K u*)||^2,
/// non-increasing along shadow-PD iterates.
inline double pd_lyapunov(const Vector& u, const Vector& v, const SaddleData& saddle, double tau, double sigma) {
    const Vector shifted = axpy(-sigma, saddle.k.apply(u), v);
    const Vector shifted_star = axpy(-sigma, saddle.k.apply(saddle.u_star), saddle.v_star);
    return squared_norm(u - saddle.u_star) / tau + squared_norm(shifted - shifted_star) / sigma;
}

// ---------------------------------------------------------------------------
// CSV trace
// ---------------------------------------------------------------------------

inline constexpr const char* trace_csv_header = "k,residual,lyapunov,lemma3_slack,dist,step_x,step_z,wall_nanos";

namespace detail {

inline void write_field(std::ostream& out, const std::optional<double>& v) {
    if (v) {
        std::ostringstream s;
        s << std::setprecision(17) << *v;
        out << s.str();
    }
}

} // namespace detail

inline void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
    out << trace_csv_header << '\n';
    for (const auto& r : trace) {
        out << r.k << ',';
        detail::write_field(out, r.residual);
        out << ',';
        detail::write_field(out, r.lyapunov);
        out << ',';
        detail::write_field(out, r.lemma3_slack);
        out << ',';
        detail::write_field(out, r.dist_to_solution);
        out << ',';
        detail::write_field(out, r.step_norm_x);
        out << ',';
        detail::write_field(out, r.step_norm_z);
        out << ',';
        if (r.wall_nanos) out << *r.wall_nanos;
        out << '\n';
    }
}

} // namespace monosplit
