#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "linear_map.hpp"
#include "operators.hpp"
#include "vector.hpp"

namespace monosplit {

struct CertificationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Data of min_u max_v g(u) + <Ku, v> - f*(v) with quadratic g and f*.
struct SaddleData {
    LinearMap k;
    ResolventOp g_prox;
    ResolventOp fstar_prox;
    Vector u_star;
    Vector v_star;
    Vector u0;
    Vector v0;
};

/// A monotone inclusion 0 in A(x) + B(x) together with a certified solution.
///
/// Saddle problems are also represented in this form on the product space:
/// A = (dg, df*), B(u, v) = (K^T v, -K u).
struct ProblemInstance {
    std::string family;
    ResolventOp a;
    std::optional<ForwardOp> b;
    /// J_{lambda B} for methods with two backward steps (DR, proximal point).
    std::optional<ResolventOp> b_resolvent;
    /// True when b_resolvent is the resolvent of b itself.
    bool b_resolvent_matches_forward = false;
    std::optional<SaddleData> saddle;
    /// A certified point of zer(A + B).
    std::optional<Vector> solution;
    bool unique_solution = true;
    Vector x0;
    std::uint64_t seed = 0;

    std::size_t dim() const { return x0.size(); }
    double lipschitz() const { return b ? b->lipschitz() : 0.0; }
};

/// ||x - J_{lambda A}(x - lambda B(x))||; zero exactly on zer(A + B).
inline double inclusion_residual(const Vector& x, const ProblemInstance& p, double lambda) {
    require_positive_step(lambda, "inclusion_residual");
    const Vector forward = p.b ? axpy(-lambda, (*p.b)(x), x) : x;
    return distance(x, p.a(lambda, forward));
}

namespace detail {

inline Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> gauss;
    Eigen::VectorXd v(n);
    for (auto& e : v) e = gauss(rng);
    return v;
}

inline Eigen::MatrixXd gaussian_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
    return m;
}

inline Vector unit_start(std::mt19937_64& rng, std::size_t n) {
    Eigen::VectorXd v = gaussian_vector(rng, static_cast<Eigen::Index>(n));
    return Vector(Eigen::VectorXd(v / v.norm()));
}

inline void certify(const ProblemInstance& p) {
    if (!p.solution) throw CertificationError(p.family + ": no designated solution");
    const double r = inclusion_residual(*p.solution, p, 1.0);
    if (!(r <= 1e-8))
        throw CertificationError(p.family + ": designated solution has inclusion residual " + std::to_string(r));
}

} // namespace detail

// ---------------------------------------------------------------------------
// Box-constrained linear VI oracle
// ---------------------------------------------------------------------------

/// Solves 0 in N_[lo,hi](x) + Mx + c by enumerating every face of the box
/// (3^n assignments of lower / upper / free per coordinate) and checking the
/// KKT conditions on each candidate. Returns the first certified point.
inline std::optional<Vector> box_face_search(const Eigen::MatrixXd& m, const Eigen::VectorXd& c,
                                             const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    const Eigen::Index n = m.rows();
    if (n > 12) throw std::invalid_argument("box_face_search: dimension too large for enumeration");
    const double scale = std::max({1.0, m.cwiseAbs().maxCoeff(), c.cwiseAbs().maxCoeff(),
                                   lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff()});
    const double tol = 1e-10 * scale;
    std::vector<int> face(static_cast<std::size_t>(n), 0); // 0 free, 1 at lo, 2 at hi
    long long total = 1;
    for (Eigen::Index i = 0; i < n; ++i) total *= 3;
    for (long long code = 0; code < total; ++code) {
        long long rest = code;
        std::vector<Eigen::Index> free_idx;
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            face[static_cast<std::size_t>(i)] = static_cast<int>(rest % 3);
            rest /= 3;
            const int f = face[static_cast<std::size_t>(i)];
            if (f == 0) free_idx.push_back(i);
            else x[i] = f == 1 ? lo[i] : hi[i];
        }
        if (!free_idx.empty()) {
            const auto nf = static_cast<Eigen::Index>(free_idx.size());
            Eigen::MatrixXd mff(nf, nf);
            Eigen::VectorXd rhs(nf);
            for (Eigen::Index r = 0; r < nf; ++r) {
                const Eigen::Index i = free_idx[static_cast<std::size_t>(r)];
                double fixed = c[i];
                for (Eigen::Index j = 0; j < n; ++j)
                    if (face[static_cast<std::size_t>(j)] != 0) fixed += m(i, j) * x[j];
                rhs[r] = -fixed;
                for (Eigen::Index s = 0; s < nf; ++s) mff(r, s) = m(i, free_idx[static_cast<std::size_t>(s)]);
            }
            Eigen::VectorXd xf = mff.completeOrthogonalDecomposition().solve(rhs);
            if ((mff * xf - rhs).norm() > tol) continue;
            for (Eigen::Index r = 0; r < nf; ++r) x[free_idx[static_cast<std::size_t>(r)]] = xf[r];
        }
        const Eigen::VectorXd g = m * x + c;
        bool ok = true;
        for (Eigen::Index i = 0; i < n && ok; ++i) {
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) ok = false;
            const int f = face[static_cast<std::size_t>(i)];
            if (f == 0 && std::abs(g[i]) > tol) ok = false;
            if (lo[i] == hi[i]) continue;
            if (f == 1 && g[i] < -tol) ok = false;
            if (f == 2 && g[i] > tol) ok = false;
        }
        if (ok) return Vector(Eigen::VectorXd(x.cwiseMax(lo).cwiseMin(hi)));
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// skew-vi
// ---------------------------------------------------------------------------

enum class ViConstraint { none, box, hyperplane };
enum class ViOperator { skew, linear_monotone };

struct SkewViOptions {
    ViConstraint constraint = ViConstraint::none;
    double box_lo = -1.0;
    double box_hi = 1.0;
    ViOperator op = ViOperator::skew;
};

/// Monotone linear VI 0 in A(x) + Bx with B a scaled random skew map.
///
/// For dim = 2 the skew map is exactly scale * [[0, 1], [-1, 0]]. Larger
/// dimensions use Q diag(w_i J) Q^T with Q random orthogonal, w_1 = 1 and
/// w_i uniform in [0.5, 1], so L = scale. The linear-monotone variant adds a
/// small PSD part; its L is the exact spectral norm.
inline ProblemInstance make_skew_vi(std::size_t dim, double scale, std::uint64_t seed,
                                    const SkewViOptions& opts = {}) {
    if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("make_skew_vi: dim must be even");
    if (scale < 0.0) throw std::invalid_argument("make_skew_vi: scale must be nonnegative");
    std::mt19937_64 rng(seed);
    const auto n = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    if (dim == 2) {
        m << 0.0, 1.0, -1.0, 0.0;
    } else {
        std::uniform_real_distribution<double> unif(0.5, 1.0);
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; i += 2) {
            const double w = i == 0 ? 1.0 : unif(rng);
            d(i, i + 1) = w;
            d(i + 1, i) = -w;
        }
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(detail::gaussian_matrix(rng, n, n));
        Eigen::MatrixXd q = qr.householderQ();
        m = q * d * q.transpose();
        m = 0.5 * (m - m.transpose()); // exact skew symmetry
    }
    if (opts.op == ViOperator::linear_monotone) {
        Eigen::MatrixXd g = detail::gaussian_matrix(rng, n, n);
        Eigen::MatrixXd psd = g.transpose() * g;
        m += 0.1 * psd / LinearMap::exact_spectral_norm(psd);
    }
    m *= scale;

    ProblemInstance p{
        "skew-vi",
        zero_resolvent(),
        scale == 0.0 ? zero_forward(dim)
                     : affine_forward(opts.op == ViOperator::skew ? "skew" : "linear-monotone", LinearMap(m)),
        std::nullopt,
        true,
        std::nullopt,
        std::nullopt,
        true,
        detail::unit_start(rng, dim),
        seed,
    };
    p.b_resolvent = resolvent_of_forward(*p.b);

    switch (opts.constraint) {
    case ViConstraint::none:
        if (scale == 0.0) {
            p.solution = Vector::zeros(dim);
            p.unique_solution = false;
        } else {
            p.solution = Vector::zeros(dim);
        }
        break;
    case ViConstraint::hyperplane: {
        Vector normal(detail::gaussian_vector(rng, n));
        p.a = hyperplane_resolvent(normal, 0.0);
        p.solution = Vector::zeros(dim);
        p.unique_solution = scale != 0.0 && opts.op == ViOperator::linear_monotone;
        break;
    }
    case ViConstraint::box: {
        if (opts.box_lo > opts.box_hi) throw std::invalid_argument("make_skew_vi: box_lo > box_hi");
        const Vector lo = Vector::constant(dim, opts.box_lo);
        const Vector hi = Vector::constant(dim, opts.box_hi);
        p.a = box_resolvent(lo, hi);
        if (scale == 0.0) {
            p.solution = project_box(Vector::zeros(dim), lo, hi);
            p.unique_solution = opts.box_lo == opts.box_hi;
        } else if (opts.box_lo <= 0.0 && opts.box_hi >= 0.0) {
            p.solution = Vector::zeros(dim);
        } else {
            p.solution = box_face_search(m, Eigen::VectorXd::Zero(n), lo.eigen(), hi.eigen());
            if (!p.solution) throw CertificationError("make_skew_vi: no solution found on the box faces");
        }
        break;
    }
    }
    detail::certify(p);
    return p;
}

// ---------------------------------------------------------------------------
// composite-l1
// ---------------------------------------------------------------------------

/// Independent oracle for min (1/2)||Mx - b||^2 + mu ||x||_1: a long proximal
/// gradient run with step 1/L, then an exact solve on the detected support
/// with sign pattern fixed, kept when it satisfies the optimality conditions.
inline Eigen::VectorXd lasso_oracle(const Eigen::MatrixXd& mtm, const Eigen::VectorXd& mtb, double mu,
                                    double tol = 1e-12, int max_iters = 200000) {
    const Eigen::Index n = mtm.cols();
    const double lip = LinearMap::exact_spectral_norm(mtm);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (lip == 0.0) return x;
    const double step = 1.0 / lip;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd w = x - step * (mtm * x - mtb);
        Eigen::VectorXd next = w;
        for (auto& e : next) {
            const double mag = std::abs(e) - step * mu;
            e = mag > 0.0 ? std::copysign(mag, e) : 0.0;
        }
        const double d = (next - x).norm();
        x = std::move(next);
        if (d <= tol * std::max(1.0, x.norm())) break;
    }
    // polish on the support
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i)
        if (std::abs(x[i]) > 1e-9) support.push_back(i);
    if (support.empty()) return x;
    const auto ns = static_cast<Eigen::Index>(support.size());
    Eigen::MatrixXd mss(ns, ns);
    Eigen::VectorXd rhs(ns);
    for (Eigen::Index r = 0; r < ns; ++r) {
        const Eigen::Index i = support[static_cast<std::size_t>(r)];
        rhs[r] = mtb[i] - mu * (x[i] > 0 ? 1.0 : -1.0);
        for (Eigen::Index s = 0; s < ns; ++s) mss(r, s) = mtm(i, support[static_cast<std::size_t>(s)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(mss);
    if (!lu.isInvertible()) return x;
    const Eigen::VectorXd xs = lu.solve(rhs);
    Eigen::VectorXd polished = Eigen::VectorXd::Zero(n);
    for (Eigen::Index r = 0; r < ns; ++r) {
        const Eigen::Index i = support[static_cast<std::size_t>(r)];
        if ((xs[r] > 0) != (x[i] > 0)) return x;
        polished[i] = xs[r];
    }
    const Eigen::VectorXd grad = mtm * polished - mtb;
    for (Eigen::Index i = 0; i < n; ++i)
        if (polished[i] == 0.0 && std::abs(grad[i]) > mu * (1.0 + 1e-9)) return x;
    return polished;
}

/// min (1/2)||Mx - b||^2 + mu ||x||_1 as A = d(mu ||.||_1), B = M^T M x - M^T b.
inline ProblemInstance make_composite_from(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs, double mu,
                                           std::uint64_t seed = 0) {
    if (design.rows() != rhs.size()) throw DimensionError("make_composite_from: rhs size mismatch");
    if (mu < 0.0) throw std::invalid_argument("make_composite_from: mu must be nonnegative");
    const Eigen::MatrixXd mtm = design.transpose() * design;
    const Eigen::VectorXd mtb = design.transpose() * rhs;
    const auto n = static_cast<std::size_t>(design.cols());
    std::mt19937_64 rng(seed ^ 0xc0ffeeULL);
    ProblemInstance p{
        "composite-l1",
        l1_resolvent(mu),
        affine_forward("least-squares-gradient", LinearMap(mtm), Vector(Eigen::VectorXd(-mtb))),
        std::nullopt,
        true,
        std::nullopt,
        Vector(lasso_oracle(mtm, mtb, mu)),
        true,
        detail::unit_start(rng, n),
        seed,
    };
    p.b_resolvent = resolvent_of_forward(*p.b);
    detail::certify(p);
    return p;
}

/// Random m x n design with entries N(0, 1/m), a planted sparse signal with
/// density `sparsity`, and observations with 1e-2 Gaussian noise.
inline ProblemInstance make_composite(std::size_t m, std::size_t n, double sparsity, double mu, std::uint64_t seed) {
    if (m < 1 || n < 1) throw std::invalid_argument("make_composite: m, n must be >= 1");
    if (sparsity < 0.0 || sparsity > 1.0) throw std::invalid_argument("make_composite: sparsity must be in [0, 1]");
    std::mt19937_64 rng(seed);
    const auto rows = static_cast<Eigen::Index>(m);
    const auto cols = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd design = detail::gaussian_matrix(rng, rows, cols) / std::sqrt(static_cast<double>(m));
    std::bernoulli_distribution keep(sparsity);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd planted = Eigen::VectorXd::Zero(cols);
    for (auto& e : planted) e = keep(rng) ? gauss(rng) : 0.0;
    Eigen::VectorXd rhs = design * planted + 1e-2 * detail::gaussian_vector(rng, rows);
    return make_composite_from(design, rhs, mu, seed);
}

// ---------------------------------------------------------------------------
// bilinear-saddle
// ---------------------------------------------------------------------------

/// Saddle problem with g(u) = (1/2)||u - a||^2 and f*(v) = (1/2)||v - c||^2.
/// The saddle point solves (u - a) + K^T v = 0, (v - c) - K u = 0 directly.
inline ProblemInstance make_saddle_from(LinearMap k, Vector a, Vector c, Vector u0, Vector v0,
                                        std::uint64_t seed = 0) {
    const auto n = static_cast<Eigen::Index>(k.cols());
    const auto m = static_cast<Eigen::Index>(k.rows());
    if (a.size() != k.cols() || u0.size() != k.cols() || c.size() != k.rows() || v0.size() != k.rows())
        throw DimensionError("make_saddle_from: dimensions do not match K");
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Identity(n + m, n + m);
    kkt.topRightCorner(n, m) = k.matrix().transpose();
    kkt.bottomLeftCorner(m, n) = -k.matrix();
    Eigen::VectorXd rhs(n + m);
    rhs << a.eigen(), c.eigen();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) throw CertificationError("make_saddle: singular KKT system");
    const Eigen::VectorXd sol = lu.solve(rhs);

    Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(n + m, n + m);
    coupling.topRightCorner(n, m) = k.matrix().transpose();
    coupling.bottomLeftCorner(m, n) = -k.matrix();

    ResolventOp g_prox = quadratic_prox(a);
    ResolventOp f_prox = quadratic_prox(c);
    const auto nu = static_cast<std::size_t>(n);
    const auto nv = static_cast<std::size_t>(m);
    ResolventOp stacked("saddle-prox", [g_prox, f_prox, nu, nv](double lambda, const Vector& w) {
        if (w.size() != nu + nv) throw DimensionError("saddle-prox: dimension mismatch");
        return Vector::stack(g_prox(lambda, w.head(nu)), f_prox(lambda, w.tail(nv)));
    });

    Vector u_star(Eigen::VectorXd(sol.head(n)));
    Vector v_star(Eigen::VectorXd(sol.tail(m)));
    ProblemInstance p{
        "bilinear-saddle",
        std::move(stacked),
        affine_forward("saddle-coupling", LinearMap(coupling)),
        std::nullopt,
        true,
        SaddleData{std::move(k), std::move(g_prox), std::move(f_prox), u_star, v_star, u0, v0},
        Vector::stack(u_star, v_star),
        true,
        Vector::stack(u0, v0),
        seed,
    };
    p.b_resolvent = resolvent_of_forward(*p.b);
    detail::certify(p);
    return p;
}

/// Random K (m x n, entries N(0, 1/m)), centers a, c and start (u0, v0).
inline ProblemInstance make_saddle(std::size_t n, std::size_t m, std::uint64_t seed) {
    if (n < 1 || m < 1) throw std::invalid_argument("make_saddle: n, m must be >= 1");
    std::mt19937_64 rng(seed);
    const auto cols = static_cast<Eigen::Index>(n);
    const auto rows = static_cast<Eigen::Index>(m);
    LinearMap k(Eigen::MatrixXd(detail::gaussian_matrix(rng, rows, cols) / std::sqrt(static_cast<double>(m))));
    Vector a(detail::gaussian_vector(rng, cols));
    Vector c(detail::gaussian_vector(rng, rows));
    Vector u0(detail::gaussian_vector(rng, cols));
    Vector v0(detail::gaussian_vector(rng, rows));
    return make_saddle_from(std::move(k), std::move(a), std::move(c), std::move(u0), std::move(v0), seed);
}

// ---------------------------------------------------------------------------
// feasibility
// ---------------------------------------------------------------------------

/// Find x in H1 cap H2 for hyperplanes H_i = {<n_i, x> = o_i}.
///
/// A = N_{H1}. For two-backward methods B = N_{H2} (projection resolvent);
/// forward methods use B = x - P_{H2}(x), the gradient of (1/2) dist(., H2)^2,
/// which has the same zeros together with A whenever H1 cap H2 is nonempty.
inline ProblemInstance make_feasibility_from(const Vector& n1, double o1, const Vector& n2, double o2,
                                             const Vector& planted, const Vector& x0, std::uint64_t seed = 0) {
    require_same_dim(n1, n2);
    require_same_dim(n1, planted);
    ProblemInstance p{
        "feasibility",
        hyperplane_resolvent(n1, o1),
        hyperplane_distance_gradient(n2, o2),
        hyperplane_resolvent(n2, o2),
        false,
        std::nullopt,
        planted,
        false,
        x0,
        seed,
    };
    const auto e1 = n1.eigen().normalized();
    const auto e2 = n2.eigen().normalized();
    p.unique_solution = n1.size() == 2 && std::abs(std::abs(e1.dot(e2)) - 1.0) > 1e-12;
    detail::certify(p);
    return p;
}

/// Two random hyperplanes through a planted Gaussian point.
inline ProblemInstance make_feasibility(std::size_t dim, std::uint64_t seed) {
    if (dim < 2) throw std::invalid_argument("make_feasibility: dim must be >= 2");
    std::mt19937_64 rng(seed);
    const auto n = static_cast<Eigen::Index>(dim);
    Vector planted(detail::gaussian_vector(rng, n));
    Vector n1(detail::gaussian_vector(rng, n));
    Vector n2(detail::gaussian_vector(rng, n));
    Vector x0(Eigen::VectorXd(planted.eigen() + detail::gaussian_vector(rng, n)));
    return make_feasibility_from(n1, inner(n1, planted), n2, inner(n2, planted), planted, x0, seed);
}

/// The x-axis (A) and the line y = x (B) in R^2; intersection {0}.
inline ProblemInstance make_two_lines() {
    return make_feasibility_from(Vector{0.0, 1.0}, 0.0, Vector{1.0, -1.0}, 0.0, Vector{0.0, 0.0},
                                 Vector{1.0, 0.0});
}

} // namespace monosplit
