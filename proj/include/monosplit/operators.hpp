#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "linear_map.hpp"
#include "vector.hpp"

namespace monosplit {

struct OperatorValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct LinearSolveError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ContractionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_positive_step(double lambda, const char* what) {
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument(std::string(what) + ": step must be positive");
}

// ---------------------------------------------------------------------------
// Elementary resolvents
// ---------------------------------------------------------------------------

/// Componentwise sign(w) * max(|w| - kappa, 0).
inline Vector soft_threshold(const Vector& w, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("soft_threshold: kappa must be positive");
    Eigen::VectorXd out = w.eigen();
    for (auto& e : out) {
        const double mag = std::abs(e) - kappa;
        e = mag > 0.0 ? std::copysign(mag, e) : 0.0;
    }
    return Vector(std::move(out));
}

inline Vector project_box(const Vector& w, const Vector& lo, const Vector& hi) {
    require_same_dim(w, lo);
    require_same_dim(w, hi);
    if ((lo.eigen().array() > hi.eigen().array()).any())
        throw std::invalid_argument("project_box: lo > hi");
    return Vector(Eigen::VectorXd(w.eigen().cwiseMax(lo.eigen()).cwiseMin(hi.eigen())));
}

/// Projection onto {x : <normal, x> = offset}.
inline Vector project_hyperplane(const Vector& w, const Vector& normal, double offset) {
    require_same_dim(w, normal);
    const double nn = squared_norm(normal);
    if (nn == 0.0) throw std::invalid_argument("project_hyperplane: zero normal");
    return axpy(-(inner(normal, w) - offset) / nn, normal, w);
}

namespace detail {

/// LU factorizations of I + lambda*M, one per distinct lambda.
class ShiftedLuCache {
public:
    explicit ShiftedLuCache(Eigen::MatrixXd m) : m_(std::move(m)) {}

    Eigen::VectorXd solve(double lambda, const Eigen::VectorXd& rhs) const {
        const Eigen::PartialPivLU<Eigen::MatrixXd>* lu = nullptr;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(lambda);
            if (it == cache_.end()) {
                Eigen::MatrixXd shifted = lambda * m_;
                shifted.diagonal().array() += 1.0;
                it = cache_.emplace(lambda, Eigen::PartialPivLU<Eigen::MatrixXd>(shifted)).first;
            }
            lu = &it->second;
        }
        Eigen::VectorXd x = lu->solve(rhs);
        // residual check of (I + lambda M) x = rhs
        const Eigen::VectorXd r = x + lambda * (m_ * x) - rhs;
        if (!x.allFinite() || r.norm() > 1e-10 * std::max(rhs.norm(), 1e-300) + 1e-300)
            throw LinearSolveError("linear resolvent: residual check failed");
        return x;
    }

    const Eigen::MatrixXd& matrix() const { return m_; }

private:
    Eigen::MatrixXd m_;
    mutable std::mutex mutex_;
    mutable std::map<double, Eigen::PartialPivLU<Eigen::MatrixXd>> cache_;
};

inline void require_monotone_matrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols()) throw DimensionError("monotone linear operator must be square");
    const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
        throw OperatorValidationError("linear operator is not monotone (M + M^T not PSD)");
}

} // namespace detail

/// Solves (I + lambda*M) x = w by dense LU with a residual check.
inline Vector resolvent_of_linear(const LinearMap& m, double lambda, const Vector& w) {
    require_positive_step(lambda, "resolvent_of_linear");
    detail::require_monotone_matrix(m.matrix());
    if (w.size() != m.cols()) throw DimensionError("resolvent_of_linear: dimension mismatch");
    return Vector(detail::ShiftedLuCache(m.matrix()).solve(lambda, w.eigen()));
}

// ---------------------------------------------------------------------------
// ResolventOp
// ---------------------------------------------------------------------------

/// A maximally monotone operator A, accessed only through J_{lambda A}.
class ResolventOp {
public:
    using Evaluator = std::function<Vector(double lambda, const Vector& w)>;

    ResolventOp(std::string name, Evaluator eval, bool identity = false)
        : name_(std::move(name)), eval_(std::move(eval)), identity_(identity) {}

    Vector operator()(double lambda, const Vector& w) const {
        require_positive_step(lambda, "resolvent");
        if (identity_) return w;
        return eval_(lambda, w);
    }

    /// R_{lambda A} = 2 J_{lambda A} - id
    Vector reflect(double lambda, const Vector& w) const {
        return axpy(2.0, (*this)(lambda, w), -w);
    }

    const std::string& name() const { return name_; }
    /// True for A = 0, whose resolvent is the identity.
    bool is_identity() const { return identity_; }

private:
    std::string name_;
    Evaluator eval_;
    bool identity_ = false;
};

inline ResolventOp zero_resolvent() {
    return ResolventOp("zero", [](double, const Vector& w) { return w; }, true);
}

/// Resolvent of the subdifferential of mu*||.||_1.
inline ResolventOp l1_resolvent(double mu) {
    if (mu < 0.0) throw std::invalid_argument("l1_resolvent: mu must be nonnegative");
    if (mu == 0.0) return zero_resolvent();
    return ResolventOp("soft-threshold",
                       [mu](double lambda, const Vector& w) { return soft_threshold(w, lambda * mu); });
}

/// Normal cone of the box [lo, hi]; resolvent is the projection for every lambda.
inline ResolventOp box_resolvent(Vector lo, Vector hi) {
    require_same_dim(lo, hi);
    if ((lo.eigen().array() > hi.eigen().array()).any())
        throw std::invalid_argument("box_resolvent: lo > hi");
    return ResolventOp("box", [lo = std::move(lo), hi = std::move(hi)](double, const Vector& w) {
        return project_box(w, lo, hi);
    });
}

inline ResolventOp hyperplane_resolvent(Vector normal, double offset) {
    if (squared_norm(normal) == 0.0) throw std::invalid_argument("hyperplane_resolvent: zero normal");
    return ResolventOp("hyperplane", [normal = std::move(normal), offset](double, const Vector& w) {
        return project_hyperplane(w, normal, offset);
    });
}

/// Resolvent of the monotone linear operator x -> Mx. Monotonicity of M is
/// checked exactly (eigenvalues of the symmetric part) at construction.
inline ResolventOp linear_resolvent(const LinearMap& m, std::string name = "linear-monotone") {
    detail::require_monotone_matrix(m.matrix());
    auto cache = std::make_shared<const detail::ShiftedLuCache>(m.matrix());
    const std::size_t n = m.cols();
    return ResolventOp(std::move(name), [cache, n](double lambda, const Vector& w) {
        if (w.size() != n) throw DimensionError("linear resolvent: dimension mismatch");
        return Vector(cache->solve(lambda, w.eigen()));
    });
}

/// prox of lambda * (1/2)||. - center||^2, i.e. (w + lambda*center) / (1 + lambda).
inline ResolventOp quadratic_prox(Vector center) {
    return ResolventOp("quadratic", [center = std::move(center)](double lambda, const Vector& w) {
        return (1.0 / (1.0 + lambda)) * axpy(lambda, center, w);
    });
}

// ---------------------------------------------------------------------------
// ForwardOp
// ---------------------------------------------------------------------------

/// B(x) = M x + c.
struct AffineForm {
    LinearMap matrix;
    Vector offset;
};

/// A single-valued monotone operator B with declared Lipschitz constant L.
///
/// Construction validates monotonicity and the declared L on 100 seeded
/// random pairs; a violation is an OperatorValidationError.
class ForwardOp {
public:
    using Evaluator = std::function<Vector(const Vector&)>;

    ForwardOp(std::string name, std::size_t dim, Evaluator eval, double lipschitz,
              std::optional<AffineForm> affine = std::nullopt, bool is_zero = false)
        : name_(std::move(name)), dim_(dim), eval_(std::move(eval)), lipschitz_(lipschitz),
          affine_(std::move(affine)), is_zero_(is_zero) {
        if (dim_ < 1) throw DimensionError("forward operator dimension must be >= 1");
        if (!(lipschitz_ >= 0.0) || !std::isfinite(lipschitz_))
            throw std::invalid_argument("forward operator: Lipschitz constant must be finite and >= 0");
        if (affine_) {
            detail::require_monotone_matrix(affine_->matrix.matrix());
            lu_ = std::make_shared<const detail::ShiftedLuCache>(affine_->matrix.matrix());
        }
        validate(100, 0x5eed);
    }

    Vector operator()(const Vector& x) const {
        if (x.size() != dim_) throw DimensionError("forward operator: dimension mismatch");
        return eval_(x);
    }

    const std::string& name() const { return name_; }
    std::size_t dim() const { return dim_; }
    double lipschitz() const { return lipschitz_; }
    const std::optional<AffineForm>& affine() const { return affine_; }
    bool is_zero() const { return is_zero_; }

    /// J_{lambda B}(z) by a direct dense solve; only for affine B.
    Vector direct_resolvent(double lambda, const Vector& z) const {
        require_positive_step(lambda, "direct_resolvent");
        if (!affine_) throw std::logic_error("direct_resolvent requires an affine operator");
        if (z.size() != dim_) throw DimensionError("direct_resolvent: dimension mismatch");
        return Vector(lu_->solve(lambda, z.eigen() - lambda * affine_->offset.eigen()));
    }

    /// Checks monotonicity and the declared Lipschitz bound on random pairs.
    void validate(int pairs, std::uint64_t seed) const {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss;
        const auto n = static_cast<Eigen::Index>(dim_);
        for (int p = 0; p < pairs; ++p) {
            Eigen::VectorXd a(n), b(n);
            for (auto& e : a) e = gauss(rng);
            for (auto& e : b) e = gauss(rng);
            const Vector va(a), vb(b);
            const Vector diff = va - vb;
            const Vector bdiff = (*this)(va) - (*this)(vb);
            const double dd = squared_norm(diff);
            if (inner(bdiff, diff) < -1e-10 * std::max(1.0, dd))
                throw OperatorValidationError("operator '" + name_ + "' is not monotone");
            if (norm(bdiff) > (lipschitz_ + 1e-8) * std::sqrt(dd) * (1.0 + 1e-12))
                throw OperatorValidationError("operator '" + name_ +
                                              "' violates its declared Lipschitz constant");
        }
    }

private:
    std::string name_;
    std::size_t dim_;
    Evaluator eval_;
    double lipschitz_;
    std::optional<AffineForm> affine_;
    std::shared_ptr<const detail::ShiftedLuCache> lu_;
    bool is_zero_ = false;
};

/// Affine operator x -> Mx + c with L = ||M|| (exact spectral norm).
inline ForwardOp affine_forward(std::string name, LinearMap m, std::optional<Vector> offset = std::nullopt) {
    if (m.rows() != m.cols()) throw DimensionError("affine_forward: matrix must be square");
    const std::size_t n = m.cols();
    Vector c = offset ? *offset : Vector::zeros(n);
    if (c.size() != n) throw DimensionError("affine_forward: offset dimension mismatch");
    const double lip = m.spectral_norm();
    const bool zero = m.matrix().isZero(0.0) && c.eigen().isZero(0.0);
    auto mat = std::make_shared<const Eigen::MatrixXd>(m.matrix());
    auto off = std::make_shared<const Eigen::VectorXd>(c.eigen());
    return ForwardOp(
        std::move(name), n,
        [mat, off](const Vector& x) { return Vector(Eigen::VectorXd(*mat * x.eigen() + *off)); },
        lip, AffineForm{std::move(m), std::move(c)}, zero);
}

inline ForwardOp zero_forward(std::size_t dim) {
    return affine_forward("zero", LinearMap::zero(dim, dim));
}

/// Coordinate-pair rotation B(x) = (x2, -x1, x4, -x3, ...), L = 1.
inline ForwardOp skew_operator(std::size_t dim) {
    if (dim == 0 || dim % 2 != 0) throw std::invalid_argument("skew_operator: dim must be even");
    const auto n = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; i += 2) {
        m(i, i + 1) = 1.0;
        m(i + 1, i) = -1.0;
    }
    return affine_forward("skew", LinearMap(std::move(m)));
}

/// Gradient of (1/2) dist(x, H)^2 for the hyperplane H = {<n,x> = offset};
/// that is x - P_H(x). Monotone and 1-Lipschitz.
inline ForwardOp hyperplane_distance_gradient(const Vector& normal, double offset) {
    const double nn = squared_norm(normal);
    if (nn == 0.0) throw std::invalid_argument("hyperplane_distance_gradient: zero normal");
    Eigen::MatrixXd m = normal.eigen() * normal.eigen().transpose() / nn;
    Vector c = (-offset / nn) * normal;
    return affine_forward("hyperplane-distance", LinearMap(std::move(m)), std::move(c));
}

/// J_{lambda B}(z) by the fixed-point iteration x <- z - lambda B(x).
///
/// Contractive when lambda*L < 1; stops once successive iterates differ by
/// at most tol * max(1, ||x||).
inline Vector fixed_point_resolvent(const ForwardOp& b, double lambda, const Vector& z,
                                    std::optional<Vector> warm_start = std::nullopt,
                                    double tol = 1e-14, int max_inner = 100000) {
    require_positive_step(lambda, "fixed_point_resolvent");
    if (!(lambda * b.lipschitz() < 1.0))
        throw ContractionError("fixed_point_resolvent: lambda * L must be < 1");
    Vector x = warm_start ? *warm_start : z;
    for (int it = 0; it < max_inner; ++it) {
        Vector next = axpy(-lambda, b(x), z);
        const double step = distance(next, x);
        x = std::move(next);
        if (step <= tol * std::max(1.0, norm(x))) return x;
    }
    throw ContractionError("fixed_point_resolvent: inner iteration did not converge");
}

/// Wraps J_{lambda B} of an affine forward operator as a ResolventOp.
inline ResolventOp resolvent_of_forward(const ForwardOp& b) {
    if (b.is_zero()) return zero_resolvent();
    if (!b.affine()) throw std::logic_error("resolvent_of_forward requires an affine operator");
    return ResolventOp(b.name(), [b](double lambda, const Vector& z) { return b.direct_resolvent(lambda, z); });
}

} // namespace monosplit
