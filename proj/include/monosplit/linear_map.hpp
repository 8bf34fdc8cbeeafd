#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include <Eigen/Dense>

#include "vector.hpp"

namespace monosplit {

/// Dense bounded linear map K : R^cols -> R^rows with its adjoint.
///
/// The cached norm bound is the largest singular value inflated by 1e-6
/// relative, so it dominates the true spectral norm.
class LinearMap {
public:
    static constexpr double norm_inflation = 1.0 + 1e-6;

    explicit LinearMap(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
        if (matrix_.rows() < 1 || matrix_.cols() < 1)
            throw DimensionError("linear map needs at least one row and column");
        if (!matrix_.allFinite()) throw NonFiniteError("linear map has non-finite entries");
        spectral_norm_ = exact_spectral_norm(matrix_);
        norm_bound_ = spectral_norm_ * norm_inflation;
    }

    static LinearMap identity(std::size_t n) {
        const auto k = static_cast<Eigen::Index>(n);
        return LinearMap(Eigen::MatrixXd::Identity(k, k));
    }

    static LinearMap zero(std::size_t rows, std::size_t cols) {
        return LinearMap(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows),
                                               static_cast<Eigen::Index>(cols)));
    }

    std::size_t rows() const { return static_cast<std::size_t>(matrix_.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(matrix_.cols()); }
    const Eigen::MatrixXd& matrix() const { return matrix_; }

    /// Upper bound on ||K|| used to enforce step-size conditions.
    double norm_bound() const { return norm_bound_; }
    /// Largest singular value from a dense SVD.
    double spectral_norm() const { return spectral_norm_; }

    Vector apply(const Vector& u) const {
        if (u.size() != cols()) throw DimensionError("linear map: input dimension mismatch");
        return Vector(Eigen::VectorXd(matrix_ * u.eigen()));
    }

    Vector adjoint_apply(const Vector& v) const {
        if (v.size() != rows()) throw DimensionError("linear map: adjoint input dimension mismatch");
        return Vector(Eigen::VectorXd(matrix_.transpose() * v.eigen()));
    }

    static double exact_spectral_norm(const Eigen::MatrixXd& m) {
        if (m.isZero(0.0)) return 0.0;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
        return svd.singularValues()(0);
    }

private:
    Eigen::MatrixXd matrix_;
    double spectral_norm_ = 0.0;
    double norm_bound_ = 0.0;
};

/// Power iteration on K^T K from a seeded Gaussian start.
///
/// Returns sqrt of the final Rayleigh quotient, inflated by 1 + 1e-6.
/// Deterministic for a given seed; a zero map yields 0.
inline double operator_norm_estimate(const LinearMap& k, int iters, std::uint64_t seed) {
    if (iters < 1) throw std::invalid_argument("operator_norm_estimate: iters must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd v(static_cast<Eigen::Index>(k.cols()));
    for (auto& e : v) e = gauss(rng);
    v.normalize();
    const auto& m = k.matrix();
    for (int it = 0; it < iters; ++it) {
        Eigen::VectorXd w = m.transpose() * (m * v);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        v = w / nw;
    }
    return (m * v).norm() * LinearMap::norm_inflation;
}

} // namespace monosplit
