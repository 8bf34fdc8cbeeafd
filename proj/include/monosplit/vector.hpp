#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace monosplit {

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NonFiniteError : std::domain_error {
    using std::domain_error::domain_error;
};

/// A point of a finite-dimensional real Hilbert space.
///
/// Dimension is at least one and every entry is finite; both are checked on
/// construction, so every Vector produced by the library satisfies them.
class Vector {
public:
    explicit Vector(Eigen::VectorXd data) : data_(std::move(data)) { validate(); }

    Vector(std::initializer_list<double> values)
        : data_(static_cast<Eigen::Index>(values.size())) {
        Eigen::Index i = 0;
        for (double v : values) data_[i++] = v;
        validate();
    }

    explicit Vector(const std::vector<double>& values)
        : data_(Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                  static_cast<Eigen::Index>(values.size()))) {
        validate();
    }

    static Vector zeros(std::size_t n) {
        return Vector(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
    }

    static Vector constant(std::size_t n, double value) {
        return Vector(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), value));
    }

    std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
    double operator[](std::size_t i) const { return data_[static_cast<Eigen::Index>(i)]; }

    const Eigen::VectorXd& eigen() const { return data_; }

    std::vector<double> to_std() const { return {data_.data(), data_.data() + data_.size()}; }

    /// Concatenation (u, v) of two points, used for product spaces.
    static Vector stack(const Vector& a, const Vector& b) {
        Eigen::VectorXd out(a.data_.size() + b.data_.size());
        out << a.data_, b.data_;
        return Vector(std::move(out));
    }

    Vector head(std::size_t n) const {
        if (n > size()) throw DimensionError("head: length exceeds dimension");
        return Vector(Eigen::VectorXd(data_.head(static_cast<Eigen::Index>(n))));
    }
    Vector tail(std::size_t n) const {
        if (n > size()) throw DimensionError("tail: length exceeds dimension");
        return Vector(Eigen::VectorXd(data_.tail(static_cast<Eigen::Index>(n))));
    }

    friend bool operator==(const Vector& a, const Vector& b) {
        return a.data_.size() == b.data_.size() && (a.data_.array() == b.data_.array()).all();
    }

private:
    void validate() const {
        if (data_.size() < 1) throw DimensionError("vector dimension must be at least 1");
        if (!data_.allFinite()) throw NonFiniteError("vector has non-finite entries");
    }

    Eigen::VectorXd data_;
};

inline void require_same_dim(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) {
        std::ostringstream msg;
        msg << "dimension mismatch: " << a.size() << " vs " << b.size();
        throw DimensionError(msg.str());
    }
}

inline double inner(const Vector& a, const Vector& b) {
    require_same_dim(a, b);
    return a.eigen().dot(b.eigen());
}

inline double norm(const Vector& a) { return a.eigen().norm(); }

inline double squared_norm(const Vector& a) { return a.eigen().squaredNorm(); }

/// alpha * a + b
inline Vector axpy(double alpha, const Vector& a, const Vector& b) {
    require_same_dim(a, b);
    return Vector(Eigen::VectorXd(alpha * a.eigen() + b.eigen()));
}

inline Vector operator+(const Vector& a, const Vector& b) {
    require_same_dim(a, b);
    return Vector(Eigen::VectorXd(a.eigen() + b.eigen()));
}

inline Vector operator-(const Vector& a, const Vector& b) {
    require_same_dim(a, b);
    return Vector(Eigen::VectorXd(a.eigen() - b.eigen()));
}

inline Vector operator-(const Vector& a) { return Vector(Eigen::VectorXd(-a.eigen())); }

inline Vector operator*(double alpha, const Vector& a) {
    return Vector(Eigen::VectorXd(alpha * a.eigen()));
}

inline double distance(const Vector& a, const Vector& b) {
    require_same_dim(a, b);
    return (a.eigen() - b.eigen()).norm();
}

inline std::string to_string(const Vector& a) {
    std::ostringstream out;
    out.precision(17);
    out << '(';
    for (std::size_t i = 0; i < a.size(); ++i) out << (i ? ", " : "") << a[i];
    out << ')';
    return out.str();
}

} // namespace monosplit
