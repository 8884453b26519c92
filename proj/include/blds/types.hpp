#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace blds {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised for invalid configuration (bad dimensions, out-of-range knobs).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when operand shapes do not agree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Base class for failures of the numerics themselves.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A state or product left the finite range. `index` is the time step or
/// product depth at which this was detected.
class InstabilityError : public NumericalError {
public:
    InstabilityError(const std::string& what, Index index) : NumericalError(what), index_(index) {}
    [[nodiscard]] Index index() const noexcept { return index_; }

private:
    Index index_;
};

class UnscalableMatrixError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class RankDeficiencyError : public NumericalError {
public:
    RankDeficiencyError(const std::string& what, Index observed_rank)
        : NumericalError(what), rank_(observed_rank) {}
    [[nodiscard]] Index observed_rank() const noexcept { return rank_; }

private:
    Index rank_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

inline void require_config(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

}  // namespace detail

/// State, input and output dimensions.
struct Dims {
    int n = 1;
    int p = 1;
    int m = 1;

    void validate() const {
        detail::require_config(n > 0 && p > 0 && m > 0, "dimensions must be strictly positive");
    }

    friend bool operator==(const Dims&, const Dims&) = default;
};

/// Parameters of x_{t+1} = (A_0 + sum_k u_k A_k) x_t + B u_t + w_t,
/// y_t = C x_t + D u_t + z_t.
struct SystemParams {
    std::vector<Matrix> A;  // A[0] drift, A[1..p] bilinear terms
    Matrix B;
    Matrix C;
    Matrix D;
    Dims dims;

    void validate() const {
        dims.validate();
        const auto [n, p, m] = dims;
        detail::require(A.size() == static_cast<std::size_t>(p) + 1,
                        "SystemParams: expected p+1 transition matrices, got " + std::to_string(A.size()));
        for (const auto& Ak : A) {
            detail::require(Ak.rows() == n && Ak.cols() == n, "SystemParams: A_k must be n x n");
            detail::require(Ak.allFinite(), "SystemParams: non-finite entry in A_k");
        }
        detail::require(B.rows() == n && B.cols() == p, "SystemParams: B must be n x p");
        detail::require(C.rows() == m && C.cols() == n, "SystemParams: C must be m x n");
        detail::require(D.rows() == m && D.cols() == p, "SystemParams: D must be m x p");
        detail::require(B.allFinite() && C.allFinite() && D.allFinite(), "SystemParams: non-finite entry");
    }

    /// The input-dependent transition u o A = A_0 + sum_k u_k A_k.
    template <typename Derived>
    [[nodiscard]] Matrix transition(const Eigen::MatrixBase<Derived>& u) const {
        Matrix M = A[0];
        for (int k = 0; k < dims.p; ++k) M.noalias() += u(k) * A[static_cast<std::size_t>(k) + 1];
        return M;
    }
};

}  // namespace blds
