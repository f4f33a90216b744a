#pragma once

#include "assoc/model.hpp"

namespace assoc {

// Largest condition number accepted before a symmetric matrix is treated as
// singular.
inline constexpr double kConditionLimit = 1e12;

// Eigenvalue-based 2-norm condition number of a symmetric matrix; +inf when
// the smallest eigenvalue is <= 0.
double spd_condition(const Matrix& a);

// Inverse of a symmetric positive definite matrix. Throws
// IdentifiabilityError (with `what` prefixed) when the matrix is not PD or its
// condition number exceeds cond_limit. Never falls back to a pseudo-inverse.
Matrix inverse_spd(const Matrix& a, const char* what, double cond_limit = kConditionLimit);

// Symmetric inverse square root A^{-1/2} of a PD matrix.
Matrix inverse_sqrt_spd(const Matrix& a, const char* what);

// Numerical rank via column-pivoted QR with relative tolerance.
Index numerical_rank(const Matrix& a, double rel_tol = 1e-10);

// max_i sum_j |a_ij|
double norm_inf(const Matrix& a);

}  // namespace assoc
