#pragma once

#include "kbures/common.hpp"

#include <array>
#include <vector>

namespace kb {

constexpr int sym_size(int d) { return d * (d + 1) / 2; }

// Upper-triangle enumeration of a symmetric matrix, row-major:
// (0,0),(0,1),...,(0,d-1),(1,1),... weight is 1 on the diagonal and
// sqrt(2) off it, so that packing is an isometry for the Frobenius norm.
struct SymIndex {
    int i, j;
    double w;
};
const std::vector<SymIndex>& sym_index(int d);

// Isometric packing into out[0..sym_size(d)) and its inverse.
void sym_pack(const Mat& A, double* out);
Mat sym_unpack(const double* in, int d);

struct SymEigen {
    Vec values;  // descending
    Mat vectors; // orthonormal columns; A = V diag(values) V^T
};

// Spectral decomposition of a small symmetric matrix. Throws input errors
// on non-finite entries or a gross violation of the symmetry invariant.
SymEigen sym_eigen(const Mat& A);

enum class SpectralFn { Sqrt, Log, Exp, Inv };

// V f(diag) V^T. log and inv require a positive-definite input and throw a
// domain error carrying lambda_min otherwise; sqrt clamps eigenvalues above
// -1e-10 * max(1, lambda_max) to zero and rejects anything more negative.
Mat psd_apply_fn(const Mat& P, SpectralFn fn);

// Unique symmetric U with P U + U P = 2 Xi; P must be positive-definite.
Mat lyapunov_solve(const Mat& P, const Mat& Xi);

// Unique PSD X with X P0 X = P1, computed as
// P0^{-1/2} (P0^{1/2} P1 P0^{1/2})^{1/2} P0^{-1/2}; P0 positive-definite.
Mat riccati_solve(const Mat& P0, const Mat& P1);

// Nearest PSD matrix in Frobenius norm (negative eigenvalues clamped).
Mat psd_project(const Mat& A);

} // namespace kb
