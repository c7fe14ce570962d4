#pragma once

#include "kbures/measure.hpp"

#include <utility>
#include <vector>

namespace kb {

// Bures distance between PSD matrices of equal size,
// 2 * sqrt(Tr P0 + Tr P1 - 2 Tr((sqrt(P0) P1 sqrt(P0))^{1/2})).
// The factor 2 relative to the textbook convention matches the transport
// normalization; the test suite validates this form against brute-force
// path optimization before using it as an oracle.
double bures_distance(const Mat& P0, const Mat& P1);

// ((1-t) I + t X) P0 ((1-t) I + t X) with X the Riccati solution X P0 X = P1.
Mat bures_geodesic_point(const Mat& P0, const Mat& P1, double t);

// Spatially constant endpoint pair A0, A1 with reference measure G*;
// encodes the family g(A) = A G* A.
struct ConstantPair {
    Mat A0, A1;
    MatrixMeasure Gstar;
};

// sqrt(4 * sum_cells Tr(G*_cell (A1-A0)^2) * cell_volume); requires the
// commuting flag |A0 A1 - A1 A0| <= 1e-12 |A0||A1| (precondition error).
double commuting_distance(const ConstantPair& pair);

// Per-cell value (t A1 + (1-t) A0) G*_cell (t A1 + (1-t) A0).
MatrixMeasure commuting_geodesic_point(const ConstantPair& pair, double t);

// ((1-t)^2 G, 2 sqrt(mass)).
std::pair<MatrixMeasure, double> geodesic_to_zero(const MatrixMeasure& G, double t);

// Interpolation curve (t sqrt(G1) + (1-t) sqrt(G0))^2, built on
// eps*I-regularized endpoints when a cell is singular; its discrete energy
// is an upper bound for the squared distance, 4(m0+m1) up to O(nt^-2).
struct SqrtPath {
    double energy = 0.0;
    double eps = 0.0; // regularization actually applied
    GridSpec grid;
    int msize = 1;
    std::vector<Mat> sqrt0, sqrt1; // per-cell square roots of the regularized endpoints

    MatrixMeasure at(double t) const; // pointwise (t sqrt1 + (1-t) sqrt0)^2
};

SqrtPath sqrt_path_energy(const MatrixMeasure& G0, const MatrixMeasure& G1, int nt);

// sqrt(sum_cells bures_distance^2(G0_cell, G1_cell) * cell_volume); the
// purely reactive (u == 0) distance, validated against solve(mode=hellinger).
double pointwise_hellinger_distance(const MatrixMeasure& G0, const MatrixMeasure& G1);

} // namespace kb
