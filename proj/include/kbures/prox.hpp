#pragma once

#include "kbures/common.hpp"

namespace kb {

struct CellProx {
    Mat G;
    Vec q;
    Mat R;
    int iterations = 0;
    double kkt_residual = 0.0; // normal-map residual, relative to the input scale
};

// Minimizer of 1/2|G-Gt|^2 + 1/2|q-qt|^2 + 1/2|R-Rt|^2 + sigma Tr(G^-1 (q q^T + R^2))
// over the PSD cone (the matrix perspective prox). Optimality system, with
// W = G's eigenbasis and g its eigenvalues:
//   q = G (G + 2 sigma I)^-1 qt,
//   R: R_ij = Rt_ij g_i g_j / (g_i g_j + sigma (g_i + g_j)) in W,
//   G = Gt + sigma (G^-1 M G^-1)^Sym, M = q q^T + R^2,
// with q, R vanishing on null eigendirections. Solved by a damped Newton
// iteration on the PSD normal map; throws a numeric error with diagnostics
// if 200 iterations do not reach a 1e-10 relative residual.
//
// warm, if given, seeds the Newton variable (the pre-projection point X whose
// PSD part is G); the solver loop passes each cell's previous solution so the
// prox costs a couple of iterations per call once the iterates settle.
CellProx cell_prox(const Mat& Gt, const Vec& qt, const Mat& Rt, double sigma,
                   const Mat* warm = nullptr);

} // namespace kb
