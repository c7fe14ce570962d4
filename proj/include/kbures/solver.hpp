#pragma once

#include "kbures/measure.hpp"

#include <cstdint>
#include <vector>

namespace kb {

enum class SolverMode { Kb, Hellinger };

struct SolverConfig {
    int nt = 32;        // time intervals (>= 2)
    int max_iter = 20000;
    double tau = 0.0;   // primal step; <= 0 picks 1/||L|| (L = constraint operator)
    double sigma = 0.0; // dual step = proximal weight; <= 0 picks 1/||L||
    double theta = 1.0; // over-relaxation in (0, 1]
    double tol_residual = 1e-6; // relative splitting fixed-point gap
    double tol_energy = 1e-8;   // relative energy stagnation over a 10-iteration window
    SolverMode mode = SolverMode::Kb;
    std::uint64_t seed = 0; // stamped into reports; consumed by fixture generation only

    void validate() const; // input-error on out-of-range values
};

// Staggered space-time discretization of a curve t -> G_t with momenta:
// G on nt+1 time nodes (endpoints pinned to the problem data bitwise), the
// transport momentum q = Gu and reaction momentum R = GU on time midpoints.
struct TransportPath {
    GridSpec grid;
    int nt = 0;
    std::vector<MatrixMeasure> G;    // nt+1 node slices
    std::vector<std::vector<Vec>> q; // nt midpoint slices, one grid.d-vector per cell
    std::vector<std::vector<Mat>> R; // nt midpoint slices, symmetric per cell

    int msize() const { return G.empty() ? 0 : G.front().msize; }
};

struct IterationRecord {
    int iter = 0;
    double energy = 0.0; // of the feasible iterate
    double gap = 0.0;    // relative fixed-point gap of the splitting
};

struct SolverReport {
    double distance = 0.0;
    double energy = 0.0;   // discrete action; distance = sqrt(energy)
    double residual = 0.0; // continuity residual of the returned path
    int iterations = 0;
    bool converged = false;
    double tau = 0.0; // effective step sizes (defaults resolved)
    double sigma = 0.0;
    double operator_norm = 0.0;        // power-iteration estimate of ||L||
    std::vector<IterationRecord> log;  // downsampled to <= 512 entries
};

struct SolveResult {
    SolverReport report;
    TransportPath path;
};

// Initial iterate: G along the sqrt-interpolation path (regularized when an
// endpoint cell is singular), q = 0, and R the Lyapunov-potential momentum of
// that path -- which, G being quadratic in t, is exactly the finite
// difference (G_{k+1} - G_k) / dt, so the initial iterate is feasible.
TransportPath discretize(const MatrixMeasure& G0, const MatrixMeasure& G1, const SolverConfig& cfg);

// Root-mean-square over time midpoints and cells of the Frobenius norm of
// (G_{k+1} - G_k)/dt + (grad q_k)^Sym - R_k, spectral gradient on the torus.
double continuity_residual(const TransportPath& path);

// Exact Euclidean projection onto the affine continuity constraints with the
// endpoint slices held fixed (FFT in space, direct block-tridiagonal solves
// in time per frequency).
TransportPath project_onto_continuity(const TransportPath& path);

// Discrete action: sum over midpoints and cells of
// dt * vol * Tr(Gbar^+ (q q^T + R R^T)), Gbar = (G_k + G_{k+1})/2 eigenvalue-
// clamped, pseudo-inverted on null directions. Momentum components beyond
// tolerance inside a null direction flag the path as infeasible: +infinity.
double path_energy(const TransportPath& path);

// Linear interpolation between adjacent node slices; exact (bitwise) at the
// nodes, eigenvalue-clamped to the PSD cone in between.
MatrixMeasure sample_path(const TransportPath& path, double t);

// Douglas-Rachford splitting between the per-cell proximal map of the
// momentum energy density and the exact continuity projection. Deterministic
// for fixed inputs and config; symmetric in its arguments by construction
// (the pair is ordered canonically and the path time-reversed on output).
// Reaching max_iter returns converged = false rather than throwing;
// non-finite iterates throw a numeric-error.
SolveResult solve(const MatrixMeasure& G0, const MatrixMeasure& G1, const SolverConfig& cfg);

} // namespace kb
