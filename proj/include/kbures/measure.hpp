#pragma once

#include "kbures/common.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace kb {

// Uniform grid on the flat torus [0,1)^d with cell centers at (i+1/2)/n.
// n = 1 is the designated single-cell "pointwise" mode, legal only on the
// Hellinger/Bures code paths (no spatial derivative); spectral consumers
// require n >= 2 and even (Nyquist handling of the odd-order derivatives).
struct GridSpec {
    int d = 1;
    int n = 2;

    static GridSpec torus(int d, int n);
    static GridSpec pointwise(int d);

    bool is_pointwise() const { return n == 1; }
    long long cells() const;
    double cell_volume() const; // period fixed to 1

    double center(long long flat, int axis) const;
    void decode(long long flat, int* idx) const;
    long long encode(const int* idx) const;

    bool operator==(const GridSpec&) const = default;
};

// PSD-matrix-valued density w.r.t. Lebesgue measure, one cell-averaged
// value per cell in row-major cell order. msize equals grid.d except in
// pointwise mode, where any size up to kMaxMatSize is allowed.
struct MatrixMeasure {
    GridSpec grid;
    int msize = 1;
    std::vector<Mat> values;

    static MatrixMeasure zeros(const GridSpec& g, int msize);
    static MatrixMeasure constant(const GridSpec& g, const Mat& P);
};

struct ValidationIssue {
    long long cell;
    std::string what;
};

// First cell violating the PsdMatrix invariant (symmetry, finiteness,
// lambda_min >= -1e-10 * max(1, lambda_max)), or nullopt if valid.
std::optional<ValidationIssue> find_invalid_cell(const MatrixMeasure& G);

// Sum of Tr(G_cell) * cell_volume.
double total_mass(const MatrixMeasure& G);

// G = r^2 * Ghat with unit-mass Ghat and r = sqrt(mass); zero measure is a
// domain error (the cone apex has no sphere coordinate).
std::pair<MatrixMeasure, double> normalize_to_unit_mass(const MatrixMeasure& G);

// r^2 * Ghat; mass scales by r^2.
MatrixMeasure scale_measure(const MatrixMeasure& Ghat, double r);

struct Generator {
    enum class Kind { Constant, Bump, Rotating, Random };
    Kind kind = Kind::Constant;
    Mat P;               // base matrix; size must equal grid.d (unused for Random)
    Vec center;          // Bump: bump location (defaults to the domain center)
    double width = 0.25; // Bump: Gaussian width; 0 degenerates to Constant
    int axis = 0;        // Rotating: theta(x) = 2*pi*x[axis], rotation in the (0,1) plane
};

// Deterministic in (generator, seed). Constant: G == P. Bump:
// G(x) = (1 + exp(-dist(x,center)^2 / (2 width^2))) * P. Rotating:
// G(x) = Rot(theta) P Rot(theta)^T, d >= 2 only. Random: a smooth seeded
// positive-definite field exp(S(x)) with S drawn from a few low-frequency
// Fourier modes.
MatrixMeasure synth_measure(const GridSpec& grid, const Generator& gen, std::uint64_t seed);

/// Frame transformation: cell at index Qx holds Q G(x) Q^T. Q must be a
// signed permutation (the orthogonal maps sending the grid to itself).
MatrixMeasure orthogonal_conjugate(const MatrixMeasure& G, const Mat& Q);

} // namespace kb
