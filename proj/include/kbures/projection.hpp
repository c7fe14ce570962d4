#pragma once

#include "kbures/measure.hpp"
#include "kbures/spectral.hpp"

#include <Eigen/Cholesky>
#include <complex>
#include <memory>
#include <vector>

namespace kb {

// Euclidean projection onto the discrete transport-reaction constraints
//
//   (G_{k+1} - G_k)/dt + (grad q_k)^Sym - R_k = 0          (k = 0..nt-1)
//   Gc_k - (G_k + G_{k+1})/2 = 0                           (midpoint option)
//
// with the endpoint slices G_0, G_nt treated as fixed data. The FFT
// diagonalizes space, so per spatial frequency the normal equations of the
// multipliers are block-tridiagonal in time with real SPD blocks (the
// symmetric gradient is purely imaginary and enters only through D D^H);
// their Cholesky factors are assembled once per projector and reused.
//
// The midpoint-average variables Gc are the splitting scheme's copy of the
// energy coefficient (the prox acts on them); the public constraint
// projection simply omits them. Excluding the velocity removes the q columns
// entirely, which yields the exact projection onto the purely reactive
// (Hellinger) constraint set.
//
// Holds mutable spectral workspaces: one instance is not safe for concurrent
// project() calls.
class ContinuityProjector {
public:
    ContinuityProjector(const GridSpec& grid, int msize, int nt,
                        bool with_midpoints, bool with_velocity);

    // G: nt+1 node slices (endpoints read but never written); q, R and the
    // optional Gc: nt midpoint slices. Projects in place.
    void project(std::vector<std::vector<Mat>>& G,
                 std::vector<std::vector<Vec>>& q,
                 std::vector<std::vector<Mat>>& R,
                 std::vector<std::vector<Mat>>* Gc);

    // sqrt(lambda_max) of the constraint normal operator, estimated by 50
    // power iterations per frequency during construction.
    double operator_norm() const { return op_norm_; }

    int nt() const { return nt_; }
    double dt() const { return dt_; }

private:
    GridSpec grid_;
    int msize_;
    int nt_;
    bool mid_;
    bool vel_;
    int s_;   // packed symmetric size msize (msize + 1) / 2
    int bs_;  // multiplier block size per time midpoint: s_ or 2 s_
    long long cells_;
    double dt_;
    double op_norm_ = 0.0;
    std::unique_ptr<SpectralGrid> fft_; // null in pointwise mode
    std::vector<Eigen::LLT<Eigen::MatrixXd>> factors_; // one per frequency
    std::vector<Eigen::MatrixXcd> dmat_;               // (grad .)^Sym symbol, s x d

    // spectral field buffers, cells x (slice * component), column per field
    Eigen::MatrixXcd hatG_, hatQ_, hatR_, hatC_;

    void to_spectral(const std::vector<std::vector<Mat>>& G,
                     const std::vector<std::vector<Vec>>& q,
                     const std::vector<std::vector<Mat>>& R,
                     const std::vector<std::vector<Mat>>* Gc);
    void from_spectral(std::vector<std::vector<Mat>>& G,
                       std::vector<std::vector<Vec>>& q,
                       std::vector<std::vector<Mat>>& R,
                       std::vector<std::vector<Mat>>* Gc) const;
};

} // namespace kb
