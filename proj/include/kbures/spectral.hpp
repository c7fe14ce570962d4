#pragma once

#include "kbures/measure.hpp"

#include <complex>
#include <vector>

namespace kb {

// FFT workspace for one torus grid: c2c transforms plus the spectral
// wavenumber tables. The Nyquist wavenumber is zeroed so that first
// derivatives of real fields stay real (this is why n must be even).
// Holds mutable scratch: not safe for concurrent use of one instance.
class SpectralGrid {
public:
    explicit SpectralGrid(const GridSpec& g);
    ~SpectralGrid();
    SpectralGrid(const SpectralGrid&) = delete;
    SpectralGrid& operator=(const SpectralGrid&) = delete;

    const GridSpec& grid() const { return grid_; }
    long long cells() const { return grid_.cells(); }

    // in place; forward is unnormalized, backward divides by the cell count
    void forward(std::complex<double>* f) const;
    void backward(std::complex<double>* f) const;

    // wavenumber vector (2*pi * signed frequency, Nyquist zeroed) at a flat
    // frequency index; entry per axis
    const double* kappa(long long freq) const { return kappa_.data() + freq * grid_.d; }

    // (grad q)^Sym_ij = 1/2 (d_i q_j + d_j q_i) of a vector field
    std::vector<Mat> grad_sym(const std::vector<Vec>& q) const;
    // row-wise divergence of a symmetric matrix field: (div V)_i = sum_j d_j V_ij
    std::vector<Vec> div_sym(const std::vector<Mat>& V) const;

private:
    GridSpec grid_;
    std::vector<double> kappa_; // cells x d
    void* plan_fwd_ = nullptr;
    void* plan_bwd_ = nullptr;
    void* scratch_ = nullptr; // fftw-aligned buffer of `cells` complex values
};

} // namespace kb
