#include "kbures/spectral.hpp"

#include <fftw3.h>

#include <cstring>

namespace kb {

namespace {
fftw_complex* as_fftw(void* p) { return static_cast<fftw_complex*>(p); }
} // namespace

SpectralGrid::SpectralGrid(const GridSpec& g) : grid_(g) {
    if (g.is_pointwise())
        throw_input("SpectralGrid: pointwise grids have no spectral operators");
    const long long N = g.cells();
    kappa_.resize(N * g.d);
    int idx[3];
    for (long long f = 0; f < N; ++f) {
        g.decode(f, idx);
        for (int a = 0; a < g.d; ++a) {
            int xi = idx[a] <= g.n / 2 ? idx[a] : idx[a] - g.n;
            if (idx[a] == g.n / 2) xi = 0; // Nyquist zeroed for odd derivatives
            kappa_[f * g.d + a] = 2.0 * M_PI * xi;
        }
    }
    scratch_ = fftw_malloc(sizeof(fftw_complex) * N);
    int dims[3] = {g.n, g.n, g.n};
    // FFTW_ESTIMATE keeps plan selection deterministic run to run
    plan_fwd_ = fftw_plan_dft(g.d, dims, as_fftw(scratch_), as_fftw(scratch_),
                              FFTW_FORWARD, FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft(g.d, dims, as_fftw(scratch_), as_fftw(scratch_),
                              FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!plan_fwd_ || !plan_bwd_) throw_numeric("SpectralGrid: fftw planning failed");
}

SpectralGrid::~SpectralGrid() {
    if (plan_fwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    if (plan_bwd_) fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
    if (scratch_) fftw_free(scratch_);
}

void SpectralGrid::forward(std::complex<double>* f) const {
    const long long N = cells();
    std::memcpy(scratch_, f, sizeof(fftw_complex) * N);
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_), as_fftw(scratch_), as_fftw(scratch_));
    std::memcpy(f, scratch_, sizeof(fftw_complex) * N);
}

void SpectralGrid::backward(std::complex<double>* f) const {
    const long long N = cells();
    std::memcpy(scratch_, f, sizeof(fftw_complex) * N);
    fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_), as_fftw(scratch_), as_fftw(scratch_));
    const double inv = 1.0 / static_cast<double>(N);
    auto* out = static_cast<std::complex<double>*>(scratch_);
    for (long long i = 0; i < N; ++i) f[i] = out[i] * inv;
}

std::vector<Mat> SpectralGrid::grad_sym(const std::vector<Vec>& q) const {
    const int d = grid_.d;
    const long long N = cells();
    if (static_cast<long long>(q.size()) != N) throw_input("grad_sym: field size mismatch");
    std::vector<std::vector<std::complex<double>>> qhat(
        d, std::vector<std::complex<double>>(N));
    for (int a = 0; a < d; ++a) {
        for (long long c = 0; c < N; ++c) qhat[a][c] = q[c](a);
        forward(qhat[a].data());
    }
    std::vector<Mat> out(N, Mat::Zero(d, d));
    std::vector<std::complex<double>> comp(N);
    const std::complex<double> I(0.0, 1.0);
    for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
            for (long long f = 0; f < N; ++f) {
                const double* k = kappa(f);
                comp[f] = 0.5 * I * (k[i] * qhat[j][f] + k[j] * qhat[i][f]);
            }
            backward(comp.data());
            for (long long c = 0; c < N; ++c) {
                out[c](i, j) = comp[c].real();
                out[c](j, i) = comp[c].real();
            }
        }
    }
    return out;
}

std::vector<Vec> SpectralGrid::div_sym(const std::vector<Mat>& V) const {
    const int d = grid_.d;
    const long long N = cells();
    if (static_cast<long long>(V.size()) != N) throw_input("div_sym: field size mismatch");
    // forward-transform the s distinct components
    const auto& idx = sym_index(d);
    const int s = sym_size(d);
    std::vector<std::vector<std::complex<double>>> vhat(
        s, std::vector<std::complex<double>>(N));
    for (int cmp = 0; cmp < s; ++cmp) {
        for (long long c = 0; c < N; ++c)
            vhat[cmp][c] = V[c](idx[cmp].i, idx[cmp].j);
        forward(vhat[cmp].data());
    }
    auto comp_at = [&](int i, int j) -> const std::vector<std::complex<double>>& {
        if (i > j) std::swap(i, j);
        for (int cmp = 0; cmp < s; ++cmp)
            if (idx[cmp].i == i && idx[cmp].j == j) return vhat[cmp];
        throw_numeric("div_sym: bad component");
    };
    std::vector<Vec> out(N, Vec::Zero(d));
    std::vector<std::complex<double>> acc(N);
    const std::complex<double> I(0.0, 1.0);
    for (int i = 0; i < d; ++i) {
        std::fill(acc.begin(), acc.end(), std::complex<double>(0.0, 0.0));
        for (int j = 0; j < d; ++j) {
            const auto& Vij = comp_at(i, j);
            for (long long f = 0; f < N; ++f) acc[f] += I * kappa(f)[j] * Vij[f];
        }
        backward(acc.data());
        for (long long c = 0; c < N; ++c) out[c](i) = acc[c].real();
    }
    return out;
}

} // namespace kb
