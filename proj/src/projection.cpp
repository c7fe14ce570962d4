#include "kbures/projection.hpp"

#include "kbures/linalg.hpp"

#include <complex>

namespace kb {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

// svec symbol of q -> (grad q)^Sym at wavenumber kappa, rows ordered like
// sym_index: entry (a=(i,j,w), l) of w/2 (i kap_i delta_{jl} + i kap_j delta_{il})
Eigen::MatrixXcd grad_sym_symbol(const double* kap, int msize, int sdim) {
    Eigen::MatrixXcd D = Eigen::MatrixXcd::Zero(sdim, msize);
    const auto& tab = sym_index(msize);
    for (int a = 0; a < sdim; ++a) {
        const auto& e = tab[a];
        D(a, e.j) += 0.5 * e.w * kI * kap[e.i];
        D(a, e.i) += 0.5 * e.w * kI * kap[e.j];
    }
    return D;
}

void add_scaled_identity(Eigen::MatrixXd& M, int row, int col, int s, double v) {
    for (int a = 0; a < s; ++a) {
        M(row + a, col + a) += v;
        if (row != col) M(col + a, row + a) += v;
    }
}

} // namespace

ContinuityProjector::ContinuityProjector(const GridSpec& grid, int msize, int nt,
                                         bool with_midpoints, bool with_velocity)
    : grid_(grid), msize_(msize), nt_(nt), mid_(with_midpoints), vel_(with_velocity),
      s_(sym_size(msize)), bs_(with_midpoints ? 2 * sym_size(msize) : sym_size(msize)),
      cells_(grid.cells()), dt_(1.0 / nt) {
    if (msize < 1 || msize > kMaxMatSize) throw_input("projector: matrix size out of range");
    if (nt < 1) throw_input("projector: nt must be >= 1");
    if (!grid_.is_pointwise()) fft_ = std::make_unique<SpectralGrid>(grid_);

    // the velocity couples matrices of size d only (q = G u lives in R^d)
    if (vel_ && !grid_.is_pointwise() && msize_ != grid_.d)
        throw_input("projector: velocity requires matrix size = spatial dimension");

    const int m = nt_ * bs_;
    const double zero_kappa[4] = {0, 0, 0, 0};
    auto chi = [&](int node) { return (node >= 1 && node <= nt_ - 1) ? 1.0 : 0.0; };

    factors_.reserve(cells_);
    if (vel_) dmat_.reserve(cells_);
    double max_lambda = 0.0;
    for (long long f = 0; f < cells_; ++f) {
        const double* kap = fft_ ? fft_->kappa(f) : zero_kappa;
        Eigen::MatrixXd ddh = Eigen::MatrixXd::Zero(s_, s_);
        if (vel_) {
            Eigen::MatrixXcd D = grad_sym_symbol(kap, msize_, s_);
            ddh = (D * D.adjoint()).real();
            dmat_.push_back(std::move(D));
        }

        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
        for (int k = 0; k < nt_; ++k) {
            const double xk = chi(k), xk1 = chi(k + 1);
            const int lk = k * bs_;           // Lambda_k offset
            const int nk = lk + s_;           // nu_k offset (midpoint variant)
            M.block(lk, lk, s_, s_) += ddh;
            add_scaled_identity(M, lk, lk, s_, (xk + xk1) / (dt_ * dt_) + 1.0);
            if (k + 1 < nt_) add_scaled_identity(M, lk, lk + bs_, s_, -xk1 / (dt_ * dt_));
            if (mid_) {
                add_scaled_identity(M, lk, nk, s_, (xk - xk1) / (2.0 * dt_));
                add_scaled_identity(M, nk, nk, s_, 1.0 + (xk + xk1) / 4.0);
                if (k + 1 < nt_) {
                    add_scaled_identity(M, lk, nk + bs_, s_, -xk1 / (2.0 * dt_));
                    add_scaled_identity(M, nk, lk + bs_, s_, xk1 / (2.0 * dt_));
                    add_scaled_identity(M, nk, nk + bs_, s_, xk1 / 4.0);
                }
            }
        }

        // ||B||^2 = lambda_max(B B^H): 50 power iterations per frequency
        Eigen::VectorXd v = Eigen::VectorXd::Ones(m) / std::sqrt(double(m));
        for (int it = 0; it < 50; ++it) {
            v = M * v;
            const double nv = v.norm();
            if (nv == 0.0) break;
            v /= nv;
        }
        max_lambda = std::max(max_lambda, v.dot(M * v));

        factors_.emplace_back(M);
        if (factors_.back().info() != Eigen::Success)
            throw_numeric("projector: Cholesky factorization of the normal equations failed");
    }
    op_norm_ = std::sqrt(std::max(max_lambda, 0.0));
}

void ContinuityProjector::to_spectral(const std::vector<std::vector<Mat>>& G,
                                      const std::vector<std::vector<Vec>>& q,
                                      const std::vector<std::vector<Mat>>& R,
                                      const std::vector<std::vector<Mat>>* Gc) {
    const auto& tab = sym_index(msize_);
    hatG_.resize(cells_, (nt_ + 1) * s_);
    hatR_.resize(cells_, nt_ * s_);
    if (vel_) hatQ_.resize(cells_, nt_ * grid_.d);
    if (mid_) hatC_.resize(cells_, nt_ * s_);

    auto load_sym = [&](Eigen::MatrixXcd& dst, int col, const std::vector<Mat>& slice, int a) {
        const auto& e = tab[a];
        for (long long c = 0; c < cells_; ++c)
            dst(c, col) = std::complex<double>(e.w * slice[c](e.i, e.j), 0.0);
        if (fft_) fft_->forward(dst.col(col).data());
    };
    for (int k = 0; k <= nt_; ++k)
        for (int a = 0; a < s_; ++a) load_sym(hatG_, k * s_ + a, G[k], a);
    for (int k = 0; k < nt_; ++k)
        for (int a = 0; a < s_; ++a) load_sym(hatR_, k * s_ + a, R[k], a);
    if (mid_)
        for (int k = 0; k < nt_; ++k)
            for (int a = 0; a < s_; ++a) load_sym(hatC_, k * s_ + a, (*Gc)[k], a);
    if (vel_)
        for (int k = 0; k < nt_; ++k)
            for (int l = 0; l < grid_.d; ++l) {
                const int col = k * grid_.d + l;
                for (long long c = 0; c < cells_; ++c)
                    hatQ_(c, col) = std::complex<double>(q[k][c](l), 0.0);
                if (fft_) fft_->forward(hatQ_.col(col).data());
            }
}

void ContinuityProjector::from_spectral(std::vector<std::vector<Mat>>& G,
                                        std::vector<std::vector<Vec>>& q,
                                        std::vector<std::vector<Mat>>& R,
                                        std::vector<std::vector<Mat>>* Gc) const {
    const auto& tab = sym_index(msize_);
    // conjugate symmetry is preserved exactly (the normal matrices are even
    // in kappa), so the imaginary parts below are pure roundoff
    auto store_sym = [&](const Eigen::MatrixXcd& src, int col, std::vector<Mat>& slice, int a) {
        Eigen::VectorXcd buf = src.col(col);
        if (fft_) fft_->backward(buf.data());
        const auto& e = tab[a];
        for (long long c = 0; c < cells_; ++c) {
            const double v = buf(c).real() / e.w;
            slice[c](e.i, e.j) = v;
            slice[c](e.j, e.i) = v;
        }
    };
    for (int k = 1; k <= nt_ - 1; ++k) // endpoint slices stay untouched
        for (int a = 0; a < s_; ++a) store_sym(hatG_, k * s_ + a, G[k], a);
    for (int k = 0; k < nt_; ++k)
        for (int a = 0; a < s_; ++a) store_sym(hatR_, k * s_ + a, R[k], a);
    if (mid_)
        for (int k = 0; k < nt_; ++k)
            for (int a = 0; a < s_; ++a) store_sym(hatC_, k * s_ + a, (*Gc)[k], a);
    if (vel_)
        for (int k = 0; k < nt_; ++k)
            for (int l = 0; l < grid_.d; ++l) {
                Eigen::VectorXcd buf = hatQ_.col(k * grid_.d + l);
                if (fft_) fft_->backward(buf.data());
                for (long long c = 0; c < cells_; ++c) q[k][c](l) = buf(c).real();
            }
}

void ContinuityProjector::project(std::vector<std::vector<Mat>>& G,
                                  std::vector<std::vector<Vec>>& q,
                                  std::vector<std::vector<Mat>>& R,
                                  std::vector<std::vector<Mat>>* Gc) {
    if (static_cast<int>(G.size()) != nt_ + 1 || static_cast<int>(R.size()) != nt_)
        throw_input("projector: slice count mismatch");
    if (vel_ && static_cast<int>(q.size()) != nt_) throw_input("projector: q slice count mismatch");
    if (mid_ && (!Gc || static_cast<int>(Gc->size()) != nt_))
        throw_input("projector: midpoint slices required");

    to_spectral(G, q, R, Gc);

    const int d = grid_.d;
    const int m = nt_ * bs_;
    Eigen::VectorXcd rhs(m), mu(m);
    Eigen::MatrixXd ri(m, 2);
    for (long long f = 0; f < cells_; ++f) {
        auto Ghat = [&](int k, int a) { return hatG_(f, k * s_ + a); };
        const Eigen::MatrixXcd* D = vel_ ? &dmat_[f] : nullptr;

        for (int k = 0; k < nt_; ++k) {
            for (int a = 0; a < s_; ++a) {
                std::complex<double> r1 = (Ghat(k + 1, a) - Ghat(k, a)) / dt_ - hatR_(f, k * s_ + a);
                if (vel_)
                    for (int l = 0; l < d; ++l) r1 += (*D)(a, l) * hatQ_(f, k * d + l);
                rhs(k * bs_ + a) = r1;
                if (mid_)
                    rhs(k * bs_ + s_ + a) =
                        hatC_(f, k * s_ + a) - 0.5 * (Ghat(k, a) + Ghat(k + 1, a));
            }
        }

        ri.col(0) = rhs.real();
        ri.col(1) = rhs.imag();
        const Eigen::MatrixXd sol = factors_[f].solve(ri);
        for (int r = 0; r < m; ++r) mu(r) = std::complex<double>(sol(r, 0), sol(r, 1));

        auto lam = [&](int k, int a) { return mu(k * bs_ + a); };
        auto nu = [&](int k, int a) { return mu(k * bs_ + s_ + a); };

        for (int k = 1; k <= nt_ - 1; ++k)
            for (int a = 0; a < s_; ++a) {
                std::complex<double> upd = (lam(k, a) - lam(k - 1, a)) / dt_;
                if (mid_) upd += 0.5 * (nu(k - 1, a) + nu(k, a));
                hatG_(f, k * s_ + a) += upd;
            }
        for (int k = 0; k < nt_; ++k)
            for (int a = 0; a < s_; ++a) {
                hatR_(f, k * s_ + a) += lam(k, a);
                if (mid_) hatC_(f, k * s_ + a) -= nu(k, a);
            }
        if (vel_)
            for (int k = 0; k < nt_; ++k)
                for (int l = 0; l < d; ++l) {
                    std::complex<double> upd = 0.0;
                    for (int a = 0; a < s_; ++a) upd += std::conj((*D)(a, l)) * lam(k, a);
                    hatQ_(f, k * d + l) -= upd;
                }
    }

    from_spectral(G, q, R, Gc);
}

} // namespace kb
