#include "kbures/linalg.hpp"

#include <cmath>
#include <sstream>

namespace kb {

const std::vector<SymIndex>& sym_index(int d) {
    static const std::array<std::vector<SymIndex>, kMaxMatSize + 1> tables = [] {
        std::array<std::vector<SymIndex>, kMaxMatSize + 1> t;
        const double r2 = std::sqrt(2.0);
        for (int d = 1; d <= kMaxMatSize; ++d) {
            for (int i = 0; i < d; ++i)
                for (int j = i; j < d; ++j)
                    t[d].push_back({i, j, i == j ? 1.0 : r2});
        }
        return t;
    }();
    if (d < 1 || d > kMaxMatSize)
        throw_input("matrix size " + std::to_string(d) + " out of range 1.." +
                    std::to_string(kMaxMatSize));
    return tables[d];
}

void sym_pack(const Mat& A, double* out) {
    const auto& idx = sym_index(static_cast<int>(A.rows()));
    for (std::size_t c = 0; c < idx.size(); ++c)
        out[c] = idx[c].w * A(idx[c].i, idx[c].j);
}

Mat sym_unpack(const double* in, int d) {
    const auto& idx = sym_index(d);
    Mat A = Mat::Zero(d, d);
    for (std::size_t c = 0; c < idx.size(); ++c) {
        const double v = in[c] / idx[c].w;
        A(idx[c].i, idx[c].j) = v;
        A(idx[c].j, idx[c].i) = v;
    }
    return A;
}

namespace {

void check_square(const Mat& A, const char* who) {
    if (A.rows() != A.cols() || A.rows() < 1 || A.rows() > kMaxMatSize)
        throw_input(std::string(who) + ": expected a square matrix of size 1.." +
                    std::to_string(kMaxMatSize));
}

// Symmetry invariant: max |A_ij - A_ji| <= 1e-12 * (1 + max |A_ij|).
void check_symmetric(const Mat& A, const char* who) {
    if (!A.allFinite())
        throw_input(std::string(who) + ": non-finite entries");
    const double scale = 1.0 + A.cwiseAbs().maxCoeff();
    const double asym = (A - Mat(A.transpose())).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * scale)
        throw_input(std::string(who) + ": symmetry violation " + std::to_string(asym));
}

} // namespace

SymEigen sym_eigen(const Mat& A) {
    check_square(A, "sym_eigen");
    check_symmetric(A, "sym_eigen");
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(0.5 * (A + Mat(A.transpose()))));
    if (es.info() != Eigen::Success)
        throw_numeric("sym_eigen: eigendecomposition failed");
    SymEigen out;
    const int n = static_cast<int>(A.rows());
    out.values = es.eigenvalues().reverse(); // ascending -> descending
    out.vectors.resize(n, n);
    for (int c = 0; c < n; ++c) out.vectors.col(c) = es.eigenvectors().col(n - 1 - c);
    return out;
}

Mat psd_apply_fn(const Mat& P, SpectralFn fn) {
    SymEigen eg = sym_eigen(P);
    const int n = static_cast<int>(P.rows());
    const double lmax = eg.values(0);
    const double lmin = eg.values(n - 1);
    Vec f(n);
    switch (fn) {
        case SpectralFn::Sqrt: {
            const double tol = 1e-10 * std::max(1.0, lmax);
            if (lmin < -tol)
                throw_domain("psd_apply_fn(sqrt): matrix is indefinite, lambda_min = " +
                             std::to_string(lmin));
            for (int i = 0; i < n; ++i) f(i) = std::sqrt(std::max(eg.values(i), 0.0));
            break;
        }
        case SpectralFn::Log:
        case SpectralFn::Inv: {
            if (lmin <= 0.0)
                throw_domain(std::string("psd_apply_fn(") +
                             (fn == SpectralFn::Log ? "log" : "inv") +
                             "): matrix is singular, lambda_min = " + std::to_string(lmin));
            for (int i = 0; i < n; ++i)
                f(i) = fn == SpectralFn::Log ? std::log(eg.values(i)) : 1.0 / eg.values(i);
            break;
        }
        case SpectralFn::Exp:
            for (int i = 0; i < n; ++i) f(i) = std::exp(eg.values(i));
            break;
    }
    Mat R = eg.vectors * f.asDiagonal() * eg.vectors.transpose();
    return 0.5 * (R + Mat(R.transpose()));
}

Mat lyapunov_solve(const Mat& P, const Mat& Xi) {
    check_square(P, "lyapunov_solve");
    if (Xi.rows() != P.rows() || Xi.cols() != P.cols())
        throw_input("lyapunov_solve: size mismatch");
    check_symmetric(Xi, "lyapunov_solve");
    SymEigen eg = sym_eigen(P);
    const int n = static_cast<int>(P.rows());
    if (eg.values(n - 1) <= 0.0)
        throw_domain("lyapunov_solve: P is singular, lambda_min = " +
                     std::to_string(eg.values(n - 1)));
    Mat Xt = eg.vectors.transpose() * Xi * eg.vectors;
    Mat Ut(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            Ut(i, j) = 2.0 * Xt(i, j) / (eg.values(i) + eg.values(j));
    Mat U = eg.vectors * Ut * eg.vectors.transpose();
    return 0.5 * (U + Mat(U.transpose()));
}

Mat riccati_solve(const Mat& P0, const Mat& P1) {
    check_square(P0, "riccati_solve");
    if (P1.rows() != P0.rows() || P1.cols() != P0.cols())
        throw_input("riccati_solve: size mismatch");
    check_symmetric(P1, "riccati_solve");
    SymEigen eg = sym_eigen(P0);
    const int n = static_cast<int>(P0.rows());
    if (eg.values(n - 1) <= 0.0)
        throw_domain("riccati_solve: P0 is singular, lambda_min = " +
                     std::to_string(eg.values(n - 1)));
    Vec sq(n), isq(n);
    for (int i = 0; i < n; ++i) {
        sq(i) = std::sqrt(eg.values(i));
        isq(i) = 1.0 / sq(i);
    }
    Mat S = eg.vectors * sq.asDiagonal() * eg.vectors.transpose();
    Mat Si = eg.vectors * isq.asDiagonal() * eg.vectors.transpose();
    Mat C = S * P1 * S;
    C = 0.5 * (C + Mat(C.transpose()));
    Mat Cs = psd_apply_fn(C, SpectralFn::Sqrt);
    Mat X = Si * Cs * Si;
    return 0.5 * (X + Mat(X.transpose()));
}

Mat psd_project(const Mat& A) {
    SymEigen eg = sym_eigen(A);
    const int n = static_cast<int>(A.rows());
    Vec f(n);
    for (int i = 0; i < n; ++i) f(i) = std::max(eg.values(i), 0.0);
    Mat R = eg.vectors * f.asDiagonal() * eg.vectors.transpose();
    return 0.5 * (R + Mat(R.transpose()));
}

} // namespace kb
