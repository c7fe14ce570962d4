#include "kbures/prox.hpp"

#include "kbures/linalg.hpp"

#include <cmath>
#include <sstream>

namespace kb {

namespace {

// phi(G) = 1/2|G-Gt|^2 + sigma qt^T (G+2sI)^-1 qt + psi_R(G): the objective
// after minimizing q and R out; evaluated in the eigenbasis of G, stable on
// the PSD boundary (all denominators below stay positive where needed).
struct ProxWork {
    const Mat& Gt;
    const Vec& qt;
    const Mat& Rt;
    double sigma;
    int d;

    // F(X) = grad phi(P(X)) + X - P(X), the PSD normal map; a zero gives the
    // constrained minimizer G = P(X). One eigendecomposition serves both P
    // and the gradient.
    Vec normal_map(const Vec& xs) const {
        Mat X = sym_unpack(xs.data(), d);
        SymEigen eg = sym_eigen(X);
        Vec g(d);
        for (int i = 0; i < d; ++i) g(i) = std::max(eg.values(i), 0.0);
        const Mat& V = eg.vectors;
        Mat Gt_t = V.transpose() * Gt * V;
        Vec qt_t = V.transpose() * qt;
        Mat Rt_t = V.transpose() * Rt * V;

        Mat grad = -Gt_t;
        for (int i = 0; i < d; ++i) grad(i, i) += g(i);

        Vec a(d);
        for (int i = 0; i < d; ++i) a(i) = qt_t(i) / (g(i) + 2.0 * sigma);
        grad -= sigma * a * a.transpose();

        // m_ik = g_k / (g_i g_k + sigma (g_i + g_k)); zero when g_i = g_k = 0
        Mat m(d, d);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) {
                const double den = g(i) * g(k) + sigma * (g(i) + g(k));
                m(i, k) = den > 0.0 ? g(k) / den : 0.0;
            }
        for (int i = 0; i < d; ++i)
            for (int j = i; j < d; ++j) {
                double t = 0.0;
                for (int k = 0; k < d; ++k)
                    t += Rt_t(i, k) * m(i, k) * Rt_t(k, j) * m(j, k);
                grad(i, j) -= sigma * t;
                if (i != j) grad(j, i) -= sigma * t;
            }

        // X - P(X) adds the clamped (negative) part of the spectrum back
        for (int i = 0; i < d; ++i) grad(i, i) += eg.values(i) - g(i);

        Mat F = V * grad * V.transpose();
        F = 0.5 * (F + Mat(F.transpose()));
        Vec fs(sym_size(d));
        sym_pack(F, fs.data());
        return fs;
    }
};

CellProx finish(const Mat& X, const Vec& qt, const Mat& Rt, double sigma, int iters,
                double rel_residual) {
    const int d = static_cast<int>(X.rows());
    SymEigen eg = sym_eigen(X);
    Vec g(d);
    for (int i = 0; i < d; ++i) g(i) = std::max(eg.values(i), 0.0);
    const Mat& V = eg.vectors;

    CellProx out;
    out.G = V * g.asDiagonal() * V.transpose();
    out.G = 0.5 * (out.G + Mat(out.G.transpose()));
    Vec qt_t = V.transpose() * qt;
    for (int i = 0; i < d; ++i) qt_t(i) *= g(i) / (g(i) + 2.0 * sigma);
    out.q = V * qt_t;
    Mat Rt_t = V.transpose() * Rt * V;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const double den = g(i) * g(j) + sigma * (g(i) + g(j));
            Rt_t(i, j) = den > 0.0 ? Rt_t(i, j) * g(i) * g(j) / den : 0.0;
        }
    out.R = V * Rt_t * V.transpose();
    out.R = 0.5 * (out.R + Mat(out.R.transpose()));
    out.iterations = iters;
    out.kkt_residual = rel_residual;
    return out;
}

CellProx scalar_prox(double gt, double qt, double rt, double sigma) {
    const double a2 = qt * qt + rt * rt;
    double g;
    int iters = 0;
    auto dphi = [&](double x) { return x - gt - sigma * a2 / ((x + 2 * sigma) * (x + 2 * sigma)); };
    if (a2 == 0.0) {
        g = std::max(gt, 0.0);
    } else if (dphi(0.0) >= 0.0) {
        g = 0.0;
    } else {
        // dphi is strictly increasing; bracket and polish with safeguarded Newton
        double lo = 0.0;
        double hi = std::max(gt, 0.0) + a2 / (4.0 * sigma);
        g = std::max(gt, 0.5 * hi);
        for (; iters < 200; ++iters) {
            const double f = dphi(g);
            if (f > 0)
                hi = g;
            else
                lo = g;
            const double fp = 1.0 + 2.0 * sigma * a2 / std::pow(g + 2 * sigma, 3);
            double next = g - f / fp;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - g) <= 1e-16 * (1.0 + std::abs(g))) {
                g = next;
                break;
            }
            g = next;
        }
    }
    const double c = g > 0.0 ? g / (g + 2.0 * sigma) : 0.0;
    CellProx out;
    out.G = Mat::Constant(1, 1, g);
    out.q = Vec::Constant(1, c * qt);
    out.R = Mat::Constant(1, 1, c * rt);
    out.iterations = iters;
    const double scale = 1.0 + std::abs(gt) + std::sqrt(a2);
    out.kkt_residual = (g > 0.0 ? std::abs(dphi(g)) : std::max(0.0, -dphi(0.0))) / scale;
    return out;
}

} // namespace

CellProx cell_prox(const Mat& Gt, const Vec& qt, const Mat& Rt, double sigma,
                   const Mat* warm) {
    const int d = static_cast<int>(Gt.rows());
    if (Gt.cols() != d || Rt.rows() != d || Rt.cols() != d || qt.size() != d)
        throw_input("cell_prox: size mismatch");
    if (!(sigma > 0.0)) throw_input("cell_prox: sigma must be positive");
    if (!Gt.allFinite() || !qt.allFinite() || !Rt.allFinite())
        throw_input("cell_prox: non-finite input");

    if (d == 1) return scalar_prox(Gt(0, 0), qt(0), Rt(0, 0), sigma);

    const double scale = 1.0 + Gt.norm() + qt.norm() + Rt.norm();
    if (qt.norm() == 0.0 && Rt.norm() == 0.0) {
        // M = 0 decouples: plain PSD projection
        CellProx out = finish(0.5 * (Gt + Mat(Gt.transpose())), qt, Rt, sigma, 0, 0.0);
        return out;
    }

    ProxWork work{Gt, qt, Rt, sigma, d};
    const int s = sym_size(d);
    Vec xs(s);
    {
        Mat X0 = (warm != nullptr && warm->rows() == d && warm->cols() == d &&
                  warm->allFinite())
                     ? Mat(0.5 * (*warm + Mat(warm->transpose())))
                     : Mat(0.5 * (Gt + Mat(Gt.transpose())));
        sym_pack(X0, xs.data());
    }
    Vec F = work.normal_map(xs);
    double fn = F.norm();
    const double tol = 1e-12 * scale;
    int iter = 0;
    int stalls = 0;
    using JMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 10, 10>;
    for (; iter < 200 && fn > tol; ++iter) {
        // finite-difference Jacobian of the normal map (s columns)
        const double h = 1e-7 * (1.0 + xs.norm());
        JMat J(s, s);
        for (int c = 0; c < s; ++c) {
            Vec xp = xs;
            xp(c) += h;
            J.col(c) = (work.normal_map(xp) - F) / h;
        }
        Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 10, 1> step =
            J.fullPivLu().solve(-F);
        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            if (attempt == 1 || !step.allFinite()) step = -F; // damped fixed point
            double alpha = 1.0;
            for (int ls = 0; ls < 45; ++ls) {
                Vec xn = xs + alpha * Vec(step);
                Vec Fn = work.normal_map(xn);
                if (Fn.norm() <= (1.0 - 1e-4 * alpha) * fn) {
                    xs = xn;
                    F = Fn;
                    fn = Fn.norm();
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
        }
        if (!accepted) {
            if (++stalls >= 3) break;
        } else {
            stalls = 0;
        }
    }
    if (fn > 1e-10 * scale) {
        std::ostringstream msg;
        msg << "cell_prox: inner iteration did not converge (d=" << d << ", sigma=" << sigma
            << ", residual=" << fn / scale << " after " << iter << " iterations, |Gt|="
            << Gt.norm() << ", |qt|=" << qt.norm() << ", |Rt|=" << Rt.norm() << ")";
        throw_numeric(msg.str());
    }
    return finish(sym_unpack(xs.data(), d), qt, Rt, sigma, iter, fn / scale);
}

} // namespace kb
