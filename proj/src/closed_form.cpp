#include "kbures/closed_form.hpp"

#include "kbures/linalg.hpp"

#include <cmath>

namespace kb {

double bures_distance(const Mat& P0, const Mat& P1) {
    if (P0.rows() != P1.rows() || P0.cols() != P1.cols())
        throw_input("bures_distance: size mismatch");
    Mat S0 = psd_apply_fn(P0, SpectralFn::Sqrt);
    Mat C = S0 * P1 * S0;
    C = 0.5 * (C + Mat(C.transpose()));
    Mat Cs = psd_apply_fn(C, SpectralFn::Sqrt);
    double rad = P0.trace() + P1.trace() - 2.0 * Cs.trace();
    const double scale = 1.0 + P0.trace() + P1.trace();
    if (rad < -1e-12 * scale)
        throw_numeric("bures_distance: negative radicand " + std::to_string(rad));
    rad = std::max(rad, 0.0);
    return 2.0 * std::sqrt(rad);
}

Mat bures_geodesic_point(const Mat& P0, const Mat& P1, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw_input("bures_geodesic_point: t must be in [0,1]");
    Mat X = riccati_solve(P0, P1);
    const int n = static_cast<int>(P0.rows());
    Mat W = (1.0 - t) * Mat::Identity(n, n) + t * X;
    Mat G = W * P0 * W;
    return 0.5 * (G + Mat(G.transpose()));
}

namespace {

void check_commuting(const ConstantPair& pair, const char* who) {
    Mat C = pair.A0 * pair.A1 - pair.A1 * pair.A0;
    const double bound = 1e-12 * pair.A0.norm() * pair.A1.norm();
    if (C.norm() > bound)
        throw_precondition(std::string(who) + ": A0 and A1 do not commute (|[A0,A1]| = " +
                           std::to_string(C.norm()) + ")");
}

void check_pair_sizes(const ConstantPair& pair, const char* who) {
    const int d = pair.Gstar.msize;
    if (pair.A0.rows() != d || pair.A0.cols() != d || pair.A1.rows() != d ||
        pair.A1.cols() != d)
        throw_input(std::string(who) + ": A0/A1 size must match the reference measure");
}

} // namespace

double commuting_distance(const ConstantPair& pair) {
    check_pair_sizes(pair, "commuting_distance");
    check_commuting(pair, "commuting_distance");
    Mat D = pair.A1 - pair.A0;
    Mat D2 = D * D;
    double acc = 0.0;
    for (const auto& g : pair.Gstar.values) acc += (g * D2).trace();
    acc *= 4.0 * pair.Gstar.grid.cell_volume();
    return std::sqrt(std::max(acc, 0.0));
}

MatrixMeasure commuting_geodesic_point(const ConstantPair& pair, double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw_input("commuting_geodesic_point: t must be in [0,1]");
    check_pair_sizes(pair, "commuting_geodesic_point");
    check_commuting(pair, "commuting_geodesic_point");
    Mat A = t * pair.A1 + (1.0 - t) * pair.A0;
    MatrixMeasure out = pair.Gstar;
    for (auto& g : out.values) {
        Mat v = A * g * A;
        g = 0.5 * (v + Mat(v.transpose()));
    }
    return out;
}

std::pair<MatrixMeasure, double> geodesic_to_zero(const MatrixMeasure& G, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw_input("geodesic_to_zero: t must be in [0,1]");
    MatrixMeasure point = G;
    const double f = (1.0 - t) * (1.0 - t);
    for (auto& v : point.values) v *= f;
    return {point, 2.0 * std::sqrt(total_mass(G))};
}

MatrixMeasure SqrtPath::at(double t) const {
    MatrixMeasure out = MatrixMeasure::zeros(grid, msize);
    for (std::size_t c = 0; c < sqrt0.size(); ++c) {
        Mat B = t * sqrt1[c] + (1.0 - t) * sqrt0[c];
        Mat G = B * B;
        out.values[c] = 0.5 * (G + Mat(G.transpose()));
    }
    return out;
}

SqrtPath sqrt_path_energy(const MatrixMeasure& G0, const MatrixMeasure& G1, int nt) {
    if (!(G0.grid == G1.grid) || G0.msize != G1.msize)
        throw_input("sqrt_path_energy: grid mismatch");
    if (nt < 1) throw_input("sqrt_path_energy: nt must be >= 1");

    SqrtPath path;
    path.grid = G0.grid;
    path.msize = G0.msize;
    const long long N = G0.grid.cells();
    const int d = G0.msize;

    double max_trace = 0.0;
    bool all_pd = true;
    for (long long c = 0; c < N; ++c) {
        max_trace = std::max({max_trace, G0.values[c].trace(), G1.values[c].trace()});
        for (const auto* v : {&G0.values[c], &G1.values[c]}) {
            SymEigen eg = sym_eigen(*v);
            if (eg.values(d - 1) <= 0.0) all_pd = false;
        }
    }
    if (max_trace == 0.0) {
        // both endpoints are the zero measure: the path is identically zero
        path.sqrt0.assign(N, Mat::Zero(d, d));
        path.sqrt1.assign(N, Mat::Zero(d, d));
        return path;
    }
    path.eps = all_pd ? 0.0 : 1e-9 * max_trace;

    Mat reg = path.eps * Mat::Identity(d, d);
    path.sqrt0.resize(N);
    path.sqrt1.resize(N);
    for (long long c = 0; c < N; ++c) {
        path.sqrt0[c] = psd_apply_fn(Mat(G0.values[c] + reg), SpectralFn::Sqrt);
        path.sqrt1[c] = psd_apply_fn(Mat(G1.values[c] + reg), SpectralFn::Sqrt);
    }

    // midpoint rule in time; the reaction potential solves the Lyapunov
    // equation of the constraint dG/dt = {G U}^Sym along G = B_t^2
    const double dt = 1.0 / nt;
    const double w = dt * G0.grid.cell_volume();
    double energy = 0.0;
    for (int k = 0; k < nt; ++k) {
        const double tm = (k + 0.5) * dt;
        for (long long c = 0; c < N; ++c) {
            Mat Bdot = path.sqrt1[c] - path.sqrt0[c];
            Mat B = tm * path.sqrt1[c] + (1.0 - tm) * path.sqrt0[c];
            Mat G = B * B;
            G = 0.5 * (G + Mat(G.transpose()));
            Mat Gdot = Bdot * B + B * Bdot; // = 2 (Bdot B)^Sym
            Mat U = lyapunov_solve(G, Gdot);
            energy += w * (U * G * U).trace();
        }
    }
    path.energy = energy;
    return path;
}

double pointwise_hellinger_distance(const MatrixMeasure& G0, const MatrixMeasure& G1) {
    if (!(G0.grid == G1.grid) || G0.msize != G1.msize)
        throw_input("pointwise_hellinger_distance: grid mismatch");
    double acc = 0.0;
    for (std::size_t c = 0; c < G0.values.size(); ++c) {
        const double d = bures_distance(G0.values[c], G1.values[c]);
        acc += d * d;
    }
    return std::sqrt(acc * G0.grid.cell_volume());
}

} // namespace kb
