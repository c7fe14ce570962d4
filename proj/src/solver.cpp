#include "kbures/solver.hpp"

#include "kbures/closed_form.hpp"
#include "kbures/linalg.hpp"
#include "kbures/projection.hpp"
#include "kbures/prox.hpp"
#include "kbures/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

namespace kb {

namespace {

constexpr double kNullTol = 1e-12; // relative null-direction threshold on Gbar
constexpr double kLeakTol = 1e-8;  // admissible momentum inside a null direction

// Energy density of one midpoint cell, Tr(Gbar^+ (q q^T + R R^T)) with the
// spectrum of Gbar clamped to the cone and pseudo-inverted. strict flags
// momentum beyond tolerance in a null direction as infeasible (+inf); the
// solver's monitoring variant drops such terms instead, because splitting
// iterates are allowed to sit a little outside the cone while converging.
double cell_energy(const Mat& gbar, const Vec* qv, const Mat& rv, bool strict) {
    const double inf = std::numeric_limits<double>::infinity();
    const int d = static_cast<int>(gbar.rows());
    if (d == 1) {
        const double g = std::max(gbar(0, 0), 0.0);
        const double qs = qv != nullptr ? (*qv)(0) : 0.0;
        const double r = rv(0, 0);
        if (g > kNullTol * std::max(1.0, g)) return (qs * qs + r * r) / g;
        const double leak = kLeakTol * (1.0 + std::abs(qs) + std::abs(r));
        if (strict && (std::abs(qs) > leak || std::abs(r) > leak)) return inf;
        return 0.0;
    }
    SymEigen eg = sym_eigen(gbar);
    Vec g(d);
    for (int i = 0; i < d; ++i) g(i) = std::max(eg.values(i), 0.0);
    const double tolg = kNullTol * std::max(1.0, g(0)); // eigenvalues descend
    const double leak =
        kLeakTol * (1.0 + (qv != nullptr ? qv->norm() : 0.0) + rv.norm());
    Vec qt;
    if (qv != nullptr) qt = eg.vectors.transpose() * (*qv);
    Mat rt = eg.vectors.transpose() * rv * eg.vectors;
    double e = 0.0;
    for (int i = 0; i < d; ++i) {
        const bool null_i = g(i) <= tolg;
        if (qv != nullptr) {
            if (!null_i)
                e += qt(i) * qt(i) / g(i);
            else if (strict && std::abs(qt(i)) > leak)
                return inf;
        }
        for (int j = i; j < d; ++j) {
            const bool null_j = g(j) <= tolg;
            const double rij = 0.5 * (rt(i, j) + rt(j, i));
            if (strict && (null_i || null_j) && std::abs(rij) > leak) return inf;
            double w = 0.0;
            if (!null_i) w += 1.0 / g(i);
            if (i != j && !null_j) w += 1.0 / g(j);
            e += rij * rij * w;
        }
    }
    return e;
}

// Discrete action over raw field arrays (shared by path_energy and the
// solver's per-iteration monitor).
double fields_energy(const GridSpec& grid, int msize, int nt,
                     const std::vector<std::vector<Mat>>& G,
                     const std::vector<std::vector<Vec>>& q,
                     const std::vector<std::vector<Mat>>& R, bool strict) {
    const long long cells = grid.cells();
    const double w = grid.cell_volume() / nt;
    const bool use_q = msize == grid.d; // transport is meaningful
    double total = 0.0;
    for (int k = 0; k < nt; ++k)
        for (long long c = 0; c < cells; ++c) {
            Mat gbar = 0.5 * (G[k][c] + G[k + 1][c]);
            const Vec* qp = use_q ? &q[k][c] : nullptr;
            const double e = cell_energy(gbar, qp, R[k][c], strict);
            if (e == std::numeric_limits<double>::infinity()) return e;
            total += w * e;
        }
    return total;
}

void validate_path(const TransportPath& path, const char* who) {
    const std::string op(who);
    if (path.nt < 1) throw_input(op + ": path needs at least one time interval");
    const long long cells = path.grid.cells();
    if (static_cast<int>(path.G.size()) != path.nt + 1 ||
        static_cast<int>(path.q.size()) != path.nt ||
        static_cast<int>(path.R.size()) != path.nt)
        throw_input(op + ": slice counts do not match nt");
    const int d = path.msize();
    if (d < 1 || d > kMaxMatSize - 1) throw_input(op + ": unsupported matrix size");
    for (const MatrixMeasure& m : path.G) {
        if (!(m.grid == path.grid) || m.msize != d)
            throw_input(op + ": node slices disagree on grid or matrix size");
        if (static_cast<long long>(m.values.size()) != cells)
            throw_input(op + ": node slice has wrong cell count");
    }
    for (int k = 0; k < path.nt; ++k) {
        if (static_cast<long long>(path.q[k].size()) != cells ||
            static_cast<long long>(path.R[k].size()) != cells)
            throw_input(op + ": midpoint slice has wrong cell count");
        for (long long c = 0; c < cells; ++c) {
            if (path.q[k][c].size() != path.grid.d)
                throw_input(op + ": transport momentum must be a grid-dimension vector");
            if (path.R[k][c].rows() != d || path.R[k][c].cols() != d)
                throw_input(op + ": reaction momentum has wrong matrix size");
        }
    }
    if (d != path.grid.d) {
        // scalar-on-grid (pure Hellinger) paths carry no transport
        for (int k = 0; k < path.nt; ++k)
            for (long long c = 0; c < cells; ++c)
                if (path.q[k][c].squaredNorm() != 0.0)
                    throw_input(op +
                                ": nonzero transport momentum on a measure whose "
                                "matrix size differs from the grid dimension");
    }
}

// Raw field arrays of the splitting's extended variable. Endpoint G slices
// always hold the problem data; Gc are the midpoint copies the prox acts on.
struct Fields {
    std::vector<std::vector<Mat>> G;
    std::vector<std::vector<Vec>> q;
    std::vector<std::vector<Mat>> R;
    std::vector<std::vector<Mat>> Gc;
};

bool is_zero_measure(const MatrixMeasure& m) {
    for (const Mat& v : m.values)
        if (v.squaredNorm() != 0.0) return false;
    return true;
}

// Strict total order on the raw coefficients; solve() orders its arguments by
// it so that solve(G0, G1) and solve(G1, G0) run the identical iteration.
bool lex_greater(const MatrixMeasure& a, const MatrixMeasure& b) {
    const long long cells = a.grid.cells();
    for (long long c = 0; c < cells; ++c)
        for (int i = 0; i < a.msize; ++i)
            for (int j = 0; j < a.msize; ++j) {
                const double x = a.values[c](i, j);
                const double y = b.values[c](i, j);
                if (x != y) return x > y;
            }
    return false;
}

TransportPath assemble_path(const GridSpec& grid, int msize, int nt, const Fields& f,
                            const MatrixMeasure& G0, const MatrixMeasure& G1,
                            bool clamp_interior) {
    const long long cells = grid.cells();
    TransportPath path;
    path.grid = grid;
    path.nt = nt;
    path.G.reserve(nt + 1);
    path.G.push_back(G0);
    for (int k = 1; k < nt; ++k) {
        MatrixMeasure slice = MatrixMeasure::zeros(grid, msize);
        for (long long c = 0; c < cells; ++c)
            slice.values[c] = clamp_interior ? psd_project(f.G[k][c]) : f.G[k][c];
        path.G.push_back(std::move(slice));
    }
    path.G.push_back(G1);
    path.q = f.q;
    path.R = f.R;
    return path;
}

} // namespace

void SolverConfig::validate() const {
    if (nt < 2) throw_input("solver config: nt must be at least 2");
    if (max_iter < 1) throw_input("solver config: max_iter must be at least 1");
    if (!(theta > 0.0) || theta > 1.0)
        throw_input("solver config: theta must lie in (0, 1]");
    if (!(tol_residual > 0.0) || !(tol_energy > 0.0))
        throw_input("solver config: tolerances must be positive");
    if (!std::isfinite(tau) || !std::isfinite(sigma))
        throw_input("solver config: step sizes must be finite");
}

TransportPath discretize(const MatrixMeasure& G0, const MatrixMeasure& G1,
                         const SolverConfig& cfg) {
    cfg.validate();
    if (!(G0.grid == G1.grid) || G0.msize != G1.msize)
        throw_input("discretize: endpoint measures live on different grids");
    if (cfg.mode == SolverMode::Kb && G0.msize != G0.grid.d)
        throw_input("discretize: kb transport needs matrix size equal to the grid dimension");
    for (const MatrixMeasure* m : {&G0, &G1})
        for (const Mat& v : m->values)
            if (!v.allFinite()) throw_input("discretize: non-finite endpoint measure");

    const GridSpec grid = G0.grid;
    const long long cells = grid.cells();
    const int nt = cfg.nt;
    SqrtPath sp = sqrt_path_energy(G0, G1, nt);

    TransportPath path;
    path.grid = grid;
    path.nt = nt;
    path.G.reserve(nt + 1);
    path.G.push_back(G0);
    for (int k = 1; k < nt; ++k) path.G.push_back(sp.at(static_cast<double>(k) / nt));
    path.G.push_back(G1);
    path.q.assign(nt, std::vector<Vec>(cells, Vec::Zero(grid.d)));
    path.R.assign(nt, std::vector<Mat>(cells));
    for (int k = 0; k < nt; ++k)
        for (long long c = 0; c < cells; ++c)
            path.R[k][c] = (path.G[k + 1].values[c] - path.G[k].values[c]) * static_cast<double>(nt);
    return path;
}

double continuity_residual(const TransportPath& path) {
    validate_path(path, "continuity residual");
    const GridSpec grid = path.grid;
    const long long cells = grid.cells();
    const int nt = path.nt;
    const bool transport = grid.d == path.msize() && !grid.is_pointwise();
    std::unique_ptr<SpectralGrid> fft;
    if (transport) fft = std::make_unique<SpectralGrid>(grid);
    double acc = 0.0;
    for (int k = 0; k < nt; ++k) {
        std::vector<Mat> grads;
        if (transport) grads = fft->grad_sym(path.q[k]);
        for (long long c = 0; c < cells; ++c) {
            Mat res = (path.G[k + 1].values[c] - path.G[k].values[c]) * static_cast<double>(nt) -
                      path.R[k][c];
            if (transport) res += grads[c];
            acc += res.squaredNorm();
        }
    }
    return std::sqrt(acc / (static_cast<double>(nt) * static_cast<double>(cells)));
}

TransportPath project_onto_continuity(const TransportPath& path) {
    validate_path(path, "continuity projection");
    const GridSpec grid = path.grid;
    const long long cells = grid.cells();
    const int nt = path.nt;
    const int d = path.msize();
    ContinuityProjector proj(grid, d, nt, /*with_midpoints=*/false,
                             /*with_velocity=*/grid.d == d);
    Fields f;
    f.G.assign(nt + 1, std::vector<Mat>(cells));
    for (int k = 0; k <= nt; ++k)
        for (long long c = 0; c < cells; ++c) f.G[k][c] = path.G[k].values[c];
    f.q = path.q;
    f.R = path.R;
    proj.project(f.G, f.q, f.R, nullptr);
    return assemble_path(grid, d, nt, f, path.G.front(), path.G.back(),
                         /*clamp_interior=*/false);
}

double path_energy(const TransportPath& path) {
    validate_path(path, "path energy");
    for (const MatrixMeasure& m : path.G)
        for (const Mat& v : m.values)
            if (!v.allFinite()) throw_input("path energy: non-finite node slice");
    return fields_energy(path.grid, path.msize(), path.nt,
                         [&] {
                             std::vector<std::vector<Mat>> g(path.nt + 1);
                             for (int k = 0; k <= path.nt; ++k) g[k] = path.G[k].values;
                             return g;
                         }(),
                         path.q, path.R, /*strict=*/true);
}

MatrixMeasure sample_path(const TransportPath& path, double t) {
    validate_path(path, "path sampling");
    if (!(t >= 0.0 && t <= 1.0)) throw_input("path sampling: t must lie in [0, 1]");
    const double pos = t * path.nt;
    int k = static_cast<int>(std::floor(pos));
    double alpha = pos - k;
    if (k >= path.nt) {
        k = path.nt;
        alpha = 0.0;
    }
    if (alpha == 0.0) return path.G[k];
    MatrixMeasure out = MatrixMeasure::zeros(path.grid, path.msize());
    const long long cells = path.grid.cells();
    for (long long c = 0; c < cells; ++c)
        out.values[c] =
            psd_project((1.0 - alpha) * path.G[k].values[c] + alpha * path.G[k + 1].values[c]);
    return out;
}

SolveResult solve(const MatrixMeasure& A, const MatrixMeasure& B, const SolverConfig& cfg) {
    cfg.validate();
    if (!(A.grid == B.grid) || A.msize != B.msize)
        throw_input("solve: endpoint measures live on different grids");
    if (cfg.mode == SolverMode::Kb && A.msize != A.grid.d)
        throw_input("solve: kb transport needs matrix size equal to the grid dimension");
    for (const MatrixMeasure* m : {&A, &B})
        for (const Mat& v : m->values)
            if (!v.allFinite()) throw_input("solve: non-finite endpoint measure");

    const GridSpec grid = A.grid;
    const long long cells = grid.cells();
    const int d = A.msize;
    const int nt = cfg.nt;

    SolveResult out;
    if (is_zero_measure(A) && is_zero_measure(B)) {
        // the cone apex is a single point; nothing to iterate
        out.path.grid = grid;
        out.path.nt = nt;
        out.path.G.assign(nt + 1, MatrixMeasure::zeros(grid, d));
        out.path.q.assign(nt, std::vector<Vec>(cells, Vec::Zero(grid.d)));
        out.path.R.assign(nt, std::vector<Mat>(cells, Mat::Zero(d, d)));
        out.report.converged = true;
        out.report.tau = cfg.tau;
        out.report.sigma = cfg.sigma;
        return out;
    }

    const bool swapped = lex_greater(A, B);
    const MatrixMeasure& G0 = swapped ? B : A;
    const MatrixMeasure& G1 = swapped ? A : B;

    ContinuityProjector proj(grid, d, nt, /*with_midpoints=*/true,
                             /*with_velocity=*/cfg.mode == SolverMode::Kb);
    const double opn = proj.operator_norm();
    double sig = cfg.sigma > 0.0 ? cfg.sigma : 1.0 / opn;
    double tau = cfg.tau > 0.0 ? cfg.tau
                               : std::min(1.0 / opn, (1.0 - 1e-9) / (sig * opn * opn));
    if (tau * sig * opn * opn > 1.0 + 1e-9) {
        std::ostringstream msg;
        msg << "solve: step sizes violate tau*sigma*|L|^2 < 1 (|L| = " << opn << ")";
        throw_input(msg.str());
    }

    // initial iterate: feasible sqrt-interpolation path, midpoint copies on it
    Fields z;
    {
        TransportPath init = discretize(G0, G1, cfg);
        z.G.assign(nt + 1, std::vector<Mat>(cells));
        for (int k = 0; k <= nt; ++k)
            for (long long c = 0; c < cells; ++c) z.G[k][c] = init.G[k].values[c];
        z.q = std::move(init.q);
        z.R = std::move(init.R);
    }
    z.Gc.assign(nt, std::vector<Mat>(cells));
    for (int k = 0; k < nt; ++k)
        for (long long c = 0; c < cells; ++c)
            z.Gc[k][c] = 0.5 * (z.G[k][c] + z.G[k + 1][c]);

    const bool kbmode = cfg.mode == SolverMode::Kb;
    std::vector<std::vector<Mat>> warm = z.Gc; // per-cell prox warm starts
    Fields y = z;
    Fields w = z;
    const Vec zero_q = Vec::Zero(d);

    const int stride = std::max(1, cfg.max_iter / 512);
    double ewin[10] = {};
    int it = 0;
    bool converged = false;
    double energy = std::numeric_limits<double>::quiet_NaN();
    double gap_rel = std::numeric_limits<double>::quiet_NaN();

    while (it < cfg.max_iter && !converged) {
        ++it;
        y = z;
        proj.project(y.G, y.q, y.R, &y.Gc);

        double ynorm2 = 0.0;
        for (int k = 0; k <= nt; ++k)
            for (long long c = 0; c < cells; ++c) ynorm2 += y.G[k][c].squaredNorm();
        for (int k = 0; k < nt; ++k)
            for (long long c = 0; c < cells; ++c)
                ynorm2 += y.q[k][c].squaredNorm() + y.R[k][c].squaredNorm() +
                          y.Gc[k][c].squaredNorm();
        if (!std::isfinite(ynorm2)) {
            std::ostringstream msg;
            msg << "solve: non-finite iterate at iteration " << it;
            throw_numeric(msg.str());
        }

        double gap2 = 0.0;
        for (int k = 0; k <= nt; ++k)
            for (long long c = 0; c < cells; ++c) {
                w.G[k][c] = 2.0 * y.G[k][c] - z.G[k][c];
                gap2 += (w.G[k][c] - y.G[k][c]).squaredNorm();
            }
        for (int k = 0; k < nt; ++k)
            for (long long c = 0; c < cells; ++c) {
                Mat pGc = 2.0 * y.Gc[k][c] - z.Gc[k][c];
                Mat pR = 2.0 * y.R[k][c] - z.R[k][c];
                Vec pq = kbmode ? Vec(2.0 * y.q[k][c] - z.q[k][c]) : zero_q;
                CellProx cp = cell_prox(pGc, pq, pR, sig, &warm[k][c]);
                warm[k][c] = cp.G;
                if (kbmode) {
                    gap2 += (cp.q - y.q[k][c]).squaredNorm();
                    w.q[k][c] = std::move(cp.q);
                }
                gap2 += (cp.G - y.Gc[k][c]).squaredNorm() +
                        (cp.R - y.R[k][c]).squaredNorm();
                w.Gc[k][c] = std::move(cp.G);
                w.R[k][c] = std::move(cp.R);
            }

        gap_rel = std::sqrt(gap2) / (1.0 + std::sqrt(ynorm2));
        energy = fields_energy(grid, d, nt, y.G, y.q, y.R, /*strict=*/false);
        if (!std::isfinite(energy) || !std::isfinite(gap_rel)) {
            std::ostringstream msg;
            msg << "solve: non-finite energy or gap at iteration " << it;
            throw_numeric(msg.str());
        }

        for (int k = 1; k < nt; ++k)
            for (long long c = 0; c < cells; ++c)
                z.G[k][c] += cfg.theta * (w.G[k][c] - y.G[k][c]);
        for (int k = 0; k < nt; ++k)
            for (long long c = 0; c < cells; ++c) {
                if (kbmode) z.q[k][c] += cfg.theta * (w.q[k][c] - y.q[k][c]);
                z.R[k][c] += cfg.theta * (w.R[k][c] - y.R[k][c]);
                z.Gc[k][c] += cfg.theta * (w.Gc[k][c] - y.Gc[k][c]);
            }

        const int slot = (it - 1) % 10;
        const bool stagnant =
            it > 10 && std::abs(energy - ewin[slot]) <=
                           cfg.tol_energy * std::max(1.0, std::abs(energy));
        ewin[slot] = energy;
        converged = (gap_rel <= cfg.tol_residual && stagnant) || gap_rel <= 1e-13;

        if (it == 1 || it % stride == 0 || converged || it == cfg.max_iter)
            if (out.report.log.empty() || out.report.log.back().iter != it)
                out.report.log.push_back({it, energy, gap_rel});
    }

    out.path = assemble_path(grid, d, nt, y, G0, G1, /*clamp_interior=*/true);
    out.report.energy = path_energy(out.path);
    out.report.residual = continuity_residual(out.path);
    out.report.distance = std::sqrt(out.report.energy);
    out.report.iterations = it;
    out.report.converged = converged && std::isfinite(out.report.energy);
    out.report.tau = tau;
    out.report.sigma = sig;
    out.report.operator_norm = opn;

    if (swapped) {
        std::reverse(out.path.G.begin(), out.path.G.end());
        std::reverse(out.path.q.begin(), out.path.q.end());
        std::reverse(out.path.R.begin(), out.path.R.end());
        for (auto& slice : out.path.q)
            for (Vec& v : slice) v = -v;
        for (auto& slice : out.path.R)
            for (Mat& m : slice) m = -m;
    }
    return out;
}

} // namespace kb
