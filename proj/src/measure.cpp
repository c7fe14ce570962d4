#include "kbures/measure.hpp"

#include "kbures/linalg.hpp"

#include <cmath>
#include <random>

namespace kb {

namespace {
// d * n^d capped so a handful of time slices stays comfortably in memory.
constexpr long long kMemoryCap = 1LL << 22;
} // namespace

GridSpec GridSpec::torus(int d, int n) {
    if (d < 1 || d > 3) throw_input("GridSpec: d must be 1, 2 or 3");
    if (n < 2) throw_input("GridSpec: n >= 2 (use pointwise() for the 1-cell mode)");
    if (n % 2 != 0) throw_input("GridSpec: n must be even (spectral Nyquist handling)");
    long long cells = 1;
    for (int a = 0; a < d; ++a) cells *= n;
    if (static_cast<long long>(d) * cells > kMemoryCap)
        throw_input("GridSpec: d*n^d exceeds the memory cap");
    GridSpec g;
    g.d = d;
    g.n = n;
    return g;
}

GridSpec GridSpec::pointwise(int d) {
    if (d < 1 || d > 3) throw_input("GridSpec: d must be 1, 2 or 3");
    GridSpec g;
    g.d = d;
    g.n = 1;
    return g;
}

long long GridSpec::cells() const {
    long long c = 1;
    for (int a = 0; a < d; ++a) c *= n;
    return c;
}

double GridSpec::cell_volume() const {
    return 1.0 / static_cast<double>(cells());
}

void GridSpec::decode(long long flat, int* idx) const {
    for (int a = d - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(flat % n);
        flat /= n;
    }
}

long long GridSpec::encode(const int* idx) const {
    long long flat = 0;
    for (int a = 0; a < d; ++a) flat = flat * n + idx[a];
    return flat;
}

double GridSpec::center(long long flat, int axis) const {
    int idx[3];
    decode(flat, idx);
    return (idx[axis] + 0.5) / n;
}

MatrixMeasure MatrixMeasure::zeros(const GridSpec& g, int msize) {
    if (msize < 1 || msize > kMaxMatSize) throw_input("MatrixMeasure: bad matrix size");
    if (!g.is_pointwise() && msize != g.d)
        throw_input("MatrixMeasure: matrix size must equal grid dimension");
    MatrixMeasure m;
    m.grid = g;
    m.msize = msize;
    m.values.assign(g.cells(), Mat::Zero(msize, msize));
    return m;
}

MatrixMeasure MatrixMeasure::constant(const GridSpec& g, const Mat& P) {
    MatrixMeasure m = zeros(g, static_cast<int>(P.rows()));
    if (P.rows() != P.cols()) throw_input("MatrixMeasure: P must be square");
    Mat Ps = 0.5 * (P + Mat(P.transpose()));
    for (auto& v : m.values) v = Ps;
    return m;
}

std::optional<ValidationIssue> find_invalid_cell(const MatrixMeasure& G) {
    for (long long c = 0; c < static_cast<long long>(G.values.size()); ++c) {
        const Mat& A = G.values[c];
        if (A.rows() != G.msize || A.cols() != G.msize)
            return ValidationIssue{c, "matrix size mismatch"};
        if (!A.allFinite()) return ValidationIssue{c, "non-finite entries"};
        const double scale = 1.0 + A.cwiseAbs().maxCoeff();
        if ((A - Mat(A.transpose())).cwiseAbs().maxCoeff() > 1e-12 * scale)
            return ValidationIssue{c, "not symmetric"};
        SymEigen eg = sym_eigen(A);
        const double lmax = eg.values(0);
        const double lmin = eg.values(G.msize - 1);
        if (lmin < -1e-10 * std::max(1.0, lmax))
            return ValidationIssue{c, "not positive-semidefinite, lambda_min = " +
                                          std::to_string(lmin)};
    }
    return std::nullopt;
}

double total_mass(const MatrixMeasure& G) {
    double tr = 0.0;
    for (const auto& v : G.values) tr += v.trace();
    return tr * G.grid.cell_volume();
}

std::pair<MatrixMeasure, double> normalize_to_unit_mass(const MatrixMeasure& G) {
    const double m = total_mass(G);
    if (!(m > 0.0)) throw_domain("normalize_to_unit_mass: zero (or negative) mass");
    const double r = std::sqrt(m);
    MatrixMeasure Ghat = G;
    for (auto& v : Ghat.values) v /= m;
    return {Ghat, r};
}

MatrixMeasure scale_measure(const MatrixMeasure& Ghat, double r) {
    if (!(r >= 0.0)) throw_input("scale_measure: r must be >= 0");
    MatrixMeasure G = Ghat;
    const double r2 = r * r;
    for (auto& v : G.values) v *= r2;
    return G;
}

namespace {

double torus_dist2(const GridSpec& g, long long cell, const Vec& c) {
    double r2 = 0.0;
    for (int a = 0; a < g.d; ++a) {
        double dx = g.center(cell, a) - c(a);
        dx -= std::round(dx);
        r2 += dx * dx;
    }
    return r2;
}

MatrixMeasure synth_random(const GridSpec& grid, std::uint64_t seed) {
    // Smooth SPD field exp(S(x)); S has Fourier modes with |xi|_inf <= 2,
    // coefficients ~ N(0, amp^2/(1+|xi|^2)^2) drawn in a fixed order.
    const int d = grid.d;
    const int s = sym_size(d);
    struct Mode {
        int xi[3];
    };
    std::vector<Mode> modes;
    const int K = 2;
    int xi[3] = {0, 0, 0};
    auto push_all = [&](auto&& self, int axis) -> void {
        if (axis == d) {
            // keep one representative per +-xi pair, drop the zero mode
            int first = 0;
            for (int a = 0; a < d; ++a)
                if (xi[a] != 0) {
                    first = xi[a];
                    break;
                }
            if (first > 0) {
                Mode m{};
                for (int a = 0; a < d; ++a) m.xi[a] = xi[a];
                modes.push_back(m);
            }
            return;
        }
        for (int v = -K; v <= K; ++v) {
            xi[axis] = v;
            self(self, axis + 1);
        }
    };
    push_all(push_all, 0);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double amp = 0.55;

    // per sym component: constant term plus (a cos + b sin) per mode
    std::vector<double> c0(s);
    std::vector<std::vector<double>> ca(s), cb(s);
    for (int comp = 0; comp < s; ++comp) {
        c0[comp] = 0.4 * normal(rng);
        ca[comp].resize(modes.size());
        cb[comp].resize(modes.size());
        for (std::size_t m = 0; m < modes.size(); ++m) {
            double n2 = 0.0;
            for (int a = 0; a < d; ++a) n2 += modes[m].xi[a] * modes[m].xi[a];
            const double sd = amp / (1.0 + n2);
            ca[comp][m] = sd * normal(rng);
            cb[comp][m] = sd * normal(rng);
        }
    }

    MatrixMeasure out = MatrixMeasure::zeros(grid, d);
    const auto& idx = sym_index(d);
    std::vector<double> comp_val(s);
    for (long long cell = 0; cell < grid.cells(); ++cell) {
        for (int comp = 0; comp < s; ++comp) {
            double v = c0[comp];
            for (std::size_t m = 0; m < modes.size(); ++m) {
                double phase = 0.0;
                for (int a = 0; a < d; ++a)
                    phase += modes[m].xi[a] * grid.center(cell, a);
                phase *= 2.0 * M_PI;
                v += ca[comp][m] * std::cos(phase) + cb[comp][m] * std::sin(phase);
            }
            comp_val[comp] = v;
        }
        Mat S = Mat::Zero(d, d);
        for (int comp = 0; comp < s; ++comp) {
            S(idx[comp].i, idx[comp].j) = comp_val[comp];
            S(idx[comp].j, idx[comp].i) = comp_val[comp];
        }
        out.values[cell] = psd_apply_fn(S, SpectralFn::Exp);
    }
    return out;
}

} // namespace

MatrixMeasure synth_measure(const GridSpec& grid, const Generator& gen, std::uint64_t seed) {
    if (gen.kind == Generator::Kind::Random) return synth_random(grid, seed);

    if (gen.P.rows() != grid.d || gen.P.cols() != grid.d)
        throw_input("synth_measure: P must be d x d for this grid");
    Mat P = 0.5 * (gen.P + Mat(gen.P.transpose()));

    MatrixMeasure out = MatrixMeasure::zeros(grid, grid.d);
    switch (gen.kind) {
        case Generator::Kind::Constant: {
            for (auto& v : out.values) v = P;
            break;
        }
        case Generator::Kind::Bump: {
            Vec c = gen.center;
            if (c.size() == 0) c = Vec::Constant(grid.d, 0.5);
            if (c.size() != grid.d) throw_input("synth_measure: center must have d entries");
            if (!(gen.width >= 0.0)) throw_input("synth_measure: width must be >= 0");
            for (long long cell = 0; cell < grid.cells(); ++cell) {
                double b = 0.0;
                if (gen.width > 0.0)
                    b = std::exp(-torus_dist2(grid, cell, c) / (2.0 * gen.width * gen.width));
                out.values[cell] = (1.0 + b) * P;
            }
            break;
        }
        case Generator::Kind::Rotating: {
            if (grid.d < 2) throw_input("synth_measure: rotating requires d >= 2");
            if (gen.axis < 0 || gen.axis >= grid.d)
                throw_input("synth_measure: rotation axis out of range");
            for (long long cell = 0; cell < grid.cells(); ++cell) {
                const double th = 2.0 * M_PI * grid.center(cell, gen.axis);
                Mat Q = Mat::Identity(grid.d, grid.d);
                Q(0, 0) = std::cos(th);
                Q(0, 1) = -std::sin(th);
                Q(1, 0) = std::sin(th);
                Q(1, 1) = std::cos(th);
                Mat G = Q * P * Q.transpose();
                out.values[cell] = 0.5 * (G + Mat(G.transpose()));
            }
            break;
        }
        case Generator::Kind::Random:
            break; // handled above
    }
    return out;
}

MatrixMeasure orthogonal_conjugate(const MatrixMeasure& G, const Mat& Q) {
    const int d = G.grid.d;
    if (G.msize != d)
        throw_input("orthogonal_conjugate: matrix size must equal grid dimension");
    if (Q.rows() != d || Q.cols() != d)
        throw_input("orthogonal_conjugate: Q must be d x d");
    // signed permutation: exactly one +-1 per row and per column
    int col_of_row[3] = {-1, -1, -1};
    bool col_used[3] = {false, false, false};
    double sign_of_row[3] = {0, 0, 0};
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            const double v = Q(i, j);
            if (std::abs(v) <= 1e-12) continue;
            if (std::abs(std::abs(v) - 1.0) > 1e-12 || col_of_row[i] != -1 || col_used[j])
                throw_input("orthogonal_conjugate: Q is not a grid symmetry "
                            "(signed permutation)");
            col_of_row[i] = j;
            col_used[j] = true;
            sign_of_row[i] = v > 0 ? 1.0 : -1.0;
        }
        if (col_of_row[i] == -1)
            throw_input("orthogonal_conjugate: Q is not a grid symmetry (zero row)");
    }

    MatrixMeasure out = MatrixMeasure::zeros(G.grid, d);
    const int n = G.grid.n;
    int idx[3], nidx[3];
    for (long long cell = 0; cell < G.grid.cells(); ++cell) {
        G.grid.decode(cell, idx);
        // x* = Qx maps cell centers to cell centers: component k of x* is
        // +-x_{col_of_row[k]}, and -(i+1/2)/n == (n-1-i+1/2)/n mod 1.
        for (int k = 0; k < d; ++k) {
            const int src = idx[col_of_row[k]];
            nidx[k] = sign_of_row[k] > 0 ? src : n - 1 - src;
        }
        Mat V = Q * G.values[cell] * Q.transpose();
        out.values[G.grid.encode(nidx)] = 0.5 * (V + Mat(V.transpose()));
    }
    return out;
}

} // namespace kb
