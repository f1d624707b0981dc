#include "ratekit/numcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ratekit::numcore {

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double norm2(std::span<const double> v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double norm_inf(std::span<const double> v) {
    double s = 0;
    for (double x : v) s = std::max(s, std::fabs(x));
    return s;
}

double mat_norm1(const Mat& m) {
    double best = 0;
    for (int j = 0; j < m.cols; ++j) {
        double c = 0;
        for (int i = 0; i < m.rows; ++i) c += std::fabs(m(i, j));
        best = std::max(best, c);
    }
    return best;
}

Lu::Lu(Mat m) : m_(std::move(m)), piv_(m_.rows) {
    if (m_.rows != m_.cols) throw NumericsError("LU requires a square matrix");
    const int n = m_.rows;
    std::iota(piv_.begin(), piv_.end(), 0);
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::fabs(m_(k, k));
        for (int i = k + 1; i < n; ++i) {
            const double v = std::fabs(m_(i, k));
            if (v > best) {
                best = v;
                p = i;
            }
        }
        if (best == 0.0) throw NumericsError("singular matrix in LU");
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(m_(k, j), m_(p, j));
            std::swap(piv_[k], piv_[p]);
        }
        const double inv = 1.0 / m_(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double f = m_(i, k) * inv;
            m_(i, k) = f;
            for (int j = k + 1; j < n; ++j) m_(i, j) -= f * m_(k, j);
        }
    }
}

Vec Lu::solve(Vec b) const {
    const int n = m_.rows;
    Vec y(n);
    for (int i = 0; i < n; ++i) y[i] = b[piv_[i]];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < i; ++j) y[i] -= m_(i, j) * y[j];
    for (int i = n - 1; i >= 0; --i) {
        for (int j = i + 1; j < n; ++j) y[i] -= m_(i, j) * y[j];
        y[i] /= m_(i, i);
    }
    return y;
}

Mat Lu::inverse() const {
    const int n = m_.rows;
    Mat inv(n, n);
    for (int j = 0; j < n; ++j) {
        Vec e(n, 0.0);
        e[j] = 1.0;
        Vec col = solve(std::move(e));
        for (int i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

double condition_estimate(const Mat& m) {
    try {
        Lu lu(m);
        return mat_norm1(m) * mat_norm1(lu.inverse());
    } catch (const NumericsError&) {
        return std::numeric_limits<double>::infinity();
    }
}

// ---------------------------------------------------------------------------
// Dormand-Prince 5(4)
// ---------------------------------------------------------------------------

namespace {

// Butcher tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense output coefficients (Hairer, Norsett, Wanner)
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

bool finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

Vec dense_eval(const std::array<Vec, 5>& c, double theta) {
    const std::size_t n = c[0].size();
    const double th1 = 1.0 - theta;
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = c[0][i] +
                 theta * (c[1][i] + th1 * (c[2][i] + theta * (c[3][i] + th1 * c[4][i])));
    return out;
}

}  // namespace

Vec Trajectory::at(double t) const {
    if (t_.empty()) throw NumericsError("empty trajectory");
    if (t <= t_.front()) return x_.front();
    if (t >= t_.back()) return x_.back();
    const auto it = std::upper_bound(t_.begin(), t_.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - t_.begin()) - 1;
    if (k >= cont_.size()) return x_.back();
    const double h = t_[k + 1] - t_[k];
    return dense_eval(cont_[k], (t - t_[k]) / h);
}

Trajectory integrate(const FieldFn& field, Vec x0, double t0, double t_end,
                     const IntegrateOptions& opts, const std::vector<EventFn>& events) {
    if (!(t_end > t0)) throw NumericsError("integrate: t_end must exceed t0");
    if (!(opts.rel_tol > 0) || !(opts.abs_tol > 0))
        throw NumericsError("integrate: tolerances must be positive");

    const std::size_t n = x0.size();
    Trajectory trj;
    trj.t_.push_back(t0);
    trj.x_.push_back(x0);

    auto eval = [&](double t, const Vec& x, Vec& dx) {
        dx.assign(n, 0.0);
        field(t, x, dx);
    };

    Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), err(n);
    eval(t0, x0, k1);
    if (!finite(k1)) {
        trj.reason_ = StopReason::StepFailure;
        return trj;
    }

    const double span = t_end - t0;
    double h = opts.initial_step > 0 ? opts.initial_step : span / 100.0;
    if (opts.max_step > 0) h = std::min(h, opts.max_step);
    h = std::min(h, span);
    const double hmin = 1e-14 * std::max(std::fabs(t0), std::fabs(t_end)) + 1e-300;

    std::vector<double> ev_prev(events.size());
    for (std::size_t j = 0; j < events.size(); ++j) ev_prev[j] = events[j](t0, x0);

    double t = t0;
    Vec y = std::move(x0);
    long steps = 0;

    while (t < t_end) {
        if (++steps > opts.max_steps) {
            trj.reason_ = StopReason::StepFailure;
            return trj;
        }
        if (h < hmin) {
            trj.reason_ = StopReason::StepFailure;
            return trj;
        }
        bool last = false;
        if (t + h >= t_end) {
            h = t_end - t;
            last = true;
        }

        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * a21 * k1[i];
        eval(t + c2 * h, ytmp, k2);
        for (std::size_t i = 0; i < n; ++i) ytmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        eval(t + c3 * h, ytmp, k3);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        eval(t + c4 * h, ytmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        eval(t + c5 * h, ytmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            ytmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                  a65 * k5[i]);
        eval(t + h, ytmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            ynew[i] = y[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                  a76 * k6[i]);
        eval(t + h, ynew, k7);

        bool ok = finite(k2) && finite(k3) && finite(k4) && finite(k5) && finite(k6) &&
                  finite(k7) && finite(ynew);
        double err_norm = 0.0;
        if (ok) {
            for (std::size_t i = 0; i < n; ++i) {
                const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                      e6 * k6[i] + e7 * k7[i]);
                const double sc =
                    opts.abs_tol + opts.rel_tol * std::max(std::fabs(y[i]), std::fabs(ynew[i]));
                err_norm += (e / sc) * (e / sc);
            }
            err_norm = std::sqrt(err_norm / static_cast<double>(n));
        }

        if (!ok || err_norm > 1.0) {
            const double shrink =
                ok ? std::max(0.2, 0.9 * std::pow(err_norm, -0.2)) : 0.5;
            h *= shrink;
            continue;
        }

        // accept: store dense coefficients for [t, t+h]
        std::array<Vec, 5> cont;
        for (auto& c : cont) c.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double ydiff = ynew[i] - y[i];
            const double bspl = h * k1[i] - ydiff;
            cont[0][i] = y[i];
            cont[1][i] = ydiff;
            cont[2][i] = bspl;
            cont[3][i] = ydiff - h * k7[i] - bspl;
            cont[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] +
                              d7 * k7[i]);
        }

        const double t_new = last ? t_end : t + h;

        // event localisation on the accepted step via bisection on the dense
        // output, refined to event_refine_tol in t
        double t_event = std::numeric_limits<double>::infinity();
        int ev_idx = -1;
        for (std::size_t j = 0; j < events.size(); ++j) {
            const double g0 = ev_prev[j];
            const double g1 = events[j](t_new, ynew);
            if (g0 == 0.0 || !(g0 * g1 <= 0.0)) {  // NaN-safe: no crossing
                ev_prev[j] = g1;
                continue;
            }
            if (g1 == 0.0) {
                if (t_new < t_event) {
                    t_event = t_new;
                    ev_idx = static_cast<int>(j);
                }
                ev_prev[j] = g1;
                continue;
            }
            double lo = t, hi = t_new, glo = g0;
            while (hi - lo > opts.event_refine_tol) {
                const double mid = 0.5 * (lo + hi);
                const double gm =
                    events[j](mid, dense_eval(cont, (mid - t) / (t_new - t)));
                if (glo * gm <= 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            if (hi < t_event) {
                t_event = hi;
                ev_idx = static_cast<int>(j);
            }
            ev_prev[j] = g1;
        }

        if (ev_idx >= 0) {
            Vec xe = dense_eval(cont, (t_event - t) / (t_new - t));
            trj.cont_.push_back(cont);
            trj.t_.push_back(t_event);
            trj.x_.push_back(std::move(xe));
            trj.reason_ = StopReason::Event;
            trj.event_index_ = ev_idx;
            return trj;
        }

        trj.cont_.push_back(std::move(cont));
        trj.t_.push_back(t_new);
        trj.x_.push_back(ynew);

        if (norm_inf(ynew) > opts.blowup_norm) {
            trj.reason_ = StopReason::Blowup;
            return trj;
        }

        t = t_new;
        y = ynew;
        std::swap(k1, k7);  // FSAL

        const double grow =
            err_norm == 0.0 ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(err_norm, -0.2)));
        h *= grow;
        if (opts.max_step > 0) h = std::min(h, opts.max_step);
    }

    trj.reason_ = StopReason::TimeLimit;
    return trj;
}

// ---------------------------------------------------------------------------
// Newton
// ---------------------------------------------------------------------------

NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, Vec x0,
                          const NewtonOptions& opts) {
    NewtonResult out;
    out.x = std::move(x0);
    Vec r;
    try {
        r = residual(out.x);
    } catch (const Error&) {
        return out;
    }
    out.residual_norm = norm2(r);
    // iterate past the tolerance while the residual keeps dropping: near-fold
    // roots need the extra polish for a trustworthy eigenvalue classification
    for (int it = 0; it < opts.max_iter; ++it) {
        out.iterations = it;
        if (out.residual_norm == 0.0) break;
        Mat j;
        try {
            j = jacobian(out.x);
        } catch (const Error&) {
            break;
        }
        if (condition_estimate(j) > opts.cond_limit) {
            out.singular = out.residual_norm > opts.tol;
            break;
        }
        Vec rhs(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) rhs[i] = -r[i];
        Vec dx;
        try {
            dx = Lu(j).solve(std::move(rhs));
        } catch (const NumericsError&) {
            out.singular = out.residual_norm > opts.tol;
            break;
        }
        // halving line search on the residual norm
        const double prev_norm = out.residual_norm;
        double step = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls) {
            Vec cand(out.x.size());
            for (std::size_t i = 0; i < cand.size(); ++i) cand[i] = out.x[i] + step * dx[i];
            Vec rc;
            try {
                rc = residual(cand);
            } catch (const Error&) {
                step *= 0.5;
                continue;
            }
            const double nc = norm2(rc);
            if (std::isfinite(nc) && nc < out.residual_norm) {
                out.x = std::move(cand);
                r = std::move(rc);
                out.residual_norm = nc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
        if (out.residual_norm <= opts.tol && out.residual_norm > 0.25 * prev_norm) break;
    }
    out.converged = out.residual_norm <= opts.tol;
    return out;
}

Vec newton(const ResidualFn& residual, const JacobianFn& jacobian, Vec x0,
           const NewtonOptions& opts) {
    NewtonResult r = newton_solve(residual, jacobian, std::move(x0), opts);
    if (r.singular) throw NumericsError("newton: singular Jacobian");
    if (!r.converged) throw NumericsError("newton: no convergence");
    return r.x;
}

// ---------------------------------------------------------------------------
// Eigen solver: complex Hessenberg + Wilkinson-shifted QR, eigenvectors by
// inverse iteration on the original matrix.
// ---------------------------------------------------------------------------

namespace {

using CMat = std::vector<std::vector<Complex>>;

CMat to_complex(const Mat& a) {
    CMat m(a.rows, std::vector<Complex>(a.cols));
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) m[i][j] = a(i, j);
    return m;
}

// reduce to upper Hessenberg form by stabilised elimination
void hessenberg(CMat& m) {
    const int n = static_cast<int>(m.size());
    for (int k = 1; k < n - 1; ++k) {
        int p = k;
        double best = std::abs(m[k][k - 1]);
        for (int i = k + 1; i < n; ++i)
            if (std::abs(m[i][k - 1]) > best) {
                best = std::abs(m[i][k - 1]);
                p = i;
            }
        if (best == 0.0) continue;
        if (p != k) {
            std::swap(m[p], m[k]);
            for (int i = 0; i < n; ++i) std::swap(m[i][p], m[i][k]);
        }
        for (int i = k + 1; i < n; ++i) {
            const Complex f = m[i][k - 1] / m[k][k - 1];
            if (f == Complex(0, 0)) continue;
            for (int j = k - 1; j < n; ++j) m[i][j] -= f * m[k][j];
            for (int j = 0; j < n; ++j) m[j][k] += f * m[j][i];
        }
    }
}

// shifted QR on the Hessenberg matrix via Givens rotations; returns the
// eigenvalues (unordered)
std::vector<Complex> hessenberg_qr(CMat h) {
    const int n = static_cast<int>(h.size());
    std::vector<Complex> vals(n);
    int hi = n - 1;
    int iter = 0;
    const int iter_cap = 60 * n + 200;
    while (hi >= 0) {
        // deflate
        int lo = hi;
        while (lo > 0) {
            const double off = std::abs(h[lo][lo - 1]);
            const double diag = std::abs(h[lo - 1][lo - 1]) + std::abs(h[lo][lo]);
            if (off <= 1e-16 * (diag + 1e-300)) {
                h[lo][lo - 1] = 0;
                break;
            }
            --lo;
        }
        if (lo == hi) {
            vals[hi] = h[hi][hi];
            --hi;
            iter = 0;
            continue;
        }
        if (++iter > iter_cap) throw NumericsError("eigen: QR iteration cap reached");

        // Wilkinson shift from the trailing 2x2 block
        const Complex a = h[hi - 1][hi - 1], b = h[hi - 1][hi], c = h[hi][hi - 1],
                      d = h[hi][hi];
        const Complex tr = a + d;
        const Complex det = a * d - b * c;
        const Complex disc = std::sqrt(tr * tr - 4.0 * det);
        Complex mu1 = 0.5 * (tr + disc), mu2 = 0.5 * (tr - disc);
        Complex shift = (std::abs(mu1 - d) < std::abs(mu2 - d)) ? mu1 : mu2;
        if (iter % 11 == 10)  // exceptional shift against stagnation
            shift = Complex(std::abs(h[hi][hi - 1]) + std::abs(h[hi - 1][hi - 2 >= 0 ? hi - 2 : 0]), 0);

        for (int i = lo; i <= hi; ++i) h[i][i] -= shift;

        // QR sweep with Givens rotations
        std::vector<Complex> cs(hi), sn(hi);
        for (int k = lo; k < hi; ++k) {
            const Complex x = h[k][k], y = h[k + 1][k];
            const double r = std::hypot(std::abs(x), std::abs(y));
            if (r == 0.0) {
                cs[k] = 1;
                sn[k] = 0;
                continue;
            }
            const Complex cc = x / r, ss = y / r;
            cs[k] = cc;
            sn[k] = ss;
            for (int j = k; j <= hi; ++j) {
                const Complex t1 = h[k][j], t2 = h[k + 1][j];
                h[k][j] = std::conj(cc) * t1 + std::conj(ss) * t2;
                h[k + 1][j] = -ss * t1 + cc * t2;
            }
        }
        for (int k = lo; k < hi; ++k) {
            const Complex cc = cs[k], ss = sn[k];
            const int top = lo;
            for (int i = top; i <= std::min(k + 2, hi); ++i) {
                const Complex t1 = h[i][k], t2 = h[i][k + 1];
                h[i][k] = t1 * cc + t2 * ss;
                h[i][k + 1] = -t1 * std::conj(ss) + t2 * std::conj(cc);
            }
        }
        for (int i = lo; i <= hi; ++i) h[i][i] += shift;
    }
    return vals;
}

// solve (A - mu I) x = b in complex arithmetic with partial pivoting
struct CLu {
    explicit CLu(CMat m) : m_(std::move(m)), piv_(m_.size()) {
        const int n = static_cast<int>(m_.size());
        std::iota(piv_.begin(), piv_.end(), 0);
        for (int k = 0; k < n; ++k) {
            int p = k;
            double best = std::abs(m_[k][k]);
            for (int i = k + 1; i < n; ++i)
                if (std::abs(m_[i][k]) > best) {
                    best = std::abs(m_[i][k]);
                    p = i;
                }
            if (best == 0.0) {
                m_[k][k] = 1e-300;  // keep factorisation alive for inverse iteration
                best = 1e-300;
            }
            if (p != k) {
                std::swap(m_[k], m_[p]);
                std::swap(piv_[k], piv_[p]);
            }
            for (int i = k + 1; i < n; ++i) {
                const Complex f = m_[i][k] / m_[k][k];
                m_[i][k] = f;
                for (int j = k + 1; j < n; ++j) m_[i][j] -= f * m_[k][j];
            }
        }
    }

    std::vector<Complex> solve(const std::vector<Complex>& b) const {
        const int n = static_cast<int>(m_.size());
        std::vector<Complex> y(n);
        for (int i = 0; i < n; ++i) y[i] = b[piv_[i]];
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < i; ++j) y[i] -= m_[i][j] * y[j];
        for (int i = n - 1; i >= 0; --i) {
            for (int j = i + 1; j < n; ++j) y[i] -= m_[i][j] * y[j];
            y[i] /= m_[i][i];
        }
        return y;
    }

    CMat m_;
    std::vector<int> piv_;
};

double cnorm(const std::vector<Complex>& v) {
    double s = 0;
    for (const auto& z : v) s += std::norm(z);
    return std::sqrt(s);
}

}  // namespace

double EigenDecomposition::max_real() const {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& v : values) m = std::max(m, v.real());
    return m;
}

double EigenDecomposition::min_abs_real() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& v : values) m = std::min(m, std::fabs(v.real()));
    return m;
}

EigenDecomposition eigen(const Mat& a) {
    if (a.rows != a.cols) throw NumericsError("eigen: square matrix required");
    if (a.rows > 64) throw NumericsError("eigen: dimension above 64");
    for (double x : a.a)
        if (!std::isfinite(x)) throw NumericsError("eigen: non-finite entry");
    const int n = a.rows;

    EigenDecomposition out;
    if (n == 0) return out;
    if (n == 1) {
        out.values = {Complex(a(0, 0), 0)};
        out.vectors = {{Complex(1, 0)}};
        return out;
    }

    CMat h = to_complex(a);
    hessenberg(h);
    out.values = hessenberg_qr(std::move(h));
    std::sort(out.values.begin(), out.values.end(), [](const Complex& x, const Complex& y) {
        if (x.real() != y.real()) return x.real() > y.real();
        return x.imag() > y.imag();
    });

    const double scale = mat_norm1(a) + 1e-300;
    const CMat ac = to_complex(a);
    out.vectors.resize(n);
    for (int k = 0; k < n; ++k) {
        // perturb the shift slightly off the eigenvalue so the solve stays
        // well-posed; repeated eigenvalues get distinct perturbations
        int repeat = 0;
        for (int j = 0; j < k; ++j)
            if (std::abs(out.values[j] - out.values[k]) < 1e-8 * scale) ++repeat;
        const Complex mu =
            out.values[k] + scale * 1e-11 * Complex(1.0 + repeat, 0.7 * (repeat + 1));
        CMat shifted = ac;
        for (int i = 0; i < n; ++i) shifted[i][i] -= mu;
        CLu lu(std::move(shifted));

        std::vector<Complex> v(n);
        for (int i = 0; i < n; ++i)
            v[i] = Complex(std::cos(0.77 * (i + 1) * (k + 1)), std::sin(0.41 * (i + 2) * (k + 1)));
        double nv = cnorm(v);
        for (auto& z : v) z /= nv;

        for (int it = 0; it < 8; ++it) {
            v = lu.solve(v);
            // bias repeated eigenvalues toward fresh directions
            for (int j = 0; j < k; ++j) {
                if (std::abs(out.values[j] - out.values[k]) < 1e-8 * scale) {
                    Complex proj = 0;
                    for (int i = 0; i < n; ++i) proj += std::conj(out.vectors[j][i]) * v[i];
                    for (int i = 0; i < n; ++i) v[i] -= proj * out.vectors[j][i];
                }
            }
            nv = cnorm(v);
            if (nv == 0.0 || !std::isfinite(nv)) break;
            for (auto& z : v) z /= nv;
            // residual check
            std::vector<Complex> av(n, 0);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) av[i] += ac[i][j] * v[j];
            for (int i = 0; i < n; ++i) av[i] -= out.values[k] * v[i];
            if (cnorm(av) <= 1e-10 * scale) break;
        }

        // rotate the phase so the dominant component is real and positive
        int dom = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(v[i]) > std::abs(v[dom])) dom = i;
        if (std::abs(v[dom]) > 0) {
            const Complex phase = std::conj(v[dom]) / std::abs(v[dom]);
            for (auto& z : v) z *= phase;
        }
        out.vectors[k] = std::move(v);
    }
    return out;
}

Vec real_eigenvector(const EigenDecomposition& d, int index) {
    const auto& v = d.vectors[index];
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i].real();
    const double n = norm2(out);
    if (n == 0.0) throw NumericsError("real_eigenvector: zero real part");
    int dom = 0;
    for (std::size_t i = 1; i < out.size(); ++i)
        if (std::fabs(out[i]) > std::fabs(out[dom])) dom = static_cast<int>(i);
    const double sign = out[dom] >= 0 ? 1.0 : -1.0;
    for (double& x : out) x = sign * x / n;
    return out;
}

}  // namespace ratekit::numcore
