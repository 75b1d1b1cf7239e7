#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "mim/common.hpp"
#include "mim/stats.hpp"

namespace mim::fit {

// ---------------------------------------------------------------------------
// Weighted log-log power-law fit: y = prefactor * x^exponent.

struct PowerFit {
    double prefactor = 0.0;
    double exponent = 0.0;
    // Covariance of (log prefactor, exponent) from the weighted LS normal
    // equations.
    std::array<std::array<double, 2>, 2> cov{};
    double prefactor_se() const { return prefactor * std::sqrt(cov[0][0]); }
    double exponent_se() const { return std::sqrt(cov[1][1]); }
    std::int64_t n_points = 0;
};

// Bins with mean <= 0 are excluded; throws InsufficientData when fewer
// than two usable points remain. Weights are 1/SE^2 in log space
// (se_log = se/mean); se entries of 0 get unit weight.
inline PowerFit fit_power_curve(const std::vector<double>& x, const std::vector<double>& y,
                                const std::vector<double>& se) {
    double s_w = 0, s_wx = 0, s_wy = 0, s_wxx = 0, s_wxy = 0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(y[i] > 0.0) || !(x[i] > 0.0)) continue;
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        const double se_log = se.empty() ? 0.0 : se[i] / y[i];
        const double w = se_log > 0.0 ? 1.0 / (se_log * se_log) : 1.0;
        s_w += w;
        s_wx += w * lx;
        s_wy += w * ly;
        s_wxx += w * lx * lx;
        s_wxy += w * lx * ly;
        ++n;
    }
    if (n < 2) throw InsufficientData("fit_power_curve: fewer than 2 positive points");
    const double det = s_w * s_wxx - s_wx * s_wx;
    if (det <= 0.0) throw InsufficientData("fit_power_curve: degenerate design");
    PowerFit f;
    f.exponent = (s_w * s_wxy - s_wx * s_wy) / det;
    const double log_a = (s_wy - f.exponent * s_wx) / s_w;
    f.prefactor = std::exp(log_a);
    f.cov[0][0] = s_wxx / det;
    f.cov[0][1] = f.cov[1][0] = -s_wx / det;
    f.cov[1][1] = s_w / det;
    f.n_points = n;
    return f;
}

inline PowerFit fit_power_curve(const stats::BinnedCurve& c, std::int64_t min_bin_count = 50) {
    std::vector<double> x, y, se;
    for (std::size_t i = 0; i < c.bins.size(); ++i) {
        if (c.bins[i].n < min_bin_count) continue;
        x.push_back(c.x_of(i));
        y.push_back(c.bins[i].mean());
        se.push_back(c.bins[i].se());
    }
    return fit_power_curve(x, y, se);
}

// ---------------------------------------------------------------------------
// Incomplete gamma / chi-squared survival function.

namespace detail {

inline double gammln(double x) { return std::lgamma(x); }

inline double gamma_p_series(double a, double x) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
    }
    return sum * std::exp(-x + a * std::log(x) - gammln(a));
}

inline double gamma_q_contfrac(double a, double x) {
    const double eps = 1e-14, fpmin = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / fpmin, d = 1.0 / b, h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = b + an / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return std::exp(-x + a * std::log(x) - gammln(a)) * h;
}

}  // namespace detail

// Regularized upper incomplete gamma Q(a,x).
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) return 1.0;
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);
}

// P(Chi2_k > x)
inline double chi2_sf(double x, double dof) { return gamma_q(0.5 * dof, 0.5 * x); }

// ---------------------------------------------------------------------------
// Hurwitz zeta, for the discrete power-law likelihood.

inline double hurwitz_zeta(double s, double a) {
    // Direct sum plus Euler-Maclaurin tail.
    constexpr int K = 32;
    double sum = 0.0;
    for (int k = 0; k < K; ++k) sum += std::pow(a + k, -s);
    const double b = a + K;
    sum += std::pow(b, 1.0 - s) / (s - 1.0);
    sum += 0.5 * std::pow(b, -s);
    const double ib2 = 1.0 / (b * b);
    double term = s * std::pow(b, -s - 1.0);
    sum += term / 12.0;                                        // B2/2!
    term *= (s + 1.0) * (s + 2.0) * ib2;
    sum -= term / 720.0;                                       // B4/4!
    term *= (s + 3.0) * (s + 4.0) * ib2;
    sum += term / 30240.0;                                     // B6/6!
    return sum;
}

// d/ds log zeta(s, a), by central difference (plenty for MLE purposes).
inline double dlog_hurwitz_zeta(double s, double a) {
    const double h = 1e-5;
    return (std::log(hurwitz_zeta(s + h, a)) - std::log(hurwitz_zeta(s - h, a))) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// Discrete power-law MLE with KS-minimizing x_min (Clauset-style).

struct TailFit {
    double exponent = 0.0;  // mu: p(x) ~ x^-mu for x >= x_min
    std::int64_t x_min = 1;
    double ks = 0.0;        // KS distance at the chosen x_min
    std::int64_t n_tail = 0;
};

namespace detail {

// MLE for fixed x_min: solves E_model[log x] = mean(log x), i.e.
// dlogzeta(mu, xmin) + mean_log = 0. The left side increases with mu.
inline double discrete_pl_mle(double mean_log, double x_min) {
    double lo = 1.000001, hi = 20.0;
    auto g = [&](double mu) { return dlog_hurwitz_zeta(mu, x_min) + mean_log; };
    if (g(lo) > 0.0) return lo;  // tail heavier than mu=1: clamp
    if (g(hi) < 0.0) return hi;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-9) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// samples: positive integers. Minimum tail size per candidate x_min is 100.
inline TailFit fit_tail_exponent(const std::vector<std::int64_t>& samples,
                                 std::int64_t max_x_min = 64) {
    std::vector<std::int64_t> s(samples);
    std::sort(s.begin(), s.end());
    if (s.empty() || s.front() < 1) throw TooFewTailSamples("fit_tail_exponent: need positive samples");
    TailFit best;
    bool found = false;
    for (std::int64_t xm = 1; xm <= max_x_min; ++xm) {
        const auto it = std::lower_bound(s.begin(), s.end(), xm);
        const std::int64_t n = static_cast<std::int64_t>(s.end() - it);
        if (n < 100) break;
        // degenerate tail (all equal) has no MLE
        if (*it == s.back()) continue;
        double mean_log = 0.0;
        for (auto p = it; p != s.end(); ++p) mean_log += std::log(static_cast<double>(*p));
        mean_log /= static_cast<double>(n);
        const double mu = detail::discrete_pl_mle(mean_log, static_cast<double>(xm));
        // KS distance between the empirical and model tail CDFs, evaluated
        // at the distinct sample values (both step functions).
        const double z = hurwitz_zeta(mu, static_cast<double>(xm));
        auto model_cdf = [&](std::int64_t v) {
            return 1.0 - hurwitz_zeta(mu, static_cast<double>(v + 1)) / z;
        };
        double ks = 0.0;
        double emp_prev = 0.0;
        std::int64_t seen = 0;
        for (auto p = it; p != s.end();) {
            const std::int64_t v = *p;
            while (p != s.end() && *p == v) {
                ++p;
                ++seen;
            }
            const double emp = static_cast<double>(seen) / static_cast<double>(n);
            ks = std::max(ks, std::fabs(emp - model_cdf(v)));
            if (v > xm) ks = std::max(ks, std::fabs(emp_prev - model_cdf(v - 1)));
            emp_prev = emp;
        }
        if (!found || ks < best.ks) {
            best = {mu, xm, ks, n};
            found = true;
        }
    }
    if (!found) throw TooFewTailSamples("fit_tail_exponent: no usable x_min");
    return best;
}

// ---------------------------------------------------------------------------
// Damped least squares (Levenberg-Marquardt flavor) for small dense
// problems, with numerical Jacobian. model(params, i) -> prediction.

struct NlsResult {
    std::vector<double> params;
    double chi2 = 0.0;
    bool converged = false;
};

inline NlsResult damped_least_squares(
    std::function<double(const std::vector<double>&, std::size_t)> model,
    const std::vector<double>& y, const std::vector<double>& w, std::vector<double> p,
    const std::vector<double>& lo, const std::vector<double>& hi, int max_iter = 200) {
    const std::size_t m = y.size(), np = p.size();
    auto clamp = [&](std::vector<double>& q) {
        for (std::size_t j = 0; j < np; ++j) q[j] = std::clamp(q[j], lo[j], hi[j]);
    };
    auto chi2_of = [&](const std::vector<double>& q) {
        double c = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = y[i] - model(q, i);
            c += w[i] * r * r;
        }
        return c;
    };
    clamp(p);
    double lambda = 1e-3;
    double chi2 = chi2_of(p);
    bool converged = false;
    for (int it = 0; it < max_iter; ++it) {
        // Jacobian by forward differences
        std::vector<std::vector<double>> J(np, std::vector<double>(m));
        for (std::size_t j = 0; j < np; ++j) {
            const double h = std::max(1e-7, 1e-6 * std::fabs(p[j]));
            auto q = p;
            q[j] = std::min(q[j] + h, hi[j]);
            const double hh = q[j] - p[j];
            if (hh == 0.0) continue;
            for (std::size_t i = 0; i < m; ++i) J[j][i] = (model(q, i) - model(p, i)) / hh;
        }
        // Normal equations (J^T W J + lambda diag) dp = J^T W r
        std::vector<std::vector<double>> A(np, std::vector<double>(np, 0.0));
        std::vector<double> g(np, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double r = y[i] - model(p, i);
            for (std::size_t j = 0; j < np; ++j) {
                g[j] += w[i] * J[j][i] * r;
                for (std::size_t k = 0; k <= j; ++k) A[j][k] += w[i] * J[j][i] * J[k][i];
            }
        }
        for (std::size_t j = 0; j < np; ++j)
            for (std::size_t k = j + 1; k < np; ++k) A[j][k] = A[k][j];
        bool improved = false;
        for (int tries = 0; tries < 12 && !improved; ++tries) {
            auto Ad = A;
            for (std::size_t j = 0; j < np; ++j) Ad[j][j] += lambda * std::max(A[j][j], 1e-12);
            // Gaussian elimination
            auto b = g;
            bool singular = false;
            for (std::size_t col = 0; col < np && !singular; ++col) {
                std::size_t piv = col;
                for (std::size_t r2 = col + 1; r2 < np; ++r2)
                    if (std::fabs(Ad[r2][col]) > std::fabs(Ad[piv][col])) piv = r2;
                if (std::fabs(Ad[piv][col]) < 1e-300) {
                    singular = true;
                    break;
                }
                std::swap(Ad[piv], Ad[col]);
                std::swap(b[piv], b[col]);
                for (std::size_t r2 = col + 1; r2 < np; ++r2) {
                    const double fac = Ad[r2][col] / Ad[col][col];
                    for (std::size_t c2 = col; c2 < np; ++c2) Ad[r2][c2] -= fac * Ad[col][c2];
                    b[r2] -= fac * b[col];
                }
            }
            if (singular) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> dp(np);
            for (std::size_t r2 = np; r2-- > 0;) {
                double acc = b[r2];
                for (std::size_t c2 = r2 + 1; c2 < np; ++c2) acc -= Ad[r2][c2] * dp[c2];
                dp[r2] = acc / Ad[r2][r2];
            }
            auto q = p;
            for (std::size_t j = 0; j < np; ++j) q[j] += dp[j];
            clamp(q);
            const double c2 = chi2_of(q);
            if (c2 < chi2) {
                const double rel = (chi2 - c2) / std::max(chi2, 1e-300);
                p = q;
                chi2 = c2;
                lambda = std::max(lambda * 0.3, 1e-12);
                improved = true;
                if (rel < 1e-12) converged = true;
            } else {
                lambda *= 10.0;
            }
        }
        if (!improved) {
            converged = true;
            break;
        }
        if (converged) break;
    }
    return {p, chi2, converged};
}

}  // namespace mim::fit
