#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mim/fit.hpp"
#include "mim/metaorder.hpp"
#include "mim/stats.hpp"
#include "mim/tape.hpp"

namespace mim::impact {

inline std::vector<double> default_impact_edges() { return stats::log_edges(1e-6, 0.3, 4); }

struct ImpactCurveOptions {
    std::vector<double> edges = default_impact_edges();
    std::int64_t min_bin_count = 50;
    int n_t_strata = 3;
    // The power fit (and the T-trend check) can be restricted to a
    // participation window; the curve itself always spans all bins.
    double fit_f_lo = 0.0;
    double fit_f_hi = std::numeric_limits<double>::infinity();
    // Median bins instead of means. The per-observation noise is left-skewed
    // (excursions aligned with a metaorder widen the session range that
    // normalizes y, opposed ones shrink it), which biases bin means downward;
    // medians are insensitive to it.
    bool robust = false;
};

struct ImpactCurve {
    stats::BinnedCurve curve;
    std::optional<fit::PowerFit> fit;                // (Y, delta)
    std::vector<stats::BinnedCurve> t_strata;        // split by execution time T
    std::vector<double> strata_t_edges;              // T quantile edges (seconds)
    // Per-observation records for the T-independence check.
    std::vector<double> obs_f, obs_y, obs_logT;
    std::int64_t n_used = 0;
    double fit_f_lo = 0.0;
    double fit_f_hi = std::numeric_limits<double>::infinity();
    bool robust = false;
    // Points the power fit actually used (bin centers and statistics).
    std::vector<double> fit_x, fit_y, fit_se;

    // Square-root-law prefactor: weighted fit of the used bins with the
    // exponent pinned (Y such that y = Y * x^exponent).
    std::optional<double> pinned_prefactor(double exponent = 0.5) const {
        double sw = 0.0, swv = 0.0;
        for (std::size_t b = 0; b < fit_x.size(); ++b) {
            if (fit_y[b] <= 0.0 || fit_se[b] <= 0.0) continue;
            const double w = fit_y[b] * fit_y[b] / (fit_se[b] * fit_se[b]);
            sw += w;
            swv += w * (std::log(fit_y[b]) - exponent * std::log(fit_x[b]));
        }
        if (sw <= 0.0) return std::nullopt;
        return std::exp(swv / sw);
    }

    // Residual-vs-log T regression; slope within 2 SE of 0 means the
    // curve carries no execution-time trend beyond I(f). In robust mode
    // the regression runs over median residuals in log-T quantile bins.
    stats::LineFit t_trend() const {
        if (!fit) return {};
        std::vector<std::pair<double, double>> pts;  // (logT, residual)
        for (std::size_t i = 0; i < obs_f.size(); ++i) {
            if (std::isnan(obs_logT[i])) continue;  // N=1, no duration
            if (obs_f[i] < fit_f_lo || obs_f[i] > fit_f_hi) continue;
            pts.emplace_back(obs_logT[i],
                             obs_y[i] - fit->prefactor * std::pow(obs_f[i], fit->exponent));
        }
        if (!robust) {
            std::vector<double> x, r;
            x.reserve(pts.size());
            r.reserve(pts.size());
            for (const auto& [lt, res] : pts) {
                x.push_back(lt);
                r.push_back(res);
            }
            return stats::ols_line(x, r);
        }
        std::sort(pts.begin(), pts.end());
        const std::size_t n_bins = 8;
        if (pts.size() < 4 * n_bins) return {};
        std::vector<double> x, r, se;
        for (std::size_t k = 0; k < n_bins; ++k) {
            const std::size_t lo = pts.size() * k / n_bins;
            const std::size_t hi = pts.size() * (k + 1) / n_bins;
            std::vector<double> res;
            double lt = 0.0, s1 = 0.0, s2 = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                res.push_back(pts[i].second);
                lt += pts[i].first;
                s1 += pts[i].second;
                s2 += pts[i].second * pts[i].second;
            }
            const auto m = static_cast<double>(hi - lo);
            std::nth_element(res.begin(), res.begin() + static_cast<std::ptrdiff_t>(res.size() / 2),
                             res.end());
            const double var = std::max(0.0, s2 / m - (s1 / m) * (s1 / m));
            x.push_back(lt / m);
            r.push_back(res[res.size() / 2]);
            // Normal-approximation standard error of the bin median.
            se.push_back(1.2533 * std::sqrt(var / m));
        }
        // Weighted straight-line fit; slope error from the per-bin errors
        // rather than the scatter of the few binned points.
        double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) {
            if (se[k] <= 0.0) continue;
            const double w = 1.0 / (se[k] * se[k]);
            sw += w;
            swx += w * x[k];
            swy += w * r[k];
            swxx += w * x[k] * x[k];
            swxy += w * x[k] * r[k];
        }
        stats::LineFit lf;
        const double sxx = swxx - swx * swx / sw;
        if (sw <= 0.0 || sxx <= 0.0) return {};
        lf.slope = (swxy - swx * swy / sw) / sxx;
        lf.intercept = (swy - lf.slope * swx) / sw;
        lf.slope_se = std::sqrt(1.0 / sxx);
        lf.n = static_cast<std::int64_t>(x.size());
        return lf;
    }
};

// Eq-1-style curve: per-bin mean of eps*dp/sigma_D vs f = Q/V_D, with a
// weighted log-log power fit over well-populated bins.
inline ImpactCurve metaorder_impact_curve(const std::vector<meta::Metaorder>& metaorders,
                                          const ImpactCurveOptions& opt = {}) {
    ImpactCurve out;
    out.curve = stats::BinnedCurve(opt.edges);
    std::vector<double> t_values;
    for (const auto& m : metaorders) {
        const auto dp = m.impact();
        if (!dp || m.sigma_D <= 0.0 || m.V_D <= 0 || m.f <= 0.0) continue;
        const double y = *dp / m.sigma_D;
        out.curve.add(m.f, y);
        out.obs_f.push_back(m.f);
        out.obs_y.push_back(y);
        out.obs_logT.push_back(m.T_s > 0.0 ? std::log(m.T_s)
                                           : std::numeric_limits<double>::quiet_NaN());
        if (m.T_s > 0.0) t_values.push_back(m.T_s);
        ++out.n_used;
    }
    if (out.n_used == 0) throw InsufficientData("metaorder_impact_curve: no usable metaorders");
    out.fit_f_lo = opt.fit_f_lo;
    out.fit_f_hi = opt.fit_f_hi;
    out.robust = opt.robust;
    std::vector<std::vector<double>> bin_vals;
    if (opt.robust) {
        bin_vals.resize(out.curve.bins.size());
        for (std::size_t i = 0; i < out.obs_f.size(); ++i) {
            const int b = out.curve.bin_of(out.obs_f[i]);
            if (b >= 0) bin_vals[static_cast<std::size_t>(b)].push_back(out.obs_y[i]);
        }
    }
    try {
        for (std::size_t i = 0; i < out.curve.bins.size(); ++i) {
            const auto& b = out.curve.bins[i];
            if (b.n < opt.min_bin_count) continue;
            const double xc = out.curve.x_of(i);
            if (xc < opt.fit_f_lo || xc > opt.fit_f_hi) continue;
            out.fit_x.push_back(xc);
            if (opt.robust) {
                auto& v = bin_vals[i];
                std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2),
                                 v.end());
                out.fit_y.push_back(v[v.size() / 2]);
                // Normal-approximation standard error of a sample median.
                out.fit_se.push_back(1.2533 * b.se());
            } else {
                out.fit_y.push_back(b.mean());
                out.fit_se.push_back(b.se());
            }
        }
        out.fit = fit::fit_power_curve(out.fit_x, out.fit_y, out.fit_se);
    } catch (const FitError&) {
        out.fit.reset();
    }
    // T strata at quantile edges
    if (opt.n_t_strata > 1 && t_values.size() > static_cast<std::size_t>(opt.n_t_strata)) {
        std::sort(t_values.begin(), t_values.end());
        for (int k = 1; k < opt.n_t_strata; ++k)
            out.strata_t_edges.push_back(
                t_values[t_values.size() * static_cast<std::size_t>(k) /
                         static_cast<std::size_t>(opt.n_t_strata)]);
        out.t_strata.assign(static_cast<std::size_t>(opt.n_t_strata), stats::BinnedCurve(opt.edges));
        for (std::size_t i = 0; i < out.obs_f.size(); ++i) {
            const double T = std::exp(out.obs_logT[i]);
            std::size_t k = 0;
            while (k < out.strata_t_edges.size() && T >= out.strata_t_edges[k]) ++k;
            out.t_strata[k].add(out.obs_f[i], out.obs_y[i]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Child-order cumulative impact profile J(i), rescaled per metaorder by
// sigma_D * sqrt(qbar/V_D) with qbar = Q/N.

struct ChildProfileFit {
    double A = 0.0;
    double i0 = 0.0;
    double beta = 0.5;
    bool converged = false;
};

struct ChildProfileOptions {
    std::size_t i_max = 50;       // ranks beyond are reported, not fitted
    std::size_t i_cap = 200;      // hard reporting cap
    std::int64_t min_rank_count = 20;
    // Metaorders with fewer children are skipped; keeps single orders and
    // short runs from polluting the low ranks.
    std::int64_t min_children = 2;
    bool joint_q_binning = false;  // reserved: per-(q,i) conditioning mode
};

struct ChildProfile {
    std::vector<stats::Accum> ranks;  // index i-1 holds rank i: cumulative J(i)
    // Rank increments D(i) = J(i) - J(i-1); by telescoping over child ages
    // D(i) = A (i+i0)^-beta exactly, and background contributions to
    // increments are uncorrelated across ranks, unlike the cumulative curve.
    std::vector<stats::Accum> diffs;
    std::size_t i_max = 50;
    std::optional<ChildProfileFit> fit;        // free (A, i0, beta)
    std::optional<ChildProfileFit> fit_sqrt;   // constrained beta = 1/2
    // Constrained i0 = 0 power law J(i) = A * i^(1-beta); its exponent is
    // what a naive no-offset fit of the same profile recovers.
    std::optional<fit::PowerFit> fit_i0_zero;

    double value(std::size_t i) const { return ranks[i - 1].mean(); }
};

inline double child_profile_model(double A, double i0, double beta, double i) {
    return A * (std::pow(i + i0, 1.0 - beta) - std::pow(i0, 1.0 - beta));
}

namespace detail {

inline ChildProfileFit fit_child_profile(const std::vector<double>& i_vals,
                                         const std::vector<double>& y, const std::vector<double>& w,
                                         bool free_beta) {
    // A enters linearly: profile shape scanned on an (i0, beta) grid, A
    // solved in closed form, then all parameters polished together.
    double best_chi2 = std::numeric_limits<double>::infinity();
    double best_i0 = 4.0, best_beta = 0.5, best_A = 1.0;
    std::vector<double> i0_grid;
    for (double v = 0.5; v <= 20.0; v *= 1.45) i0_grid.push_back(v);
    std::vector<double> beta_grid;
    if (free_beta)
        for (double b = 0.2; b <= 0.901; b += 0.05) beta_grid.push_back(b);
    else
        beta_grid.push_back(0.5);
    for (const double i0 : i0_grid) {
        for (const double beta : beta_grid) {
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < i_vals.size(); ++k) {
                const double g = child_profile_model(1.0, i0, beta, i_vals[k]);
                num += w[k] * y[k] * g;
                den += w[k] * g * g;
            }
            if (den <= 0.0) continue;
            const double A = num / den;
            double chi2 = 0.0;
            for (std::size_t k = 0; k < i_vals.size(); ++k) {
                const double r = y[k] - A * child_profile_model(1.0, i0, beta, i_vals[k]);
                chi2 += w[k] * r * r;
            }
            if (chi2 < best_chi2) {
                best_chi2 = chi2;
                best_i0 = i0;
                best_beta = beta;
                best_A = A;
            }
        }
    }
    std::vector<double> p, lo, hi;
    if (free_beta) {
        p = {best_A, best_i0, best_beta};
        lo = {0.0, 1e-6, 0.15};
        hi = {1e9, 50.0, 0.95};
    } else {
        p = {best_A, best_i0};
        lo = {0.0, 1e-6};
        hi = {1e9, 50.0};
    }
    auto model = [&](const std::vector<double>& q, std::size_t k) {
        const double beta = free_beta ? q[2] : 0.5;
        return child_profile_model(q[0], q[1], beta, i_vals[k]);
    };
    const auto res = fit::damped_least_squares(model, y, w, p, lo, hi, 400);
    ChildProfileFit f;
    f.A = res.params[0];
    f.i0 = res.params[1];
    f.beta = free_beta ? res.params[2] : 0.5;
    f.converged = res.converged;
    return f;
}

inline ChildProfileFit fit_kernel_increments(const std::vector<double>& i_vals,
                                             const std::vector<double>& y,
                                             const std::vector<double>& w, bool free_beta) {
    // Model D(i) = A (i+i0)^-beta; grid scan with closed-form A, then polish.
    double best_chi2 = std::numeric_limits<double>::infinity();
    double best_i0 = 4.0, best_beta = 0.5, best_A = 1.0;
    std::vector<double> i0_grid;
    for (double v = 0.5; v <= 20.0; v *= 1.45) i0_grid.push_back(v);
    std::vector<double> beta_grid;
    if (free_beta)
        for (double b = 0.2; b <= 0.901; b += 0.05) beta_grid.push_back(b);
    else
        beta_grid.push_back(0.5);
    for (const double i0 : i0_grid) {
        for (const double beta : beta_grid) {
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < i_vals.size(); ++k) {
                const double g = std::pow(i_vals[k] + i0, -beta);
                num += w[k] * y[k] * g;
                den += w[k] * g * g;
            }
            if (den <= 0.0) continue;
            const double A = num / den;
            double chi2 = 0.0;
            for (std::size_t k = 0; k < i_vals.size(); ++k) {
                const double r = y[k] - A * std::pow(i_vals[k] + i0, -beta);
                chi2 += w[k] * r * r;
            }
            if (chi2 < best_chi2) {
                best_chi2 = chi2;
                best_i0 = i0;
                best_beta = beta;
                best_A = A;
            }
        }
    }
    std::vector<double> p, lo, hi;
    if (free_beta) {
        p = {best_A, best_i0, best_beta};
        lo = {0.0, 1e-6, 0.15};
        hi = {1e9, 50.0, 0.95};
    } else {
        p = {best_A, best_i0};
        lo = {0.0, 1e-6};
        hi = {1e9, 50.0};
    }
    auto model = [&](const std::vector<double>& q, std::size_t k) {
        const double beta = free_beta ? q[2] : 0.5;
        return q[0] * std::pow(i_vals[k] + q[1], -beta);
    };
    const auto res = fit::damped_least_squares(model, y, w, p, lo, hi, 400);
    ChildProfileFit f;
    f.A = res.params[0];
    f.i0 = res.params[1];
    f.beta = free_beta ? res.params[2] : 0.5;
    f.converged = res.converged;
    return f;
}

}  // namespace detail

inline ChildProfile child_impact_profile(const std::vector<meta::Metaorder>& metaorders,
                                         const ChildProfileOptions& opt = {}) {
    ChildProfile prof;
    prof.i_max = opt.i_max;
    prof.ranks.resize(opt.i_cap);
    prof.diffs.resize(opt.i_cap);
    for (const auto& m : metaorders) {
        if (m.sigma_D <= 0.0 || m.V_D <= 0 || m.N() < opt.min_children) continue;
        if (!m.children.front().has_p_before) continue;
        const double scale =
            m.sigma_D * std::sqrt(m.mean_child_size() / static_cast<double>(m.V_D));
        if (scale <= 0.0) continue;
        const double p1 = m.children.front().log_p_before;
        const std::size_t n = m.children.size();
        const std::size_t top = std::min(n, opt.i_cap);
        double prev_dp = 0.0;
        std::size_t prev_i = 0;  // rank of prev_dp; J(0) = 0
        for (std::size_t i = 1; i <= top; ++i) {
            // dp_i: just before child i+1 (or just after the last child when
            // i = N) minus just before child 1.
            double dp;
            if (i < n) {
                if (!m.children[i].has_p_before) continue;
                dp = m.children[i].log_p_before - p1;
            } else {
                if (!m.has_p_after) continue;
                dp = m.log_p_after_last - p1;
            }
            prof.ranks[i - 1].add(m.sign * dp / scale);
            if (prev_i + 1 == i) prof.diffs[i - 1].add(m.sign * (dp - prev_dp) / scale);
            prev_dp = dp;
            prev_i = i;
        }
    }
    std::vector<double> iv, y, w, dv, dy, dw;
    for (std::size_t i = 1; i <= opt.i_max && i <= prof.ranks.size(); ++i) {
        const auto& a = prof.ranks[i - 1];
        if (a.n >= opt.min_rank_count) {
            iv.push_back(static_cast<double>(i));
            y.push_back(a.mean());
            const double se = a.se();
            w.push_back(se > 0.0 ? 1.0 / (se * se) : 1.0);
        }
        const auto& d = prof.diffs[i - 1];
        if (d.n >= opt.min_rank_count) {
            dv.push_back(static_cast<double>(i));
            dy.push_back(d.mean());
            const double se = d.se();
            dw.push_back(se > 0.0 ? 1.0 / (se * se) : 1.0);
        }
    }
    if (iv.size() < 5) throw InsufficientRanks("child_impact_profile: fewer than 5 populated ranks");
    if (dv.size() >= 5) {
        prof.fit = detail::fit_kernel_increments(dv, dy, dw, true);
        prof.fit_sqrt = detail::fit_kernel_increments(dv, dy, dw, false);
    } else {
        prof.fit = detail::fit_child_profile(iv, y, w, true);
        prof.fit_sqrt = detail::fit_child_profile(iv, y, w, false);
    }
    try {
        std::vector<double> se(w.size());
        for (std::size_t k = 0; k < w.size(); ++k) se[k] = 1.0 / std::sqrt(w[k]);
        prof.fit_i0_zero = fit::fit_power_curve(iv, y, se);
    } catch (const FitError&) {
    }
    return prof;
}

// ---------------------------------------------------------------------------
// Single market-order impact in volume time (Fig.-5-style), with
// intraday-seasonality rescaling and the zero-immediate-impact stratum.

struct SingleMoOptions {
    std::vector<double> edges = stats::log_edges(1e-7, 1e-1, 4);
    std::int64_t min_bin_count = 50;
};

struct SingleMoResult {
    stats::BinnedCurve all;    // x = q/V_b, y = impact at volume time q / sigma_b
    stats::BinnedCurve zero;   // subset: q <= opposite-best size
    std::optional<fit::PowerFit> fit_all, fit_zero;
    std::int64_t truncated = 0;       // window ended before volume clock advanced by q
    std::int64_t n_all = 0, n_zero = 0;
    double max_abs_lag0_zero = 0.0;   // largest |immediate impact| in the zero stratum
};

inline void single_mo_accumulate(const tape::Session& session,
                                 const tape::SeasonalityProfile& season, SingleMoResult& out) {
    const auto& evs = session.events;
    // Exec-fill prefix structures and last-known mid per event index.
    std::vector<std::int64_t> exec_ts, exec_cum;
    std::vector<double> exec_mid;  // post-event mid at each fill (last known)
    std::int64_t cum = 0;
    double last_mid = 0.0;
    bool have_mid = false;
    std::vector<double> mid_at(evs.size(), 0.0);
    std::vector<char> mid_ok(evs.size(), 0);
    for (std::size_t i = 0; i < evs.size(); ++i) {
        if (evs[i].has_quotes()) {
            last_mid = evs[i].mid_ticks();
            have_mid = true;
        }
        mid_at[i] = last_mid;
        mid_ok[i] = have_mid ? 1 : 0;
        if (evs[i].kind == tape::EventKind::execute) {
            cum += evs[i].size;
            exec_ts.push_back(evs[i].ts_ns);
            exec_cum.push_back(cum);
            exec_mid.push_back(have_mid ? last_mid : 0.0);
        }
    }
    // Walk market orders
    double prev_mid = 0.0;
    std::int32_t prev_bs = 0, prev_as = 0;
    bool have_prev = false;
    for (std::size_t i = 0; i < evs.size(); ++i) {
        const auto& ev = evs[i];
        if (ev.kind == tape::EventKind::submit_market && have_prev) {
            const int b = tape::seasonality_bin(ev.ts_ns);
            const double sigma_b = season.sigma_b[static_cast<std::size_t>(b)];
            const double V_b = season.V_b[static_cast<std::size_t>(b)];
            if (sigma_b > 0.0 && V_b > 0.0) {
                const double q = ev.size;
                const bool zero_stratum =
                    ev.side > 0 ? ev.size <= prev_as : ev.size <= prev_bs;
                // immediate (lag-0) impact across this order's fill cluster
                double after = prev_mid;
                for (std::size_t j = i; j < evs.size() && evs[j].ts_ns == ev.ts_ns; ++j)
                    if (evs[j].has_quotes()) after = evs[j].mid_ticks();
                const double lag0 = ev.side * (std::log(after) - std::log(prev_mid));
                // volume time: first fill strictly after the order at which
                // the post-order executed volume reaches q
                const auto it0 = std::upper_bound(exec_ts.begin(), exec_ts.end(), ev.ts_ns);
                const std::size_t lo = static_cast<std::size_t>(it0 - exec_ts.begin());
                const std::int64_t base = lo == 0 ? 0 : exec_cum[lo - 1];
                const auto cit = std::lower_bound(exec_cum.begin() + static_cast<std::ptrdiff_t>(lo),
                                                  exec_cum.end(), base + ev.size);
                if (cit == exec_cum.end()) {
                    ++out.truncated;
                } else {
                    const auto k = static_cast<std::size_t>(cit - exec_cum.begin());
                    if (exec_mid[k] > 0.0) {
                        const double y =
                            ev.side * (std::log(exec_mid[k]) - std::log(prev_mid)) / sigma_b;
                        const double x = q / V_b;
                        out.all.add(x, y);
                        ++out.n_all;
                        if (zero_stratum) {
                            out.zero.add(x, y);
                            ++out.n_zero;
                            out.max_abs_lag0_zero = std::max(out.max_abs_lag0_zero, std::fabs(lag0));
                        }
                    }
                }
            }
        }
        if (ev.has_quotes()) {
            prev_mid = ev.mid_ticks();
            prev_bs = ev.bid_size;
            prev_as = ev.ask_size;
            have_prev = true;
        }
    }
}

inline SingleMoResult single_mo_impact(const std::vector<tape::Session>& sessions,
                                       const tape::SeasonalityProfile& season,
                                       const SingleMoOptions& opt = {}) {
    SingleMoResult out;
    out.all = stats::BinnedCurve(opt.edges);
    out.zero = stats::BinnedCurve(opt.edges);
    for (const auto& s : sessions) single_mo_accumulate(s, season, out);
    try {
        out.fit_all = fit::fit_power_curve(out.all, opt.min_bin_count);
    } catch (const FitError&) {
    }
    try {
        out.fit_zero = fit::fit_power_curve(out.zero, opt.min_bin_count);
    } catch (const FitError&) {
    }
    return out;
}

}  // namespace mim::impact
