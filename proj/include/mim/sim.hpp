#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "mim/common.hpp"
#include "mim/rng.hpp"
#include "mim/tape.hpp"

namespace mim::sim {

struct ProviderSpec {
    std::string id;
    double C = 0.02;
    double kappa = 0.5;
    double weight = 1.0;
    bool fast = true;  // market-maker style: emits limit-order churn, classified fast
};

struct SimConfig {
    std::uint64_t seed = 1;
    int n_sessions = 4;
    int start_year = 2017, start_month = 1, start_day = 9;  // a Monday
    std::string stock_id = "SIM";

    // price scale
    double tick_size = 0.001;
    double p0_price = 500.0;
    int spread_ticks = 4;  // even

    // volume scale (per half-day session)
    double session_volume = 2e6;
    double meta_volume_fraction = 0.45;

    // metaorder population (slow traders, one metaorder per trader-session)
    int n_meta_traders = 260;
    double f_log_median = 1.5e-3, f_log_sigma = 1.1;
    double f_min = 1e-4, f_max = 3e-2;
    bool f_pareto = false;          // LMF-style discrete power-law alternative
    double f_pareto_alpha = 1.3;
    double n_base = 10.0, n_f_ref = 2e-3, n_f_exp = 0.3, n_jitter = 0.2;
    std::int64_t n_min = 2, n_max = 500;
    double dt_base_s = 25.0, dt_f_ref = 1e-4, dt_f_exp = 0.39;
    double dt_sigma_log = 0.45, dt_min_s = 4.0, dt_max_s = 240.0;
    double max_span_frac = 0.8;  // cap on (N-1)*dt as a fraction of the session
    double child_time_jitter = 0.0;  // fraction of dt; 0 keeps constant-rate schedules

    // fast taker flow (strict alternation unless fast_flip_prob < 1)
    int n_fast_takers = 12;
    double fast_size_median = 120.0, fast_size_sigma = 0.8;
    std::int64_t fast_size_max = 800;
    double fast_flip_prob = 1.0;

    // propagator ground truth; per-parent s0 = i0 * dt_parent, singleton
    // market orders use dt_ref_s
    double G0 = 5e-6;  // log-price per sqrt(share)
    double i0 = 4.0;
    double beta = 0.5;
    double dt_ref_s = 30.0;
    // Rescale each parent's kernel amplitude so the completed kernel sum is
    // independent of its child count (total-impact universality); the
    // within-parent cumulative profile keeps its shape.
    bool normalize_total_impact = false;
    double normalize_n_ref = 10.0;

    // martingale noise (Brownian in wall time)
    double noise_sigma_per_sqrt_s = 8.5e-5;

    // liquidity providers
    std::vector<ProviderSpec> providers;
    double crowd_weight = 0.08;  // one-off anonymous providers
    int n_crowd = 60;
    double refill_mu = 1.8;
    std::int64_t refill_len_cap = 500;
    std::int64_t provider_inventory_bound = 80000;
    double mm_limit_refresh_s = 30.0;  // mean gap between an MM's limit submissions

    // best-quote sizes
    double quote_size_median = 260.0, quote_size_sigma = 1.1;
    std::int64_t quote_size_max = 20000;

    // intraday seasonality of the fast flow (0 = flat)
    double u_shape_amp = 0.0;

    bool emit_limit_events = true;
    // After a fill cluster that left the book frozen, the consumed side
    // reposts shortly after; keeps lag-0 impact exactly zero within the
    // cluster while the kernel becomes visible right away.
    bool quote_refresh_after_trade = true;
    double refresh_delay_s = 0.05;
    bool exact_kernel = false;      // exact superposition (small tapes / oracles)
    double kernel_recent_s = 600.0; // exact window; older children cached
    double kernel_refresh_s = 5.0;
    bool ledger_children = true;

    bool valid() const {
        return n_sessions > 0 && session_volume > 0 && tick_size > 0 && p0_price > 0 &&
               spread_ticks >= 2 && spread_ticks % 2 == 0 && meta_volume_fraction >= 0.0 &&
               meta_volume_fraction <= 1.0 && f_min > 0 && f_max > f_min && G0 > 0 &&
               i0 >= 0 && beta > 0 && beta < 1 && dt_ref_s > 0 && refill_mu > 1.0;
    }
};

// ---------------------------------------------------------------------------
// Ground-truth ledger: everything the estimators are checked against.

struct LedgerMetaorder {
    int session_idx = 0;
    std::string trader_id;
    int sign = +1;
    std::int64_t Q = 0;
    std::int64_t N = 0;
    std::int64_t start_ts = 0, end_ts = 0;
    double dt_s = 0.0;   // child spacing (0 for singleton runs)
    bool is_meta = false;  // long-term trader metaorder vs fast-taker run
    // Noiseless log-mid at the measurement endpoints (quote rule mirrored).
    double noiseless_pre = 0.0, noiseless_post = 0.0;
    // Own-kernel log-mid displacement imprinted between the endpoints
    // (ambient flow and martingale noise excluded); always >= 0.
    double predicted_dp = 0.0;
    std::vector<std::int64_t> child_ts;
    std::vector<std::int64_t> child_q;
};

struct LedgerSession {
    std::string session_id;
    std::int64_t day = 0;
    int half = 0;  // 0 AM, 1 PM
    double sigma_D = 0.0;     // realized, from quantized quote mids
    std::int64_t V_D = 0;     // total market-order volume
};

struct AgentInfo {
    std::string trader_id;
    std::string role;  // meta_trader | fast_taker | mm_provider | slow_provider | crowd
    bool fast = false;
};

struct GroundTruthLedger {
    std::uint64_t seed = 0;
    std::vector<LedgerSession> sessions;
    std::vector<LedgerMetaorder> metaorders;  // every market order belongs to exactly one
    std::vector<AgentInfo> agents;
    std::vector<ProviderSpec> provider_scripts;
    std::vector<double> expected_bin_volume_share;  // per seasonality bin of a half
    double G0 = 0, i0 = 0, beta = 0, dt_ref_s = 0;
};

struct SimResult {
    std::vector<tape::OrderEvent> events;
    GroundTruthLedger ledger;
    tape::StockMeta meta;
};

// ---------------------------------------------------------------------------
// Kernel superposition with a cached far-past pool.

namespace detail {

struct KernelChild {
    double t, sqrt_q, dt, s0;
    int sign;
};

class KernelField {
  public:
    KernelField(double G0, double beta, bool exact, double recent_s, double refresh_s)
        : G0_(G0), beta_(beta), exact_(exact), recent_s_(recent_s), refresh_s_(refresh_s) {}

    void add(double t, double q, double dt, double s0, int sign) {
        children_.push_back({t, std::sqrt(q), dt, s0, sign});
    }

    double term(const KernelChild& c, double t) const {
        const double tau = t - c.t + c.s0;
        if (beta_ == 0.5) return c.sign * c.sqrt_q * std::sqrt(c.dt / tau);
        return c.sign * c.sqrt_q * std::pow(c.dt, beta_) * std::pow(tau, -beta_);
    }

    // Instantaneous contribution of a would-be child at lag 0.
    double at_lag0(double q, double dt, double s0) const {
        if (beta_ == 0.5) return G0_ * std::sqrt(q * dt / s0);
        return G0_ * std::sqrt(q) * std::pow(dt, beta_) * std::pow(s0, -beta_);
    }

    double sum_at(double t) {
        if (!exact_ && t - last_refresh_ > refresh_s_) {
            while (old_end_ < children_.size() && children_[old_end_].t < t - recent_s_) ++old_end_;
            old_sum_ = 0.0;
            for (std::size_t i = 0; i < old_end_; ++i) old_sum_ += term(children_[i], t);
            last_refresh_ = t;
        }
        double acc = exact_ ? 0.0 : old_sum_;
        const std::size_t from = exact_ ? 0 : old_end_;
        for (std::size_t i = from; i < children_.size(); ++i) {
            if (children_[i].t > t) break;
            acc += term(children_[i], t);
        }
        return G0_ * acc;
    }

    void reset() {
        children_.clear();
        old_end_ = 0;
        old_sum_ = 0.0;
        last_refresh_ = -1e18;
    }

  private:
    double G0_, beta_;
    bool exact_;
    double recent_s_, refresh_s_;
    std::vector<KernelChild> children_;
    std::size_t old_end_ = 0;
    double old_sum_ = 0.0;
    double last_refresh_ = -1e18;
};

// Truncated discrete power-law sampler (inverse CDF table).
class ZipfSampler {
  public:
    ZipfSampler(double mu, std::int64_t cap) {
        cdf_.resize(static_cast<std::size_t>(cap));
        double acc = 0.0;
        for (std::int64_t k = 1; k <= cap; ++k) {
            acc += std::pow(static_cast<double>(k), -mu);
            cdf_[static_cast<std::size_t>(k - 1)] = acc;
        }
        for (auto& c : cdf_) c /= acc;
    }
    std::int64_t draw(rng::Engine& g) const {
        const double u = rng::uniform01(g);
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<std::int64_t>(it - cdf_.begin()) + 1;
    }

  private:
    std::vector<double> cdf_;
};

inline std::int64_t clamp_i64(double v, std::int64_t lo, std::int64_t hi) {
    if (v < static_cast<double>(lo)) return lo;
    if (v > static_cast<double>(hi)) return hi;
    return static_cast<std::int64_t>(std::llround(v));
}

}  // namespace detail

// ---------------------------------------------------------------------------

class Simulator {
  public:
    explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg)), g_(cfg_.seed) {
        if (!cfg_.valid()) throw ConfigInvalid("simulate: invalid configuration");
        if (cfg_.providers.empty()) cfg_.providers = default_providers();
    }

    static std::vector<ProviderSpec> default_providers() {
        std::vector<ProviderSpec> ps;
        for (int k = 0; k < 4; ++k)
            ps.push_back({"MM" + std::to_string(k), 0.008 + 0.002 * k, 0.9 + 0.06 * k,
                          0.16, true});
        for (int k = 0; k < 4; ++k)
            ps.push_back({"MW" + std::to_string(k), 0.04 + 0.008 * k, 0.45 + 0.04 * k,
                          0.035, true});
        for (int k = 0; k < 6; ++k)
            ps.push_back({"SP" + std::to_string(k), 0.02 + 0.004 * k, 0.5 + 0.05 * k,
                          0.035, false});
        return ps;
    }

    SimResult run() {
        SimResult res;
        res.ledger.seed = cfg_.seed;
        res.ledger.provider_scripts = cfg_.providers;
        res.ledger.G0 = cfg_.G0;
        res.ledger.i0 = cfg_.i0;
        res.ledger.beta = cfg_.beta;
        res.ledger.dt_ref_s = cfg_.dt_ref_s;
        res.ledger.expected_bin_volume_share = expected_bin_shares();
        res.meta.stock_id = cfg_.stock_id;
        res.meta.tick_size = cfg_.tick_size;
        {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", cfg_.start_year, cfg_.start_month,
                          cfg_.start_day);
            res.meta.session_date = buf;
        }
        std::int64_t day = days_from_civil(cfg_.start_year,
                                           static_cast<unsigned>(cfg_.start_month),
                                           static_cast<unsigned>(cfg_.start_day));
        int half = 0;
        for (int s = 0; s < cfg_.n_sessions; ++s) {
            simulate_session(s, day, half, res);
            if (half == 1) {
                ++day;
                while ((day + 4) % 7 >= 5) ++day;  // skip Sat/Sun
            }
            half ^= 1;
        }
        collect_agents(res.ledger);
        return res;
    }

  private:
    struct PlanOrder {
        double t;  // seconds from window start
        std::string trader;
        int sign;
        std::int64_t q;
        double dt, s0;          // kernel parent parameters
        int ledger_idx;         // run/metaorder this order belongs to
        bool first_child, last_child;
        double amp = 1.0;       // per-parent kernel amplitude multiplier
    };

    struct MmState {
        std::string id;
        int next_side = 1;
        std::string open_order;
        std::int64_t open_size = 0;
        std::int32_t open_price = 0;
        double next_t = 0.0;
    };

    struct ProvState {
        const ProviderSpec* spec;
        int sign = 1;            // aggressor sign this sequence serves
        std::int64_t remaining = 0;
        std::int64_t rank = 0;   // fills so far in the current sequence
        double lp = 0.0;         // exact log fill price (tick units)
        std::int64_t inventory = 0;
    };

    struct FillCtx {
        std::size_t event_idx;
        int prov;         // -1: crowd
        int sign;
        std::int64_t rank;
        double anchor_lp;  // log quoted mid (ticks) at the fill row
    };

    std::vector<double> bin_weights() const {
        std::vector<double> w(tape::bins_per_half, 1.0);
        if (cfg_.u_shape_amp > 0.0) {
            double mean = 0.0;
            for (int b = 0; b < tape::bins_per_half; ++b) {
                const double x = (b - 4.0) / 4.0;
                w[static_cast<std::size_t>(b)] = 1.0 + cfg_.u_shape_amp * (x * x - 0.35);
                mean += w[static_cast<std::size_t>(b)];
            }
            mean /= tape::bins_per_half;
            for (auto& v : w) v = std::max(0.05, v / mean);
        }
        return w;
    }

    std::vector<double> expected_bin_shares() const {
        auto w = bin_weights();
        double tot = 0.0;
        for (auto v : w) tot += v;
        std::vector<double> share(w.size());
        for (std::size_t b = 0; b < w.size(); ++b)
            share[b] = cfg_.meta_volume_fraction / static_cast<double>(w.size()) +
                       (1.0 - cfg_.meta_volume_fraction) * w[b] / tot;
        return share;
    }

    // Completed-kernel shape sum: sum_{k=0}^{N-1} (k+i0)^-beta (dt cancels).
    double shape_sum(std::int64_t n) const {
        double s = 0.0;
        for (std::int64_t k = 0; k < n; ++k)
            s += std::pow(static_cast<double>(k) + cfg_.i0, -cfg_.beta);
        return s;
    }
    double parent_amp(std::int64_t n) const {
        if (!cfg_.normalize_total_impact) return 1.0;
        const auto nref =
            std::max<std::int64_t>(1, std::llround(cfg_.normalize_n_ref));
        return std::sqrt(static_cast<double>(n) / static_cast<double>(nref)) *
               shape_sum(nref) / shape_sum(n);
    }

    double draw_f() {
        for (int tries = 0; tries < 64; ++tries) {
            double f;
            if (cfg_.f_pareto)
                f = rng::pareto(g_, cfg_.f_min, cfg_.f_pareto_alpha);
            else
                f = rng::lognormal(g_, std::log(cfg_.f_log_median), cfg_.f_log_sigma);
            if (f >= cfg_.f_min && f <= cfg_.f_max) return f;
        }
        return cfg_.f_min;
    }

    // Session-time sampler honoring the intraday weight profile.
    double draw_session_time(const std::vector<double>& w, double len_s) {
        const auto b = rng::weighted_choice(g_, w.data(), w.size());
        const double bin_w = len_s / static_cast<double>(w.size());
        return (static_cast<double>(b) + rng::uniform01(g_)) * bin_w;
    }

    void simulate_session(int s_idx, std::int64_t day, int half, SimResult& res) {
        const std::int64_t w_start =
            day * ns_per_day + (half == 0 ? tape::am_start : tape::pm_start);
        const std::int64_t w_end = day * ns_per_day + (half == 0 ? tape::am_end : tape::pm_end);
        const double len_s =
            static_cast<double>(w_end - w_start) / static_cast<double>(ns_per_sec);
        auto& ledger = res.ledger;
        LedgerSession ls;
        ls.day = day;
        ls.half = half;
        ls.session_id = tape::SessionId{day, half == 0 ? tape::Half::AM : tape::Half::PM}.str();

        const auto w_bins = bin_weights();
        std::vector<PlanOrder> plan;

        // --- metaorders ---
        std::vector<int> pool(static_cast<std::size_t>(cfg_.n_meta_traders));
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<int>(i);
        for (std::size_t k = pool.size(); k > 1; --k)
            std::swap(pool[k - 1],
                      pool[static_cast<std::size_t>(rng::uniform_int(g_, 0, static_cast<std::int64_t>(k) - 1))]);
        const double meta_target = cfg_.meta_volume_fraction * cfg_.session_volume;
        double meta_acc = 0.0;
        std::size_t pi = 0;
        while (meta_acc < meta_target && pi < pool.size()) {
            char tid[16];
            std::snprintf(tid, sizeof tid, "LT%04d", pool[pi++]);
            const double f = draw_f();
            const std::int64_t Q =
                std::max<std::int64_t>(cfg_.n_min, std::llround(f * cfg_.session_volume));
            const double n_mean =
                cfg_.n_base * std::pow(std::max(1.0, f / cfg_.n_f_ref), cfg_.n_f_exp);
            const std::int64_t N = detail::clamp_i64(
                n_mean * std::exp(cfg_.n_jitter * rng::normal(g_)), cfg_.n_min,
                std::min(cfg_.n_max, Q));
            double dt = cfg_.dt_base_s * std::pow(f / cfg_.dt_f_ref, cfg_.dt_f_exp) *
                        std::exp(cfg_.dt_sigma_log * rng::normal(g_));
            dt = std::clamp(dt, cfg_.dt_min_s, cfg_.dt_max_s);
            if (static_cast<double>(N - 1) * dt > cfg_.max_span_frac * len_s)
                dt = cfg_.max_span_frac * len_s / static_cast<double>(N - 1);
            const double span = static_cast<double>(N - 1) * dt;
            const double start = 60.0 + rng::uniform01(g_) * (len_s - span - 120.0);
            const int sign = rng::bernoulli(g_, 0.5) ? 1 : -1;

            LedgerMetaorder lm;
            lm.session_idx = s_idx;
            lm.trader_id = tid;
            lm.sign = sign;
            lm.N = N;
            lm.dt_s = dt;
            lm.is_meta = true;
            const int lidx = static_cast<int>(ledger.metaorders.size());
            const std::int64_t q_base = Q / N, q_rem = Q % N;
            const double amp = parent_amp(N);
            for (std::int64_t j = 0; j < N; ++j) {
                double t = start + static_cast<double>(j) * dt;
                if (cfg_.child_time_jitter > 0.0)
                    t += dt * cfg_.child_time_jitter * (rng::uniform01(g_) - 0.5);
                const std::int64_t q = q_base + (j < q_rem ? 1 : 0);
                plan.push_back({t, tid, sign, q, dt, cfg_.i0 * dt, lidx, j == 0, j == N - 1,
                                amp});
                lm.Q += q;
            }
            meta_acc += static_cast<double>(lm.Q);
            ledger.metaorders.push_back(std::move(lm));
        }

        // --- fast taker flow ---
        const double fast_target = cfg_.session_volume - meta_acc;
        const double mean_size =
            cfg_.fast_size_median * std::exp(0.5 * cfg_.fast_size_sigma * cfg_.fast_size_sigma);
        const std::int64_t n_fast_orders =
            cfg_.n_fast_takers > 0 && fast_target > 0
                ? static_cast<std::int64_t>(fast_target / mean_size)
                : 0;
        struct TakerRun {
            int lidx = -1;
        };
        std::vector<int> taker_sign(static_cast<std::size_t>(std::max(1, cfg_.n_fast_takers)));
        for (auto& sgn : taker_sign) sgn = rng::bernoulli(g_, 0.5) ? 1 : -1;
        std::vector<TakerRun> taker_run(taker_sign.size());
        // draw times, assign takers round-robin over a shuffled arrival order
        std::vector<double> times(static_cast<std::size_t>(n_fast_orders));
        for (auto& t : times) t = 30.0 + draw_session_time(w_bins, len_s - 60.0);
        std::sort(times.begin(), times.end());
        for (std::size_t k = 0; k < times.size(); ++k) {
            const auto a = static_cast<std::size_t>(
                rng::uniform_int(g_, 0, static_cast<std::int64_t>(taker_sign.size()) - 1));
            char tid[16];
            std::snprintf(tid, sizeof tid, "FT%03d", static_cast<int>(a));
            if (rng::bernoulli(g_, cfg_.fast_flip_prob)) taker_sign[a] = -taker_sign[a];
            const int sign = taker_sign[a];
            const std::int64_t q = detail::clamp_i64(
                cfg_.fast_size_median * std::exp(cfg_.fast_size_sigma * rng::normal(g_)), 1,
                cfg_.fast_size_max);
            // extend or open this taker's ledger run
            bool new_run = true;
            if (taker_run[a].lidx >= 0) {
                auto& lm = ledger.metaorders[static_cast<std::size_t>(taker_run[a].lidx)];
                if (lm.sign == sign) new_run = false;
            }
            if (new_run) {
                LedgerMetaorder lm;
                lm.session_idx = s_idx;
                lm.trader_id = tid;
                lm.sign = sign;
                lm.is_meta = false;
                taker_run[a].lidx = static_cast<int>(ledger.metaorders.size());
                ledger.metaorders.push_back(std::move(lm));
            }
            auto& lm = ledger.metaorders[static_cast<std::size_t>(taker_run[a].lidx)];
            lm.N += 1;
            lm.Q += q;
            plan.push_back({times[k], tid, sign, q, cfg_.dt_ref_s, cfg_.i0 * cfg_.dt_ref_s,
                            taker_run[a].lidx, false, false, parent_amp(1)});
        }
        // mark first/last children of every run in this session
        {
            std::map<int, std::pair<std::size_t, std::size_t>> firstlast;
            std::sort(plan.begin(), plan.end(),
                      [](const PlanOrder& a, const PlanOrder& b) { return a.t < b.t; });
            for (std::size_t i = 0; i < plan.size(); ++i) {
                plan[i].first_child = plan[i].last_child = false;
                auto it = firstlast.find(plan[i].ledger_idx);
                if (it == firstlast.end())
                    firstlast[plan[i].ledger_idx] = {i, i};
                else
                    it->second.second = i;
            }
            for (const auto& [lidx, fl] : firstlast) {
                plan[fl.first].first_child = true;
                plan[fl.second].last_child = true;
            }
        }
        // strictly increasing timestamps (event clusters key off equality)
        for (std::size_t i = 1; i < plan.size(); ++i)
            if (plan[i].t <= plan[i - 1].t) plan[i].t = plan[i - 1].t + 1e-4;

        emit_session(s_idx, w_start, len_s, plan, ls, res);
        ledger.sessions.push_back(std::move(ls));
    }

    std::int64_t draw_quote_size() {
        return detail::clamp_i64(
            cfg_.quote_size_median * std::exp(cfg_.quote_size_sigma * rng::normal(g_)), 1,
            cfg_.quote_size_max);
    }

    std::string next_order_id() {
        char buf[20];
        std::snprintf(buf, sizeof buf, "O%09lld", static_cast<long long>(order_counter_++));
        return buf;
    }

    void emit_session(int s_idx, std::int64_t w_start, double len_s,
                      const std::vector<PlanOrder>& plan, LedgerSession& ls, SimResult& res) {
        auto& events = res.events;
        auto& ledger = res.ledger;
        detail::KernelField field(cfg_.G0, cfg_.beta, cfg_.exact_kernel, cfg_.kernel_recent_s,
                                  cfg_.kernel_refresh_s);
        const std::int64_t hs = cfg_.spread_ticks / 2;
        const double log_p0_ticks = std::log(cfg_.p0_price / cfg_.tick_size);

        // provider state
        detail::ZipfSampler zipf(cfg_.refill_mu, cfg_.refill_len_cap);
        std::vector<ProvState> provs;
        for (const auto& spec : cfg_.providers) {
            ProvState p;
            p.spec = &spec;
            p.sign = rng::bernoulli(g_, 0.5) ? 1 : -1;
            p.remaining = zipf.draw(g_);
            provs.push_back(p);
        }
        std::vector<MmState> mms;
        if (cfg_.emit_limit_events)
            for (const auto& spec : cfg_.providers)
                if (spec.fast)
                    mms.push_back({spec.id, rng::bernoulli(g_, 0.5) ? 1 : -1, "", 0, 0,
                                   rng::exponential(g_, cfg_.mm_limit_refresh_s)});

        // current quote snapshot
        std::int64_t bid = 0, ask = 0, bs = 0, as = 0;
        double noise = 0.0, t_prev = 0.0;
        double row_noiseless = 0.0;  // noiseless quoted-mid rule, mirrors the tape
        std::vector<FillCtx> fills;
        std::map<int, std::vector<std::pair<double, double>>> own_children;  // lidx -> (t, q)

        auto recenter = [&](double t, double extra) {
            noise += cfg_.noise_sigma_per_sqrt_s * std::sqrt(std::max(0.0, t - t_prev)) *
                     rng::normal(g_);
            t_prev = t;
            const double kern = field.sum_at(t);
            const double m = log_p0_ticks + noise + kern + extra;
            const std::int64_t c = std::llround(std::exp(m));
            bid = c - hs;
            ask = c + hs;
            bs = draw_quote_size();
            as = draw_quote_size();
            row_noiseless = log_p0_ticks + kern + extra;
            return c;
        };

        auto push_event = [&](std::int64_t ts, const std::string& oid, const std::string& tid,
                              tape::EventKind kind, int sign, std::int32_t price,
                              std::int64_t size) {
            tape::OrderEvent ev;
            ev.ts_ns = ts;
            ev.order_id = oid;
            ev.trader_id = tid;
            ev.kind = kind;
            ev.side = static_cast<std::int8_t>(sign);
            ev.price_ticks = price;
            ev.size = static_cast<std::int32_t>(size);
            ev.best_bid = static_cast<std::int32_t>(bid);
            ev.best_ask = static_cast<std::int32_t>(ask);
            ev.bid_size = static_cast<std::int32_t>(bs);
            ev.ask_size = static_cast<std::int32_t>(as);
            events.push_back(std::move(ev));
        };

        // a few pre-window rows so session trimming has something to discard
        {
            const std::int64_t open_ts = w_start - tape::trim_ns;
            recenter(0.0, 0.0);
            for (int k = 0; k < 3; ++k)
                push_event(open_ts + (k + 1) * 2 * ns_per_min, next_order_id(),
                           cfg_.providers.front().id, tape::EventKind::submit_limit,
                           k % 2 == 0 ? 1 : -1,
                           static_cast<std::int32_t>(k % 2 == 0 ? bid : ask), draw_quote_size());
        }
        // opening quote inside the window
        recenter(0.0, 0.0);
        push_event(w_start, next_order_id(), cfg_.providers.front().id,
                   tape::EventKind::submit_limit, 1, static_cast<std::int32_t>(bid),
                   draw_quote_size());

        double session_hi = -1e300, session_lo = 1e300, session_open = 0.0;
        bool session_any = false;
        auto note_mid = [&]() {
            const double m = 0.5 * (static_cast<double>(bid) + static_cast<double>(ask));
            if (!session_any) {
                session_open = m;
                session_any = true;
            }
            session_hi = std::max(session_hi, m);
            session_lo = std::min(session_lo, m);
        };
        note_mid();

        std::size_t pi = 0;
        std::size_t mm_rr = 0;
        double t = 0.0;
        double pending_refresh = 1e300;  // post-trade repost after frozen fills
        int pending_side = 1;
        std::vector<double> prov_weights(provs.size());
        while (pi < plan.size() || !mms.empty() || pending_refresh < 1e300) {
            // next MM refresh vs next market order
            double t_mm = 1e300;
            std::size_t mm_i = 0;
            for (std::size_t k = 0; k < mms.size(); ++k)
                if (mms[k].next_t < t_mm) {
                    t_mm = mms[k].next_t;
                    mm_i = k;
                }
            const double t_mo = pi < plan.size() ? plan[pi].t : 1e300;
            if (pending_refresh < t_mm && pending_refresh < t_mo) {
                t = pending_refresh;
                pending_refresh = 1e300;
                if (t >= len_s - 0.5) continue;
                const std::int64_t ts = w_start + static_cast<std::int64_t>(t * 1e9);
                recenter(t, 0.0);
                push_event(ts, next_order_id(),
                           mms.empty() ? cfg_.providers.front().id : mms[mm_rr % mms.size()].id,
                           tape::EventKind::submit_limit, pending_side,
                           static_cast<std::int32_t>(pending_side > 0 ? bid : ask),
                           draw_quote_size());
                ++mm_rr;
                note_mid();
                continue;
            }
            if (t_mm >= len_s - 1.0 && t_mo >= 1e300) break;
            if (t_mm < t_mo) {
                // limit-order churn: cancel the stale quote, post a new one
                auto& mm = mms[mm_i];
                t = t_mm;
                mm.next_t = t_mm + rng::exponential(g_, cfg_.mm_limit_refresh_s);
                if (t >= len_s - 1.0) {
                    mm.next_t = 1e300;
                    bool all_done = true;
                    for (const auto& m : mms)
                        if (m.next_t < 1e300) all_done = false;
                    if (all_done && pi >= plan.size()) break;
                    continue;
                }
                const std::int64_t ts = w_start + static_cast<std::int64_t>(t * 1e9);
                recenter(t, 0.0);
                if (!mm.open_order.empty() && rng::bernoulli(g_, 0.5))
                    push_event(ts, mm.open_order, mm.id, tape::EventKind::cancel, mm.next_side,
                               mm.open_price, mm.open_size);
                mm.next_side = -mm.next_side;
                mm.open_order = next_order_id();
                mm.open_size = draw_quote_size();
                mm.open_price = static_cast<std::int32_t>(mm.next_side > 0 ? bid : ask);
                push_event(ts, mm.open_order, mm.id, tape::EventKind::submit_limit, mm.next_side,
                           mm.open_price, mm.open_size);
                note_mid();
                continue;
            }
            // market order
            const auto& po = plan[pi++];
            t = po.t;
            const std::int64_t ts = w_start + static_cast<std::int64_t>(t * 1e9);
            const std::int64_t opp = po.sign > 0 ? as : bs;
            const double q = po.amp * po.amp * static_cast<double>(po.q);  // kernel-effective
            const bool immediate = po.q > opp;
            const std::int32_t exec_price = static_cast<std::int32_t>(po.sign > 0 ? ask : bid);
            double pre_row_noiseless = row_noiseless;
            if (immediate) {
                recenter(t, po.sign * field.at_lag0(q, po.dt, po.s0));
            } else {
                // frozen book: prices unchanged, opposite size consumed
                if (po.sign > 0)
                    as = opp - po.q > 0 ? opp - po.q : draw_quote_size();
                else
                    bs = opp - po.q > 0 ? opp - po.q : draw_quote_size();
                // row_noiseless intentionally frozen at pre_row_noiseless
                row_noiseless = pre_row_noiseless;
                if (cfg_.quote_refresh_after_trade) {
                    pending_refresh = std::min(pending_refresh, t + cfg_.refresh_delay_s);
                    pending_side = -po.sign;
                }
            }
            auto& lm = ledger.metaorders[static_cast<std::size_t>(po.ledger_idx)];
            if (po.first_child) {
                // measurement anchor: snapshot of the previous row
                lm.noiseless_pre = pre_row_noiseless;
                lm.start_ts = ts;
            }
            push_event(ts, next_order_id(), po.trader, tape::EventKind::submit_market, po.sign,
                       exec_price, po.q);
            note_mid();
            if (cfg_.ledger_children) {
                lm.child_ts.push_back(ts);
                lm.child_q.push_back(po.q);
            }
            // provider selection and the fill row
            int chosen = -1;
            if (!rng::bernoulli(g_, cfg_.crowd_weight)) {
                double total = 0.0;
                for (std::size_t k = 0; k < provs.size(); ++k) {
                    const bool ok = provs[k].sign == po.sign &&
                                    std::llabs(provs[k].inventory -
                                               static_cast<std::int64_t>(po.sign) * po.q) <=
                                        cfg_.provider_inventory_bound;
                    prov_weights[k] = ok ? provs[k].spec->weight : 0.0;
                    total += prov_weights[k];
                }
                if (total > 0.0)
                    chosen = static_cast<int>(
                        rng::weighted_choice(g_, prov_weights.data(), prov_weights.size()));
            }
            std::string prov_id;
            std::int64_t rank = 0;
            if (chosen >= 0) {
                auto& pv = provs[static_cast<std::size_t>(chosen)];
                pv.rank += 1;
                rank = pv.rank;
                pv.inventory -= static_cast<std::int64_t>(po.sign) * po.q;
                pv.remaining -= 1;
                prov_id = pv.spec->id;
                if (pv.remaining <= 0 ||
                    std::llabs(pv.inventory) > cfg_.provider_inventory_bound) {
                    pv.sign = -pv.sign;
                    pv.remaining = zipf.draw(g_);
                    pv.rank = 0;
                }
            } else {
                char cid[16];
                std::snprintf(cid, sizeof cid, "CR%03d",
                              static_cast<int>(rng::uniform_int(g_, 0, cfg_.n_crowd - 1)));
                prov_id = cid;
            }
            const double anchor_lp =
                std::log(0.5 * (static_cast<double>(bid) + static_cast<double>(ask)));
            push_event(ts, next_order_id(), prov_id, tape::EventKind::execute, po.sign,
                       exec_price, po.q);
            fills.push_back({events.size() - 1, chosen, po.sign, rank, anchor_lp});
            if (po.last_child) {
                lm.noiseless_post = row_noiseless;
                lm.end_ts = ts;
                // Own-kernel displacement at the post-measurement row: earlier
                // children decayed to now, plus the last child's instantaneous
                // term when the book recentred on it.
                double own = 0.0;
                for (const auto& [tj, qj] : own_children[po.ledger_idx])
                    own += std::sqrt(qj) * std::pow(po.dt, cfg_.beta) *
                           std::pow(t - tj + po.s0, -cfg_.beta);
                if (immediate) own += field.at_lag0(q, po.dt, po.s0) / cfg_.G0;
                lm.predicted_dp = cfg_.G0 * own;
                own_children.erase(po.ledger_idx);
            } else {
                own_children[po.ledger_idx].emplace_back(t, q);
            }
            ls.V_D += po.q;
            // the child starts decaying from now on
            field.add(t, q, po.dt, po.s0, po.sign);
        }

        ls.sigma_D = session_any && session_open > 0.0
                         ? (session_hi - session_lo) / session_open
                         : 0.0;

        // second pass: scripted fill prices rescaled by the realized sigma_D
        for (auto& pv : provs) {
            pv.rank = 0;
            pv.lp = 0.0;
        }
        std::vector<std::int64_t> seq_rank(provs.size(), 0);
        for (const auto& fc : fills) {
            auto& ev = events[fc.event_idx];
            if (fc.prov < 0) continue;  // crowd fill keeps the book price
            auto& pv = provs[static_cast<std::size_t>(fc.prov)];
            if (fc.rank <= 1)
                pv.lp = fc.anchor_lp;
            else
                pv.lp += fc.sign * ls.sigma_D * pv.spec->C *
                         std::pow(static_cast<double>(fc.rank - 1), -pv.spec->kappa);
            ev.price_ticks = static_cast<std::int32_t>(std::llround(std::exp(pv.lp)));
        }
    }

    void collect_agents(GroundTruthLedger& ledger) {
        std::map<std::string, AgentInfo> agents;
        for (int i = 0; i < cfg_.n_meta_traders; ++i) {
            char tid[16];
            std::snprintf(tid, sizeof tid, "LT%04d", i);
            agents[tid] = {tid, "meta_trader", false};
        }
        for (int i = 0; i < cfg_.n_fast_takers; ++i) {
            char tid[16];
            std::snprintf(tid, sizeof tid, "FT%03d", i);
            agents[tid] = {tid, "fast_taker", true};
        }
        for (const auto& spec : cfg_.providers)
            agents[spec.id] = {spec.id, spec.fast ? "mm_provider" : "slow_provider", spec.fast};
        for (int i = 0; i < cfg_.n_crowd; ++i) {
            char cid[16];
            std::snprintf(cid, sizeof cid, "CR%03d", i);
            agents[cid] = {cid, "crowd", false};
        }
        for (auto& [id, a] : agents) ledger.agents.push_back(a);
    }

    SimConfig cfg_;
    rng::Engine g_;
    std::int64_t order_counter_ = 0;
};

inline SimResult simulate(const SimConfig& cfg) { return Simulator(cfg).run(); }

// Preset whose emitted tapes land in the documented stylized-fact bands
// (participation mode, inter-child times, ecology shares).
inline SimConfig preset_paper_like() {
    SimConfig cfg;
    cfg.n_sessions = 8;
    cfg.session_volume = 2e6;
    cfg.meta_volume_fraction = 0.45;
    cfg.n_fast_takers = 12;
    cfg.u_shape_amp = 0.5;
    cfg.normalize_total_impact = true;
    cfg.noise_sigma_per_sqrt_s = 3e-5;
    cfg.quote_size_median = 40.0;
    cfg.quote_size_sigma = 0.8;
    cfg.max_span_frac = 0.35;
    cfg.f_max = 1e-2;
    return cfg;
}

}  // namespace mim::sim
