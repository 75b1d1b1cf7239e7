#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mim/stats.hpp"
#include "mim/tape.hpp"

namespace mim::meta {

struct Child {
    std::int64_t t_ns = 0;
    std::int64_t q = 0;
    double log_p_before = 0.0;  // log mid just before execution
    bool has_p_before = false;
};

struct Metaorder {
    std::string trader_id;
    tape::SessionId session{};
    int sign = +1;
    std::vector<Child> children;
    std::int64_t Q = 0;
    double T_s = 0.0;          // t_N - t_1 in seconds
    double f = 0.0;            // Q / V_D
    double sigma_D = 0.0;
    std::int64_t V_D = 0;
    double log_p_after_last = 0.0;  // log mid just after the last child's fills
    bool has_p_after = false;
    bool ended_by_flip = false;     // false: truncated by session end

    std::int64_t N() const { return static_cast<std::int64_t>(children.size()); }
    std::int64_t start_ts() const { return children.front().t_ns; }
    std::int64_t end_ts() const { return children.back().t_ns; }
    double mean_child_size() const { return static_cast<double>(Q) / static_cast<double>(N()); }

    // epsilon * (log mid after last child - log mid before first child)
    std::optional<double> impact() const {
        if (!children.front().has_p_before || !has_p_after) return std::nullopt;
        return sign * (log_p_after_last - children.front().log_p_before);
    }
};

struct ReconstructOptions {
    // Optional run-splitting on inter-child gaps; disabled by default (no
    // such threshold exists in the sign-run definition).
    std::optional<std::int64_t> max_gap_ns;
};

// Sign-run decomposition of each trader's market-order stream. Runs break
// only on a sign flip by the same trader (or the optional gap threshold);
// other traders' interleaved events are irrelevant.
inline std::vector<Metaorder> reconstruct(const tape::Session& session,
                                          const ReconstructOptions& opt = {}) {
    const auto st = [&] {
        try {
            return tape::session_stats(session);
        } catch (const NoQuotes&) {
            return tape::SessionStats{session.executed_volume(), 0.0};
        }
    }();

    std::vector<Metaorder> done;
    std::map<std::string, Metaorder> open;  // per trader

    double last_mid = 0.0;  // running post-event snapshot
    bool have_mid = false;

    auto close = [&](Metaorder& m, bool flip) {
        m.ended_by_flip = flip;
        m.Q = 0;
        for (const auto& c : m.children) m.Q += c.q;
        m.T_s = static_cast<double>(m.children.back().t_ns - m.children.front().t_ns) /
                static_cast<double>(ns_per_sec);
        m.V_D = st.V_D;
        m.sigma_D = st.sigma_D;
        m.f = st.V_D > 0 ? static_cast<double>(m.Q) / static_cast<double>(st.V_D) : 0.0;
        done.push_back(std::move(m));
    };

    const auto& evs = session.events;
    for (std::size_t i = 0; i < evs.size(); ++i) {
        const auto& ev = evs[i];
        if (ev.kind != tape::EventKind::submit_market) {
            if (ev.has_quotes()) {
                last_mid = ev.mid_ticks();
                have_mid = true;
            }
            continue;
        }
        Child c;
        c.t_ns = ev.ts_ns;
        c.q = ev.size;
        if (have_mid) {
            c.log_p_before = std::log(last_mid);
            c.has_p_before = true;
        }
        // Post-fill mid: last quoted snapshot within this order's event
        // cluster (the M row and its fills share a timestamp).
        double after = last_mid;
        bool has_after = have_mid;
        for (std::size_t j = i; j < evs.size() && evs[j].ts_ns == ev.ts_ns; ++j) {
            if (evs[j].has_quotes()) {
                after = evs[j].mid_ticks();
                has_after = true;
            }
        }

        auto it = open.find(ev.trader_id);
        if (it != open.end()) {
            const bool flip = it->second.sign != ev.side;
            const bool gap = opt.max_gap_ns &&
                             ev.ts_ns - it->second.children.back().t_ns > *opt.max_gap_ns;
            if (flip || gap) {
                close(it->second, flip);
                open.erase(it);
                it = open.end();
            }
        }
        if (it == open.end()) {
            Metaorder m;
            m.trader_id = ev.trader_id;
            m.session = session.id;
            m.sign = ev.side;
            it = open.emplace(ev.trader_id, std::move(m)).first;
        }
        it->second.children.push_back(c);
        if (has_after) {
            it->second.log_p_after_last = std::log(after);
            it->second.has_p_after = true;
        } else {
            it->second.has_p_after = false;
        }
        if (ev.has_quotes()) {
            last_mid = ev.mid_ticks();
            have_mid = true;
        }
    }
    for (auto& [id, m] : open) close(m, false);
    // Deterministic order: by (start time, trader)
    std::sort(done.begin(), done.end(), [](const Metaorder& a, const Metaorder& b) {
        if (a.start_ts() != b.start_ts()) return a.start_ts() < b.start_ts();
        return a.trader_id < b.trader_id;
    });
    return done;
}

inline std::vector<Metaorder> reconstruct_all(const std::vector<tape::Session>& sessions,
                                              const ReconstructOptions& opt = {}) {
    std::vector<Metaorder> all;
    for (const auto& s : sessions) {
        auto ms = reconstruct(s, opt);
        all.insert(all.end(), std::make_move_iterator(ms.begin()), std::make_move_iterator(ms.end()));
    }
    return all;
}

// ---------------------------------------------------------------------------
// Stylized facts: mean inter-child time and mean N vs f, plus the f
// distribution.

struct StylizedFacts {
    stats::BinnedCurve dt_vs_f;   // seconds
    stats::BinnedCurve n_vs_f;
    stats::BinnedCurve f_hist;    // per-bin count via Accum::n; mean field unused
};

inline std::vector<double> default_f_edges() { return stats::log_edges(1e-6, 0.3, 4); }

inline StylizedFacts stylized_facts(const std::vector<Metaorder>& metaorders,
                                    std::vector<double> f_edges = default_f_edges()) {
    StylizedFacts out{stats::BinnedCurve(f_edges), stats::BinnedCurve(f_edges),
                      stats::BinnedCurve(f_edges)};
    for (const auto& m : metaorders) {
        if (m.f <= 0.0) continue;
        out.f_hist.add(m.f, 1.0);
        out.n_vs_f.add(m.f, static_cast<double>(m.N()));
        if (m.N() >= 2) {
            const double dt = m.T_s / static_cast<double>(m.N() - 1);
            out.dt_vs_f.add(m.f, dt);
        }
    }
    return out;
}

// Mode of the f histogram (center of the densest bin, density corrected
// for log-spaced bin widths).
inline double f_mode(const stats::BinnedCurve& f_hist) {
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < f_hist.bins.size(); ++i) {
        const double width = std::log(f_hist.edges[i + 1] / f_hist.edges[i]);
        const double dens = static_cast<double>(f_hist.bins[i].n) / width;
        if (dens > best) {
            best = dens;
            arg = i;
        }
    }
    return std::sqrt(f_hist.edges[arg] * f_hist.edges[arg + 1]);
}

// ---------------------------------------------------------------------------
// Execution schedule profile: mean executed fraction vs rescaled time.

struct ScheduleProfile {
    std::vector<double> x;      // bin centers on [0,1]
    std::vector<stats::Accum> bins;
    std::int64_t n_metaorders = 0;
    std::int64_t n_degenerate = 0;  // N>=2 with T=0, excluded

    double max_diagonal_deviation() const {
        double d = 0.0;
        for (std::size_t i = 0; i < bins.size(); ++i)
            if (bins[i].n > 0) d = std::max(d, std::fabs(bins[i].mean() - x[i]));
        return d;
    }
};

inline ScheduleProfile execution_profile(const std::vector<Metaorder>& metaorders,
                                         std::size_t nbins = 20) {
    ScheduleProfile prof;
    prof.bins.resize(nbins);
    prof.x.resize(nbins);
    for (std::size_t i = 0; i < nbins; ++i)
        prof.x[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(nbins);
    for (const auto& m : metaorders) {
        if (m.N() < 2) continue;
        if (m.T_s <= 0.0) {
            ++prof.n_degenerate;
            continue;
        }
        ++prof.n_metaorders;
        std::int64_t cum = 0;
        for (const auto& c : m.children) {
            cum += c.q;
            double x = static_cast<double>(c.t_ns - m.start_ts()) /
                       (static_cast<double>(ns_per_sec) * m.T_s);
            auto b = static_cast<std::size_t>(x * static_cast<double>(nbins));
            b = std::min(b, nbins - 1);
            prof.bins[b].add(static_cast<double>(cum) / static_cast<double>(m.Q));
        }
    }
    return prof;
}

}  // namespace mim::meta
