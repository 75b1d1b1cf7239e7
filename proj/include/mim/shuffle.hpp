#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mim/impact.hpp"
#include "mim/metaorder.hpp"
#include "mim/rng.hpp"
#include "mim/stats.hpp"
#include "mim/tape.hpp"

namespace mim::shuffle {

struct ShuffledSession {
    tape::Session session;
    std::uint64_t seed = 0;
};

// Fisher-Yates permutation of the trader_id column across the session's
// market orders only; every other field, and every L/C/X row, is
// untouched. Deterministic in (session, seed).
inline ShuffledSession shuffle_ids(const tape::Session& session, std::uint64_t seed) {
    std::vector<std::size_t> mo_idx;
    for (std::size_t i = 0; i < session.events.size(); ++i)
        if (session.events[i].kind == tape::EventKind::submit_market) mo_idx.push_back(i);
    if (mo_idx.size() < 2) throw TooFewOrders("shuffle_ids: fewer than 2 market orders");
    ShuffledSession out{session, seed};
    rng::Engine g(seed);
    for (std::size_t k = mo_idx.size() - 1; k > 0; --k) {
        const auto j = static_cast<std::size_t>(rng::uniform_int(g, 0, static_cast<std::int64_t>(k)));
        std::swap(out.session.events[mo_idx[k]].trader_id, out.session.events[mo_idx[j]].trader_id);
    }
    return out;
}

struct SyntheticResult {
    std::vector<meta::Metaorder> metaorders;
    impact::ImpactCurve curve;
    std::uint64_t seed = 0;
};

inline SyntheticResult synthetic_pipeline(const tape::Session& session, std::uint64_t seed,
                                          const impact::ImpactCurveOptions& opt = {}) {
    SyntheticResult out;
    out.seed = seed;
    const auto sh = shuffle_ids(session, seed);
    out.metaorders = meta::reconstruct(sh.session);
    out.curve = impact::metaorder_impact_curve(out.metaorders, opt);
    return out;
}

// Multi-session variant: each session shuffled with a seed derived from
// (base seed, session ordinal).
inline SyntheticResult synthetic_pipeline(const std::vector<tape::Session>& sessions,
                                          std::uint64_t seed,
                                          const impact::ImpactCurveOptions& opt = {}) {
    SyntheticResult out;
    out.seed = seed;
    std::uint64_t k = 0;
    for (const auto& s : sessions) {
        ++k;
        std::size_t n_mo = 0;
        for (const auto& ev : s.events)
            if (ev.kind == tape::EventKind::submit_market && ++n_mo >= 2) break;
        if (n_mo < 2) continue;
        const auto sh = shuffle_ids(s, seed * 0x9e3779b97f4a7c15ULL + k);
        auto ms = meta::reconstruct(sh.session);
        out.metaorders.insert(out.metaorders.end(), std::make_move_iterator(ms.begin()),
                              std::make_move_iterator(ms.end()));
    }
    out.curve = impact::metaorder_impact_curve(out.metaorders, opt);
    return out;
}

// ---------------------------------------------------------------------------
// Curve comparison: per-bin z-scores and a global chi^2 over shared
// well-populated bins.

struct CurveComparison {
    std::vector<double> z;          // one entry per shared bin
    std::vector<std::size_t> bins;  // bin indices used
    double chi2 = 0.0;
    std::int64_t dof = 0;
    double p_value = 1.0;
};

inline CurveComparison compare_curves(const stats::BinnedCurve& a, const stats::BinnedCurve& b,
                                      std::int64_t min_bin_count = 50, double x_lo = 0.0,
                                      double x_hi = std::numeric_limits<double>::infinity()) {
    if (a.edges != b.edges) throw BinMismatch("compare_curves: curves must share bin edges");
    CurveComparison cmp;
    for (std::size_t i = 0; i < a.bins.size(); ++i) {
        if (a.bins[i].n < min_bin_count || b.bins[i].n < min_bin_count) continue;
        const double x = a.x_of(i);
        if (x < x_lo || x > x_hi) continue;
        const double se2 = a.bins[i].se() * a.bins[i].se() + b.bins[i].se() * b.bins[i].se();
        if (se2 <= 0.0) continue;
        const double z = (a.bins[i].mean() - b.bins[i].mean()) / std::sqrt(se2);
        cmp.z.push_back(z);
        cmp.bins.push_back(i);
        cmp.chi2 += z * z;
        ++cmp.dof;
    }
    cmp.p_value = cmp.dof > 0 ? fit::chi2_sf(cmp.chi2, static_cast<double>(cmp.dof)) : 1.0;
    return cmp;
}

// Trader-ID frequency histogram over market orders; shuffling must
// preserve it exactly.
inline std::map<std::string, std::int64_t> id_histogram(const tape::Session& s) {
    std::map<std::string, std::int64_t> h;
    for (const auto& ev : s.events)
        if (ev.kind == tape::EventKind::submit_market) ++h[ev.trader_id];
    return h;
}

}  // namespace mim::shuffle
