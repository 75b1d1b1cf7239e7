#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mim/fit.hpp"
#include "mim/stats.hpp"
#include "mim/tape.hpp"

namespace mim::refill {

struct Fill {
    std::int64_t t_ns;
    std::int64_t q;
    double log_p;  // log fill price
};

// Consecutive filled limit orders of one provider, same aggressor sign,
// within one session. sign is the aggressor's: +1 means the provider's
// asks are being lifted.
struct RefillSequence {
    std::string provider_id;
    int sign = +1;
    std::vector<Fill> fills;
    std::int64_t n() const { return static_cast<std::int64_t>(fills.size()); }
    std::int64_t volume() const {
        std::int64_t v = 0;
        for (const auto& f : fills) v += f.q;
        return v;
    }
};

// Per-provider sign-run decomposition of the filled-limit-order stream.
// A partially filled limit order counts once, at its first fill price.
inline std::vector<RefillSequence> extract_refill_sequences(const tape::Session& session) {
    std::vector<RefillSequence> done;
    std::map<std::string, RefillSequence> open;
    std::map<std::string, std::string> last_order;  // provider -> last seen order_id
    for (const auto& ev : session.events) {
        if (ev.kind != tape::EventKind::execute) continue;
        auto lo = last_order.find(ev.trader_id);
        const bool same_order = lo != last_order.end() && lo->second == ev.order_id;
        last_order[ev.trader_id] = ev.order_id;
        auto it = open.find(ev.trader_id);
        if (it != open.end() && it->second.sign != ev.side) {
            done.push_back(std::move(it->second));
            open.erase(it);
            it = open.end();
        }
        if (same_order && it != open.end()) {
            it->second.fills.back().q += ev.size;  // later fill of the same order
            continue;
        }
        if (it == open.end()) {
            RefillSequence seq;
            seq.provider_id = ev.trader_id;
            seq.sign = ev.side;
            it = open.emplace(ev.trader_id, std::move(seq)).first;
        }
        it->second.fills.push_back(
            {ev.ts_ns, ev.size, std::log(static_cast<double>(ev.price_ticks))});
    }
    for (auto& [id, seq] : open) done.push_back(std::move(seq));
    std::sort(done.begin(), done.end(), [](const RefillSequence& a, const RefillSequence& b) {
        if (a.fills.front().t_ns != b.fills.front().t_ns)
            return a.fills.front().t_ns < b.fills.front().t_ns;
        return a.provider_id < b.provider_id;
    });
    return done;
}

// psi(n) tail fit via the discrete power-law MLE.
inline fit::TailFit length_distribution(const std::vector<RefillSequence>& sequences) {
    if (sequences.size() < 100)
        throw TooFewTailSamples("length_distribution: need >= 100 sequences");
    std::vector<std::int64_t> lengths;
    lengths.reserve(sequences.size());
    for (const auto& s : sequences) lengths.push_back(s.n());
    return fit::fit_tail_exponent(lengths);
}

// ---------------------------------------------------------------------------
// Per-provider refill function K(i) = E[eps (p_{i+1}-p_i)/sigma_D | i].

struct RefillFit {
    std::string provider_id;
    double C = 0.0;
    double kappa = 0.0;
    std::int64_t n_sequences = 0;
    double liquidity_share = 0.0;  // fraction of the filled-limit volume
    bool wary() const { return C >= 0.02; }
};

struct RefillOptions {
    std::int64_t min_sequences = 30;
    std::size_t max_rank = 50;
    std::int64_t min_rank_count = 10;
    std::size_t top_providers = 100;  // most active by filled volume
};

struct ProviderData {
    std::vector<const RefillSequence*> sequences;  // with per-session sigma_D
    std::vector<double> sigma_D;
};

// K(i) profile for one provider pooled over sequences (ranks condition on
// n >= i+1; cross-sequence pairs are never formed).
inline std::vector<stats::Accum> refill_profile(const ProviderData& pd, std::size_t max_rank) {
    std::vector<stats::Accum> prof(max_rank);
    for (std::size_t s = 0; s < pd.sequences.size(); ++s) {
        const auto& seq = *pd.sequences[s];
        const double sd = pd.sigma_D[s];
        if (sd <= 0.0) continue;
        const std::size_t top = std::min(seq.fills.size(), max_rank + 1);
        for (std::size_t i = 1; i < top; ++i) {
            const double dp = seq.fills[i].log_p - seq.fills[i - 1].log_p;
            prof[i - 1].add(seq.sign * dp / sd);
        }
    }
    return prof;
}

inline RefillFit refill_function(const std::string& provider_id, const ProviderData& pd,
                                 const RefillOptions& opt = {}) {
    std::int64_t usable = 0;
    for (const auto* s : pd.sequences)
        if (s->n() >= 2) ++usable;
    if (usable < opt.min_sequences)
        throw InsufficientSequences("refill_function: provider " + provider_id + " has " +
                                    std::to_string(usable) + " sequences with n >= 2");
    const auto prof = refill_profile(pd, opt.max_rank);
    std::vector<double> x, y, se;
    for (std::size_t i = 0; i < prof.size(); ++i) {
        if (prof[i].n < opt.min_rank_count) continue;
        x.push_back(static_cast<double>(i + 1));
        y.push_back(prof[i].mean());
        se.push_back(prof[i].se());
    }
    const auto pf = fit::fit_power_curve(x, y, se);
    RefillFit f;
    f.provider_id = provider_id;
    f.C = pf.prefactor;
    f.kappa = -pf.exponent;
    f.n_sequences = usable;
    return f;
}

// Fits the top providers by filled volume; sessions supply sigma_D for
// the rescaling.
inline std::vector<RefillFit> fit_providers(const std::vector<tape::Session>& sessions,
                                            const RefillOptions& opt = {}) {
    std::map<std::string, ProviderData> providers;
    std::map<std::string, std::int64_t> volume;
    std::vector<std::vector<RefillSequence>> storage;
    storage.reserve(sessions.size());
    std::int64_t total_filled = 0;
    for (const auto& sess : sessions) {
        double sd = 0.0;
        try {
            sd = tape::session_stats(sess).sigma_D;
        } catch (const NoQuotes&) {
            continue;
        }
        storage.push_back(extract_refill_sequences(sess));
        for (const auto& seq : storage.back()) {
            auto& pd = providers[seq.provider_id];
            pd.sequences.push_back(&seq);
            pd.sigma_D.push_back(sd);
            volume[seq.provider_id] += seq.volume();
            total_filled += seq.volume();
        }
    }
    std::vector<std::pair<std::int64_t, std::string>> ranked;
    for (const auto& [id, v] : volume) ranked.emplace_back(v, id);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<RefillFit> fits;
    for (std::size_t k = 0; k < ranked.size() && k < opt.top_providers; ++k) {
        const auto& id = ranked[k].second;
        try {
            auto f = refill_function(id, providers.at(id), opt);
            f.liquidity_share = total_filled > 0
                                    ? static_cast<double>(volume.at(id)) /
                                          static_cast<double>(total_filled)
                                    : 0.0;
            fits.push_back(std::move(f));
        } catch (const FitError&) {
            // provider too thin or degenerate; skip
        }
    }
    return fits;
}

// Fig-9-style curve with privacy smoothing: providers sorted by C and
// adjacent pairs averaged, halving the point count.
struct SharePoint {
    double C;
    double share;
};

inline std::vector<SharePoint> liquidity_share_vs_C(std::vector<RefillFit> fits) {
    if (fits.size() < 2) return {};
    std::sort(fits.begin(), fits.end(),
              [](const RefillFit& a, const RefillFit& b) { return a.C < b.C; });
    std::vector<SharePoint> pts;
    for (std::size_t i = 0; i + 1 < fits.size(); i += 2)
        pts.push_back({0.5 * (fits[i].C + fits[i + 1].C),
                       0.5 * (fits[i].liquidity_share + fits[i + 1].liquidity_share)});
    return pts;
}

}  // namespace mim::refill
