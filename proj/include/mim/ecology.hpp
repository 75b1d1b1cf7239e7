#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mim/tape.hpp"

namespace mim::eco {

enum class TraderClass : std::uint8_t { fast, slow };

struct InventoryPoint {
    std::int64_t t_ns;
    std::int64_t inventory;  // signed shares
};

struct TraderProfile {
    std::string trader_id;
    std::optional<double> tau_s;  // undefined when the trader never flips sign
    TraderClass cls = TraderClass::slow;
    std::int64_t mo_volume = 0;          // executed via own market orders
    std::int64_t filled_limit_volume = 0;
    std::int64_t n_orders = 0;
    std::vector<InventoryPoint> inventory;  // step function, starts at 0

    double max_abs_inventory() const {
        std::int64_t m = 0;
        for (const auto& p : inventory)
            m = std::max<std::int64_t>(m, std::llabs(p.inventory));
        return static_cast<double>(m);
    }
    double traded_volume() const {
        return static_cast<double>(mo_volume + filled_limit_volume);
    }
};

struct EcologyOptions {
    bool market_orders_only = false;  // tau from M signs only (sensitivity mode)
    bool track_inventory = false;
};

// Mean time between consecutive opposite-sign submissions; nullopt when
// the sign never flips.
inline std::optional<double> reversal_time(const std::vector<std::int64_t>& ts,
                                           const std::vector<int>& signs) {
    double sum = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (signs[i] != signs[i - 1]) {
            sum += static_cast<double>(ts[i] - ts[i - 1]) / static_cast<double>(ns_per_sec);
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

struct SessionEcology {
    std::map<std::string, TraderProfile> traders;
    std::int64_t V_D = 0;
    std::int64_t V_fast = 0;               // MO volume by fast traders
    std::int64_t executed_against_fast = 0;  // fill volume resting with fast traders
    std::int64_t N_fast = 0;
    std::int64_t N_D = 0;  // traders with at least one execution (M or filled limit)

    double v_fast_share() const {
        return V_D > 0 ? static_cast<double>(V_fast) / static_cast<double>(V_D) : 0.0;
    }
    double n_fast_share() const {
        return N_D > 0 ? static_cast<double>(N_fast) / static_cast<double>(N_D) : 0.0;
    }
    double against_fast_share() const {
        return V_D > 0 ? static_cast<double>(executed_against_fast) / static_cast<double>(V_D) : 0.0;
    }
};

// Fast/slow split at the trimmed session length (the broadest
// definition); participation shares per the session's market-order flow.
inline SessionEcology classify_session(const tape::Session& session,
                                       const EcologyOptions& opt = {}) {
    SessionEcology out;
    const double session_len_s =
        static_cast<double>(session.window_end() - session.window_start()) /
        static_cast<double>(ns_per_sec);

    struct Stream {
        std::vector<std::int64_t> ts;
        std::vector<int> signs;
    };
    std::map<std::string, Stream> streams;

    for (const auto& ev : session.events) {
        const bool is_submission = ev.kind == tape::EventKind::submit_market ||
                                   ev.kind == tape::EventKind::submit_limit;
        const bool counted = opt.market_orders_only
                                 ? ev.kind == tape::EventKind::submit_market
                                 : is_submission;
        auto& prof = out.traders[ev.trader_id];
        if (prof.trader_id.empty()) prof.trader_id = ev.trader_id;
        if (counted) {
            auto& s = streams[ev.trader_id];
            s.ts.push_back(ev.ts_ns);
            s.signs.push_back(ev.side);
            ++prof.n_orders;
        }
        if (ev.kind == tape::EventKind::submit_market) {
            prof.mo_volume += ev.size;
            out.V_D += ev.size;
        } else if (ev.kind == tape::EventKind::execute) {
            prof.filled_limit_volume += ev.size;
        }
        if (opt.track_inventory) {
            std::int64_t delta = 0;
            if (ev.kind == tape::EventKind::submit_market)
                delta = static_cast<std::int64_t>(ev.side) * ev.size;  // aggressor
            else if (ev.kind == tape::EventKind::execute)
                delta = -static_cast<std::int64_t>(ev.side) * ev.size;  // resting side
            if (delta != 0) {
                const std::int64_t prev =
                    prof.inventory.empty() ? 0 : prof.inventory.back().inventory;
                prof.inventory.push_back({ev.ts_ns, prev + delta});
            }
        }
    }

    for (auto& [id, prof] : out.traders) {
        const auto sit = streams.find(id);
        if (sit != streams.end()) prof.tau_s = reversal_time(sit->second.ts, sit->second.signs);
        prof.cls = (prof.tau_s && *prof.tau_s < session_len_s) ? TraderClass::fast
                                                               : TraderClass::slow;
        const bool executed = prof.mo_volume > 0 || prof.filled_limit_volume > 0;
        if (executed) {
            ++out.N_D;
            if (prof.cls == TraderClass::fast) ++out.N_fast;
        }
        if (prof.cls == TraderClass::fast) out.V_fast += prof.mo_volume;
    }
    for (const auto& ev : session.events)
        if (ev.kind == tape::EventKind::execute &&
            out.traders.at(ev.trader_id).cls == TraderClass::fast)
            out.executed_against_fast += ev.size;
    return out;
}

// I_t for one trader: +size on own market orders, -side*size on fills of
// own resting orders (the aggressor side is recorded on the fill).
inline std::vector<InventoryPoint> inventory_series(const tape::Session& session,
                                                    const std::string& trader_id) {
    std::vector<InventoryPoint> out;
    std::int64_t inv = 0;
    for (const auto& ev : session.events) {
        if (ev.trader_id != trader_id) continue;
        if (ev.kind == tape::EventKind::submit_market)
            inv += static_cast<std::int64_t>(ev.side) * ev.size;
        else if (ev.kind == tape::EventKind::execute)
            inv -= static_cast<std::int64_t>(ev.side) * ev.size;
        else
            continue;
        out.push_back({ev.ts_ns, inv});
    }
    return out;
}

}  // namespace mim::eco
