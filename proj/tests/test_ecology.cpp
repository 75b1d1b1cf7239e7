#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mim/ecology.hpp"

using namespace mim;
using tape::EventKind;

namespace {

const std::int64_t kDay = days_from_civil(2017, 1, 9);
const std::int64_t kAm = kDay * ns_per_day + tape::am_start;

tape::OrderEvent ev(std::int64_t ts, const char* tid, EventKind k, int side, std::int32_t size) {
    tape::OrderEvent e;
    e.ts_ns = ts;
    e.order_id = "O";
    e.trader_id = tid;
    e.kind = k;
    e.side = static_cast<std::int8_t>(side);
    e.price_ticks = 100;
    e.size = size;
    e.best_bid = 99;
    e.best_ask = 101;
    e.bid_size = 10;
    e.ask_size = 10;
    return e;
}

}  // namespace

TEST_CASE("reversal time averages gaps at sign flips") {
    // signs +,+,-,+ at t = 0, 60, 120, 300 s: flips at 120 (gap 60) and 300
    // (gap 180), mean 120 s
    const std::vector<std::int64_t> ts = {0, 60 * ns_per_sec, 120 * ns_per_sec, 300 * ns_per_sec};
    const auto tau = eco::reversal_time(ts, {1, 1, -1, 1});
    REQUIRE(tau);
    CHECK(*tau == doctest::Approx(120.0));

    CHECK(!eco::reversal_time(ts, {1, 1, 1, 1}));  // never flips
    CHECK(!eco::reversal_time({}, {}));
}

TEST_CASE("session classification splits fast and slow flow") {
    tape::Session s;
    s.id = {kDay, tape::Half::AM};
    const std::int64_t t0 = s.window_start();
    // F alternates sign every second (fast); S only ever buys (slow).
    for (int i = 0; i < 20; ++i) {
        const int side = i % 2 == 0 ? 1 : -1;
        s.events.push_back(ev(t0 + i * ns_per_sec, "F", EventKind::submit_market, side, 10));
        s.events.push_back(ev(t0 + i * ns_per_sec, "MM", EventKind::execute, side, 10));
    }
    for (int i = 0; i < 5; ++i) {
        s.events.push_back(
            ev(t0 + (100 + i) * ns_per_sec, "S", EventKind::submit_market, 1, 40));
        s.events.push_back(ev(t0 + (100 + i) * ns_per_sec, "MM", EventKind::execute, 1, 40));
    }
    std::sort(s.events.begin(), s.events.end(),
              [](const auto& a, const auto& b) { return a.ts_ns < b.ts_ns; });

    const auto ec = eco::classify_session(s);
    CHECK(ec.V_D == 20 * 10 + 5 * 40);
    REQUIRE(ec.traders.count("F") == 1);
    REQUIRE(ec.traders.count("S") == 1);
    const auto& f = ec.traders.at("F");
    REQUIRE(f.tau_s);
    CHECK(*f.tau_s == doctest::Approx(1.0));
    CHECK(f.cls == eco::TraderClass::fast);
    CHECK(ec.traders.at("S").cls == eco::TraderClass::slow);
    // MM only posts/fills limits here; it never reverses a submission sign
    // stream of its own, so it stays slow and F is the only fast trader.
    CHECK(ec.V_fast == 200);
    CHECK(ec.v_fast_share() == doctest::Approx(200.0 / 400.0));
    // executing traders: F, S, MM
    CHECK(ec.N_D == 3);
    CHECK(ec.N_fast == 1);
    CHECK(ec.n_fast_share() == doctest::Approx(1.0 / 3.0));
    // fast-by-MO volume plus slow-by-MO volume exhausts V_D
    std::int64_t v_slow = 0;
    for (const auto& [id, p] : ec.traders)
        if (p.cls == eco::TraderClass::slow) v_slow += p.mo_volume;
    CHECK(ec.V_fast + v_slow == ec.V_D);
}

TEST_CASE("volume executed against fast traders") {
    tape::Session s;
    s.id = {kDay, tape::Half::AM};
    const std::int64_t t0 = s.window_start();
    // FM is a fast market maker: alternating-side limit submissions, fills.
    for (int i = 0; i < 10; ++i) {
        const int side = i % 2 == 0 ? 1 : -1;
        s.events.push_back(ev(t0 + i * ns_per_sec, "FM", EventKind::submit_limit, side, 10));
        s.events.push_back(ev(t0 + i * ns_per_sec, "T", EventKind::submit_market, side, 10));
        s.events.push_back(ev(t0 + i * ns_per_sec, "FM", EventKind::execute, side, 10));
    }
    const auto ec = eco::classify_session(s);
    CHECK(ec.traders.at("FM").cls == eco::TraderClass::fast);
    CHECK(ec.executed_against_fast == 100);
    CHECK(ec.against_fast_share() == doctest::Approx(1.0));
}

TEST_CASE("inventory series from market orders and fills") {
    tape::Session s;
    s.id = {kDay, tape::Half::AM};
    const std::int64_t t0 = s.window_start();
    // A buys 100 aggressively, then A's resting ask is lifted for 100
    // (the execute row carries the aggressor's side, +1).
    s.events.push_back(ev(t0, "A", EventKind::submit_market, 1, 100));
    s.events.push_back(ev(t0, "MM", EventKind::execute, 1, 100));
    s.events.push_back(ev(t0 + 60 * ns_per_sec, "A", EventKind::submit_limit, 1, 100));
    s.events.push_back(ev(t0 + 90 * ns_per_sec, "B", EventKind::submit_market, 1, 100));
    s.events.push_back(ev(t0 + 90 * ns_per_sec, "A", EventKind::execute, 1, 100));

    const auto inv = eco::inventory_series(s, "A");
    REQUIRE(inv.size() == 2);
    CHECK(inv[0].inventory == 100);
    CHECK(inv[1].inventory == 0);

    // the same series through the classifier's inventory tracking
    eco::EcologyOptions opt;
    opt.track_inventory = true;
    const auto ec = eco::classify_session(s, opt);
    const auto& pa = ec.traders.at("A");
    REQUIRE(pa.inventory.size() == 2);
    CHECK(pa.max_abs_inventory() == doctest::Approx(100.0));
    CHECK(pa.inventory.back().inventory == 0);
}
