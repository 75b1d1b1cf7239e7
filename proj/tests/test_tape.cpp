#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "mim/tape.hpp"

using namespace mim;
using tape::EventKind;

namespace {

const std::int64_t kDay = days_from_civil(2017, 1, 9);  // a Monday
const std::int64_t kAm = kDay * ns_per_day + tape::am_start;

tape::OrderEvent ev(std::int64_t ts, const char* oid, const char* tid, EventKind k, int side,
                    std::int32_t price, std::int32_t size, std::int32_t bid = 99,
                    std::int32_t ask = 101, std::int32_t bs = 10, std::int32_t as = 10) {
    tape::OrderEvent e;
    e.ts_ns = ts;
    e.order_id = oid;
    e.trader_id = tid;
    e.kind = k;
    e.side = static_cast<std::int8_t>(side);
    e.price_ticks = price;
    e.size = size;
    e.best_bid = bid;
    e.best_ask = ask;
    e.bid_size = bs;
    e.ask_size = as;
    return e;
}

}  // namespace

TEST_CASE("csv round trip is canonical") {
    std::vector<tape::OrderEvent> evs{
        ev(kAm, "O1", "T1", EventKind::submit_limit, 1, 99, 10),
        ev(kAm + 5, "O2", "T2", EventKind::submit_market, -1, 99, 7),
        ev(kAm + 5, "O3", "T3", EventKind::execute, -1, 99, 7),
        ev(kAm + 9, "O1", "T1", EventKind::cancel, 1, 99, 0),
    };
    std::ostringstream out;
    tape::serialize_tape(out, evs);
    const std::string text = out.str();

    std::istringstream in(text);
    const auto parsed = tape::parse_tape(in);
    REQUIRE(parsed.size() == evs.size());
    for (std::size_t i = 0; i < evs.size(); ++i) {
        CHECK(parsed[i].ts_ns == evs[i].ts_ns);
        CHECK(parsed[i].order_id == evs[i].order_id);
        CHECK(parsed[i].trader_id == evs[i].trader_id);
        CHECK(parsed[i].kind == evs[i].kind);
        CHECK(parsed[i].side == evs[i].side);
        CHECK(parsed[i].price_ticks == evs[i].price_ticks);
        CHECK(parsed[i].size == evs[i].size);
    }
    std::ostringstream out2;
    tape::serialize_tape(out2, parsed);
    CHECK(out2.str() == text);  // byte-exact canonical form
}

TEST_CASE("missing quotes serialize as empty fields") {
    auto e = ev(kAm, "O1", "T1", EventKind::submit_market, 1, 100, 5, tape::no_quote,
                tape::no_quote, 0, 0);
    std::string buf;
    tape::serialize_event(buf, e);
    CHECK(buf.find(",,") != std::string::npos);
    std::istringstream in(buf);
    const auto parsed = tape::parse_tape(in);
    REQUIRE(parsed.size() == 1);
    CHECK(!parsed[0].has_quotes());
}

TEST_CASE("malformed rows are rejected with the right errors") {
    auto parse_one = [](const std::string& line) {
        std::istringstream in(line);
        return tape::parse_tape(in);
    };
    CHECK_THROWS_AS(parse_one("1,O1,T1,M,1,100"), MalformedRow);
    CHECK_THROWS_AS(parse_one("1,O1,T1,Z,1,100,5,99,101,1,1"), UnknownEventKind);
    CHECK_THROWS_AS(parse_one("1,O1,T1,M,2,100,5,99,101,1,1"), MalformedRow);   // bad side
    CHECK_THROWS_AS(parse_one("1,O1,T1,M,1,100,0,99,101,1,1"), MalformedRow);   // zero size
    CHECK_THROWS_AS(parse_one("1,O1,T1,M,1,100,5,101,99,1,1"), MalformedRow);   // crossed book
    CHECK_THROWS_AS(parse_one("9,O1,T1,M,1,100,5,99,101,1,1\n3,O2,T1,M,1,100,5,99,101,1,1"),
                    NonMonotoneTimestamp);
    // equal timestamps are allowed (fill clusters)
    CHECK_NOTHROW(parse_one("9,O1,T1,M,1,100,5,99,101,1,1\n9,O2,T1,X,1,100,5,99,101,1,1"));
}

TEST_CASE("binary tape round trip") {
    std::vector<tape::OrderEvent> evs{
        ev(kAm, "O1", "TRADER_WITH_LONG_NAME", EventKind::submit_limit, 1, 99, 10),
        ev(kAm + 5, "O2", "T2", EventKind::execute, -1, 99, 7, tape::no_quote, tape::no_quote),
    };
    std::ostringstream out;
    tape::write_binary_tape(out, evs);
    std::istringstream in(out.str());
    const auto back = tape::read_binary_tape(in);
    REQUIRE(back.size() == 2);
    CHECK(back[0].trader_id == "TRADER_WITH_LONG_NAME");
    CHECK(back[1].best_bid == tape::no_quote);
    CHECK(back[0].ts_ns == evs[0].ts_ns);

    std::istringstream bad("NOTATAPE");
    CHECK_THROWS_AS(tape::read_binary_tape(bad), MalformedRow);
}

TEST_CASE("timestamp classification honors windows and trim zones") {
    auto tod = [&](std::int64_t ns) { return kDay * ns_per_day + ns; };
    CHECK(!tape::classify_ts(tod(tape::am_open)));                        // 09:00, trimmed
    CHECK(tape::classify_ts(tod(tape::am_start)));                        // 09:10, first tick in
    CHECK(tape::classify_ts(tod(tape::am_end - 1)));
    CHECK(!tape::classify_ts(tod(tape::am_end)));                         // 11:20, trimmed
    CHECK(!tape::classify_ts(tod(12 * 3600LL * ns_per_sec)));             // lunch
    const auto pm = tape::classify_ts(tod(tape::pm_start));
    REQUIRE(pm);
    CHECK(pm->half == tape::Half::PM);
    CHECK(pm->day == kDay);
    CHECK(pm->str() == "2017-01-09-PM");
}

TEST_CASE("session splitting drops trimmed events and keeps order") {
    std::vector<tape::OrderEvent> evs{
        ev(kDay * ns_per_day + tape::am_open, "O0", "T", EventKind::submit_limit, 1, 99, 1),
        ev(kAm + 1, "O1", "T", EventKind::submit_limit, 1, 99, 1),
        ev(kAm + 2, "O2", "T", EventKind::submit_market, 1, 101, 1),
        ev(kDay * ns_per_day + tape::pm_start, "O3", "T", EventKind::submit_limit, 1, 99, 1),
    };
    const auto sessions = tape::split_sessions(evs, "S");
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].id.half == tape::Half::AM);
    CHECK(sessions[0].events.size() == 2);  // the 09:00 row is trimmed away
    CHECK(sessions[0].events[0].order_id == "O1");
    CHECK(sessions[1].id.half == tape::Half::PM);
    CHECK(sessions[0].stock_id == "S");
    CHECK(sessions[0].window_end() - sessions[0].window_start() == tape::session_len_ns);
}

TEST_CASE("session stats: sigma_D from mid range, V_D from fills") {
    tape::Session s;
    s.id = {kDay, tape::Half::AM};
    s.events = {
        ev(kAm, "O1", "T", EventKind::submit_limit, 1, 99, 1, 99, 101),     // mid 100
        ev(kAm + 1, "O2", "T", EventKind::execute, 1, 101, 40, 104, 106),   // mid 105
        ev(kAm + 2, "O3", "T", EventKind::execute, -1, 99, 60, 94, 96),     // mid 95
    };
    const auto st = tape::session_stats(s);
    CHECK(st.V_D == 100);
    CHECK(st.sigma_D == doctest::Approx((105.0 - 95.0) / 100.0));

    tape::Session blind;
    blind.id = {kDay, tape::Half::AM};
    blind.events = {ev(kAm, "O1", "T", EventKind::submit_market, 1, 100, 5, tape::no_quote,
                       tape::no_quote)};
    CHECK_THROWS_AS(tape::session_stats(blind), NoQuotes);
}

TEST_CASE("volume clock semantics") {
    tape::Session s;
    s.id = {kDay, tape::Half::AM};
    s.events = {
        ev(kAm + 10, "O1", "T", EventKind::execute, 1, 100, 5),
        ev(kAm + 20, "O2", "T", EventKind::execute, 1, 100, 7),
        ev(kAm + 30, "O3", "T", EventKind::execute, 1, 100, 3),
    };
    tape::VolumeClock vc(s);
    CHECK(vc.total() == 15);
    CHECK(vc.at(kAm + 9) == 0);
    CHECK(vc.at(kAm + 10) == 5);   // right-continuous
    CHECK(vc.at(kAm + 25) == 12);
    CHECK_THROWS_AS(vc.at(kAm - 1), OutOfSession);
    // volume strictly after t=10: needs 7 shares -> the t=20 fill
    auto t = vc.time_of_volume(kAm + 10, 7);
    REQUIRE(t);
    CHECK(*t == kAm + 20);
    CHECK(!vc.time_of_volume(kAm + 10, 11));  // only 10 left
}

TEST_CASE("seasonality bins: 15-minute grid with ragged last bin") {
    CHECK(tape::seasonality_bin(kAm) == 0);
    CHECK(tape::seasonality_bin(kAm + 14 * ns_per_min) == 0);
    CHECK(tape::seasonality_bin(kAm + 15 * ns_per_min) == 1);
    // 130-minute window: minutes 120..129 fold into bin 8
    CHECK(tape::seasonality_bin(kAm + 125 * ns_per_min) == 8);
    const std::int64_t pm = kDay * ns_per_day + tape::pm_start;
    CHECK(tape::seasonality_bin(pm) == tape::bins_per_half);
    CHECK_THROWS_AS(tape::seasonality_bin(kDay * ns_per_day + tape::am_open), OutOfSession);
}

TEST_CASE("stock meta sidecar round trip") {
    tape::StockMeta m{"ACME", 0.005, "2017-01-09"};
    std::ostringstream out;
    tape::write_meta(out, m);
    std::istringstream in(out.str());
    const auto back = tape::parse_meta(in);
    CHECK(back.stock_id == "ACME");
    CHECK(back.tick_size == doctest::Approx(0.005));
    CHECK(back.session_date == "2017-01-09");
}
