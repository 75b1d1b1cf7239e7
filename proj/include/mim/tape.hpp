#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mim/common.hpp"

namespace mim::tape {

enum class EventKind : std::uint8_t {
    submit_limit,   // L
    submit_market,  // M
    cancel,         // C
    execute,        // X  (fill of a resting limit order; trader_id = owner of
                    //     the resting order, side = sign of the aggressor)
};

inline char kind_char(EventKind k) {
    switch (k) {
        case EventKind::submit_limit: return 'L';
        case EventKind::submit_market: return 'M';
        case EventKind::cancel: return 'C';
        case EventKind::execute: return 'X';
    }
    return '?';
}

inline constexpr std::int32_t no_quote = std::numeric_limits<std::int32_t>::min();

struct OrderEvent {
    std::int64_t ts_ns = 0;  // nanoseconds since Unix epoch
    std::string order_id;
    std::string trader_id;
    EventKind kind = EventKind::submit_limit;
    std::int8_t side = 1;  // +1 buy, -1 sell
    std::int32_t price_ticks = 0;
    std::int32_t size = 0;
    // Best-quote snapshot just AFTER this event is processed.
    std::int32_t best_bid = no_quote;
    std::int32_t best_ask = no_quote;
    std::int32_t bid_size = 0;
    std::int32_t ask_size = 0;

    bool has_quotes() const { return best_bid != no_quote && best_ask != no_quote; }
    double mid_ticks() const { return 0.5 * (static_cast<double>(best_bid) + best_ask); }
};

inline const char* tape_header =
    "ts_ns,order_id,trader_id,event,side,price_ticks,size,best_bid,best_ask,bid_size,ask_size";

// ---------------------------------------------------------------------------
// Stock metadata sidecar: `key=value` lines.
struct StockMeta {
    std::string stock_id;
    double tick_size = 1.0;      // currency per tick
    std::string session_date;    // informational, e.g. first session date
};

inline StockMeta parse_meta(std::istream& in) {
    StockMeta m;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "stock_id") m.stock_id = val;
        else if (key == "tick_size") m.tick_size = std::strtod(val.c_str(), nullptr);
        else if (key == "session_date") m.session_date = val;
    }
    return m;
}

inline void write_meta(std::ostream& out, const StockMeta& m) {
    out << "stock_id=" << m.stock_id << "\n"
        << "tick_size=" << m.tick_size << "\n"
        << "session_date=" << m.session_date << "\n";
}

// ---------------------------------------------------------------------------
// Streaming CSV parser. Bounded memory: one row at a time goes to the sink.

namespace detail {

inline bool parse_i64(std::string_view f, std::int64_t& out) {
    const auto r = std::from_chars(f.data(), f.data() + f.size(), out);
    return r.ec == std::errc() && r.ptr == f.data() + f.size();
}

inline bool parse_i32(std::string_view f, std::int32_t& out) {
    const auto r = std::from_chars(f.data(), f.data() + f.size(), out);
    return r.ec == std::errc() && r.ptr == f.data() + f.size();
}

// Splits `line` into exactly n comma-separated fields.
inline bool split_fields(std::string_view line, std::string_view* out, std::size_t n) {
    std::size_t field = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            if (field >= n) return false;
            out[field++] = line.substr(start, i - start);
            start = i + 1;
        }
    }
    return field == n;
}

inline OrderEvent parse_row(std::string_view line, std::size_t lineno) {
    std::string_view f[11];
    if (!split_fields(line, f, 11)) throw MalformedRow(lineno, "expected 11 fields");
    OrderEvent ev;
    if (!parse_i64(f[0], ev.ts_ns)) throw MalformedRow(lineno, "bad ts_ns");
    ev.order_id.assign(f[1]);
    ev.trader_id.assign(f[2]);
    if (f[3].size() != 1) throw MalformedRow(lineno, "bad event field");
    switch (f[3][0]) {
        case 'L': ev.kind = EventKind::submit_limit; break;
        case 'M': ev.kind = EventKind::submit_market; break;
        case 'C': ev.kind = EventKind::cancel; break;
        case 'X': ev.kind = EventKind::execute; break;
        default: throw UnknownEventKind(lineno, f[3][0]);
    }
    std::int32_t side;
    if (!parse_i32(f[4], side) || (side != 1 && side != -1))
        throw MalformedRow(lineno, "side must be 1 or -1");
    ev.side = static_cast<std::int8_t>(side);
    if (!parse_i32(f[5], ev.price_ticks)) throw MalformedRow(lineno, "bad price_ticks");
    if (!parse_i32(f[6], ev.size)) throw MalformedRow(lineno, "bad size");
    if (ev.size <= 0 && ev.kind != EventKind::cancel)
        throw MalformedRow(lineno, "size must be > 0 for submit/execute");
    if (ev.size < 0) throw MalformedRow(lineno, "negative size");
    auto quote = [&](std::string_view s, std::int32_t& out, const char* what) {
        if (s.empty()) { out = no_quote; return; }
        if (!parse_i32(s, out)) throw MalformedRow(lineno, what);
    };
    quote(f[7], ev.best_bid, "bad best_bid");
    quote(f[8], ev.best_ask, "bad best_ask");
    std::int32_t bs = 0, as = 0;
    if (!f[9].empty() && !parse_i32(f[9], bs)) throw MalformedRow(lineno, "bad bid_size");
    if (!f[10].empty() && !parse_i32(f[10], as)) throw MalformedRow(lineno, "bad ask_size");
    ev.bid_size = bs;
    ev.ask_size = as;
    if (ev.best_bid != no_quote && ev.best_ask != no_quote && ev.best_bid >= ev.best_ask)
        throw MalformedRow(lineno, "best_bid must be < best_ask");
    return ev;
}

}  // namespace detail

// Parses a tape stream, calling sink(event) per row in file order.
// Throws on the first malformed row / timestamp regression.
template <typename Sink>
void parse_tape_stream(std::istream& in, Sink&& sink) {
    std::string line;
    std::size_t lineno = 0;
    std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (line == tape_header) continue;  // header row optional but canonical
        }
        OrderEvent ev = detail::parse_row(line, lineno);
        if (ev.ts_ns < prev_ts) throw NonMonotoneTimestamp(lineno);
        prev_ts = ev.ts_ns;
        sink(std::move(ev));
    }
}

inline std::vector<OrderEvent> parse_tape(std::istream& in) {
    std::vector<OrderEvent> out;
    parse_tape_stream(in, [&](OrderEvent&& ev) { out.push_back(std::move(ev)); });
    return out;
}

// Canonical serialization: parsing then re-serializing reproduces the
// canonical byte stream exactly.
inline void serialize_event(std::string& buf, const OrderEvent& ev) {
    char tmp[24];
    auto put_int = [&](auto v) {
        const auto r = std::to_chars(tmp, tmp + sizeof tmp, v);
        buf.append(tmp, r.ptr);
    };
    put_int(ev.ts_ns);
    buf += ',';
    buf += ev.order_id;
    buf += ',';
    buf += ev.trader_id;
    buf += ',';
    buf += kind_char(ev.kind);
    buf += ',';
    put_int(static_cast<int>(ev.side));
    buf += ',';
    put_int(ev.price_ticks);
    buf += ',';
    put_int(ev.size);
    buf += ',';
    if (ev.best_bid != no_quote) put_int(ev.best_bid);
    buf += ',';
    if (ev.best_ask != no_quote) put_int(ev.best_ask);
    buf += ',';
    put_int(ev.bid_size);
    buf += ',';
    put_int(ev.ask_size);
    buf += '\n';
}

template <typename Range>
void serialize_tape(std::ostream& out, const Range& events) {
    out << tape_header << '\n';
    std::string buf;
    for (const auto& ev : events) {
        buf.clear();
        serialize_event(buf, ev);
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

// ---------------------------------------------------------------------------
// Binary tape variant: fixed-layout numeric block + length-prefixed ids.

inline constexpr char binary_magic[8] = {'M', 'I', 'M', 'T', 'A', 'P', 'E', '\x01'};

inline void write_binary_tape(std::ostream& out, const std::vector<OrderEvent>& events) {
    out.write(binary_magic, 8);
    const std::uint64_t n = events.size();
    out.write(reinterpret_cast<const char*>(&n), 8);
    for (const auto& ev : events) {
        char rec[34];
        std::memcpy(rec, &ev.ts_ns, 8);
        rec[8] = static_cast<char>(ev.kind);
        rec[9] = static_cast<char>(ev.side);
        std::memcpy(rec + 10, &ev.price_ticks, 4);
        std::memcpy(rec + 14, &ev.size, 4);
        std::memcpy(rec + 18, &ev.best_bid, 4);
        std::memcpy(rec + 22, &ev.best_ask, 4);
        std::memcpy(rec + 26, &ev.bid_size, 4);
        std::memcpy(rec + 30, &ev.ask_size, 4);
        out.write(rec, 34);
        auto put_str = [&](const std::string& s) {
            const std::uint8_t len = static_cast<std::uint8_t>(std::min<std::size_t>(s.size(), 255));
            out.write(reinterpret_cast<const char*>(&len), 1);
            out.write(s.data(), len);
        };
        put_str(ev.order_id);
        put_str(ev.trader_id);
    }
}

inline std::vector<OrderEvent> read_binary_tape(std::istream& in) {
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, binary_magic, 8) != 0)
        throw MalformedRow(0, "bad binary tape magic");
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), 8);
    std::vector<OrderEvent> events;
    events.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        char rec[34];
        in.read(rec, 34);
        if (!in) throw MalformedRow(i, "truncated binary tape");
        OrderEvent ev;
        std::memcpy(&ev.ts_ns, rec, 8);
        ev.kind = static_cast<EventKind>(rec[8]);
        ev.side = static_cast<std::int8_t>(rec[9]);
        std::memcpy(&ev.price_ticks, rec + 10, 4);
        std::memcpy(&ev.size, rec + 14, 4);
        std::memcpy(&ev.best_bid, rec + 18, 4);
        std::memcpy(&ev.best_ask, rec + 22, 4);
        std::memcpy(&ev.bid_size, rec + 26, 4);
        std::memcpy(&ev.ask_size, rec + 30, 4);
        auto get_str = [&](std::string& s) {
            std::uint8_t len = 0;
            in.read(reinterpret_cast<char*>(&len), 1);
            s.resize(len);
            in.read(s.data(), len);
        };
        get_str(ev.order_id);
        get_str(ev.trader_id);
        if (!in) throw MalformedRow(i, "truncated binary tape");
        events.push_back(std::move(ev));
    }
    return events;
}

// ---------------------------------------------------------------------------
// Sessions. Trading day has two halves; the trimmed windows are
// half-open [start+10min, end-10min).

enum class Half : std::uint8_t { AM, PM };

inline constexpr std::int64_t am_open = 9 * 3600LL * ns_per_sec;
inline constexpr std::int64_t am_close = (11 * 3600LL + 30 * 60) * ns_per_sec;
inline constexpr std::int64_t pm_open = (12 * 3600LL + 30 * 60) * ns_per_sec;
inline constexpr std::int64_t pm_close = 15 * 3600LL * ns_per_sec;
inline constexpr std::int64_t trim_ns = 10 * ns_per_min;

inline constexpr std::int64_t am_start = am_open + trim_ns;    // 09:10
inline constexpr std::int64_t am_end = am_close - trim_ns;     // 11:20
inline constexpr std::int64_t pm_start = pm_open + trim_ns;    // 12:40
inline constexpr std::int64_t pm_end = pm_close - trim_ns;     // 14:50
inline constexpr std::int64_t session_len_ns = am_end - am_start;  // 130 min, both halves

struct SessionId {
    std::int64_t day;  // days since epoch
    Half half;
    auto operator<=>(const SessionId&) const = default;
    std::string str() const {
        const CivilDate d = civil_from_days(day);
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.year, d.month, d.day);
        return std::string(buf) + (half == Half::AM ? "-AM" : "-PM");
    }
};

struct Session {
    std::string stock_id;
    SessionId id{};
    std::vector<OrderEvent> events;  // trimmed, original order preserved
    bool empty_flag = false;         // no events survived trimming

    std::int64_t window_start() const {
        return id.day * ns_per_day + (id.half == Half::AM ? am_start : pm_start);
    }
    std::int64_t window_end() const {
        return id.day * ns_per_day + (id.half == Half::AM ? am_end : pm_end);
    }

    // Total executed market-order volume: each execution fill counted once.
    std::int64_t executed_volume() const {
        std::int64_t v = 0;
        for (const auto& ev : events)
            if (ev.kind == EventKind::execute) v += ev.size;
        return v;
    }

    // Quote snapshot of the latest event at index < i; nullopt before the
    // first quoted event.
    std::optional<double> mid_before(std::size_t i) const {
        while (i > 0) {
            --i;
            if (events[i].has_quotes()) return events[i].mid_ticks();
        }
        return std::nullopt;
    }
};

// Classifies one wall-clock timestamp; nullopt if it falls in a trim zone
// or outside trading hours.
inline std::optional<SessionId> classify_ts(std::int64_t ts_ns) {
    const std::int64_t day = ts_ns >= 0 ? ts_ns / ns_per_day : (ts_ns - ns_per_day + 1) / ns_per_day;
    const std::int64_t tod = ts_ns - day * ns_per_day;
    if (tod >= am_start && tod < am_end) return SessionId{day, Half::AM};
    if (tod >= pm_start && tod < pm_end) return SessionId{day, Half::PM};
    return std::nullopt;
}

// Streaming session splitter: feed events in tape order, completed
// sessions are handed to the sink as soon as a later session starts.
class SessionSplitter {
  public:
    SessionSplitter(std::string stock_id, std::function<void(Session&&)> sink)
        : stock_id_(std::move(stock_id)), sink_(std::move(sink)) {}

    void push(OrderEvent&& ev) {
        const auto sid = classify_ts(ev.ts_ns);
        if (!sid) return;  // trimmed away
        if (!open_ || open_->id != *sid) {
            flush();
            open_.emplace();
            open_->stock_id = stock_id_;
            open_->id = *sid;
        }
        open_->events.push_back(std::move(ev));
    }

    void finish() { flush(); }

  private:
    void flush() {
        if (open_) {
            open_->empty_flag = open_->events.empty();
            sink_(std::move(*open_));
            open_.reset();
        }
    }
    std::string stock_id_;
    std::function<void(Session&&)> sink_;
    std::optional<Session> open_;
};

inline std::vector<Session> split_sessions(std::vector<OrderEvent> events,
                                           std::string stock_id = "") {
    std::vector<Session> out;
    SessionSplitter splitter(std::move(stock_id), [&](Session&& s) { out.push_back(std::move(s)); });
    for (auto& ev : events) splitter.push(std::move(ev));
    splitter.finish();
    return out;
}

// ---------------------------------------------------------------------------
// Per-session statistics.

struct SessionStats {
    std::int64_t V_D = 0;
    double sigma_D = 0.0;  // (mid_high - mid_low) / mid_open over the trimmed session
};

inline SessionStats session_stats(const Session& s) {
    SessionStats st;
    st.V_D = s.executed_volume();
    double open = 0.0, hi = -1.0, lo = -1.0;
    bool any = false;
    for (const auto& ev : s.events) {
        if (!ev.has_quotes()) continue;
        const double m = ev.mid_ticks();
        if (!any) {
            open = hi = lo = m;
            any = true;
        } else {
            hi = std::max(hi, m);
            lo = std::min(lo, m);
        }
    }
    if (!any) throw NoQuotes("session " + s.id.str() + " has no quote snapshots");
    st.sigma_D = (hi - lo) / open;
    return st;
}

// ---------------------------------------------------------------------------
// Volume clock: cumulative executed shares at wall-clock time t.

class VolumeClock {
  public:
    explicit VolumeClock(const Session& s)
        : start_(s.window_start()), end_(s.window_end()) {
        for (const auto& ev : s.events) {
            if (ev.kind != EventKind::execute) continue;
            ts_.push_back(ev.ts_ns);
            total_ += ev.size;
            cum_.push_back(total_);
        }
    }

    // Right-continuous: fills with timestamp == t are included.
    std::int64_t at(std::int64_t t) const {
        if (t < start_ || t >= end_) throw OutOfSession("t outside session window");
        const auto it = std::upper_bound(ts_.begin(), ts_.end(), t);
        return it == ts_.begin() ? 0 : cum_[static_cast<std::size_t>(it - ts_.begin()) - 1];
    }

    std::int64_t total() const { return total_; }

    // Timestamp of the first fill at which the volume executed strictly
    // after t_after reaches q; nullopt if the session ends first.
    std::optional<std::int64_t> time_of_volume(std::int64_t t_after, std::int64_t q) const {
        const auto it0 = std::upper_bound(ts_.begin(), ts_.end(), t_after);
        const std::size_t lo = static_cast<std::size_t>(it0 - ts_.begin());
        const std::int64_t base = lo == 0 ? 0 : cum_[lo - 1];
        const auto cit =
            std::lower_bound(cum_.begin() + static_cast<std::ptrdiff_t>(lo), cum_.end(), base + q);
        if (cit == cum_.end()) return std::nullopt;
        return ts_[static_cast<std::size_t>(cit - cum_.begin())];
    }

  private:
    std::int64_t start_, end_;
    std::vector<std::int64_t> ts_;
    std::vector<std::int64_t> cum_;
    std::int64_t total_ = 0;
};

// ---------------------------------------------------------------------------
// Intraday seasonality: 15-minute bins anchored at the trimmed window
// start; the 130-minute window leaves a ragged 10-minute final bin. AM
// and PM halves are binned separately, indices 0..8 and 9..17.

inline constexpr int bins_per_half = 9;
inline constexpr int seasonality_bins = 2 * bins_per_half;
inline constexpr std::int64_t bin_width_ns = 15 * ns_per_min;

inline int seasonality_bin(std::int64_t ts_ns) {
    const auto sid = classify_ts(ts_ns);
    if (!sid) throw OutOfSession("timestamp outside trimmed windows");
    const std::int64_t start =
        sid->day * ns_per_day + (sid->half == Half::AM ? am_start : pm_start);
    int b = static_cast<int>((ts_ns - start) / bin_width_ns);
    b = std::min(b, bins_per_half - 1);
    return (sid->half == Half::AM ? 0 : bins_per_half) + b;
}

struct SeasonalityProfile {
    int bin_minutes = 15;
    int first_year = 0, last_year = 0;
    // Per bin: mean over sessions of (bin high - bin low)/bin open, and
    // mean executed volume.
    std::array<double, seasonality_bins> sigma_b{};
    std::array<double, seasonality_bins> V_b{};
    std::array<std::int64_t, seasonality_bins> n_sessions{};
    bool partial_year_warning = false;
};

inline SeasonalityProfile seasonality_profile(const std::vector<Session>& sessions) {
    if (sessions.empty()) throw DataError("seasonality_profile: no sessions");
    SeasonalityProfile prof;
    prof.first_year = std::numeric_limits<int>::max();
    prof.last_year = std::numeric_limits<int>::min();
    for (const auto& s : sessions) {
        const int year = civil_from_days(s.id.day).year;
        prof.first_year = std::min(prof.first_year, year);
        prof.last_year = std::max(prof.last_year, year);
        const int base = s.id.half == Half::AM ? 0 : bins_per_half;
        std::array<double, bins_per_half> open{}, hi{}, lo{};
        std::array<bool, bins_per_half> any{};
        std::array<double, bins_per_half> vol{};
        for (const auto& ev : s.events) {
            const int b = seasonality_bin(ev.ts_ns) - base;
            if (ev.kind == EventKind::execute) vol[static_cast<std::size_t>(b)] += ev.size;
            if (!ev.has_quotes()) continue;
            const double m = ev.mid_ticks();
            auto bi = static_cast<std::size_t>(b);
            if (!any[bi]) {
                any[bi] = true;
                open[bi] = hi[bi] = lo[bi] = m;
            } else {
                hi[bi] = std::max(hi[bi], m);
                lo[bi] = std::min(lo[bi], m);
            }
        }
        for (int b = 0; b < bins_per_half; ++b) {
            const auto bi = static_cast<std::size_t>(b);
            const int g = base + b;
            prof.V_b[static_cast<std::size_t>(g)] += vol[bi];
            if (any[bi]) prof.sigma_b[static_cast<std::size_t>(g)] += (hi[bi] - lo[bi]) / open[bi];
            prof.n_sessions[static_cast<std::size_t>(g)] += 1;
        }
    }
    for (int g = 0; g < seasonality_bins; ++g) {
        const auto gi = static_cast<std::size_t>(g);
        if (prof.n_sessions[gi] > 0) {
            prof.sigma_b[gi] /= static_cast<double>(prof.n_sessions[gi]);
            prof.V_b[gi] /= static_cast<double>(prof.n_sessions[gi]);
        }
    }
    prof.partial_year_warning = prof.first_year != prof.last_year;
    return prof;
}

}  // namespace mim::tape
