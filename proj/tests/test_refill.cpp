#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "mim/refill.hpp"

using namespace mim;
using tape::EventKind;

namespace {

const std::int64_t kDay = days_from_civil(2017, 1, 9);

tape::OrderEvent fill(std::int64_t ts, const char* provider, const char* oid, int side,
                      std::int32_t size, std::int32_t price) {
    tape::OrderEvent e;
    e.ts_ns = ts;
    e.order_id = oid;
    e.trader_id = provider;
    e.kind = EventKind::execute;
    e.side = static_cast<std::int8_t>(side);
    e.price_ticks = price;
    e.size = size;
    e.best_bid = price - 1;
    e.best_ask = price + 1;
    e.bid_size = 10;
    e.ask_size = 10;
    return e;
}

}  // namespace

TEST_CASE("refill sequences are per-provider sign runs") {
    tape::Session s;
    s.id = {kDay, tape::Half::AM};
    const std::int64_t t0 = s.window_start();
    // P: ask lifted twice, then bid hit -> runs of length 2 and 1.
    // Q's interleaved fill does not break P's run.
    s.events = {
        fill(t0 + 1 * ns_per_sec, "P", "a1", 1, 10, 100),
        fill(t0 + 2 * ns_per_sec, "Q", "b1", 1, 5, 100),
        fill(t0 + 3 * ns_per_sec, "P", "a2", 1, 20, 101),
        fill(t0 + 4 * ns_per_sec, "P", "a3", -1, 7, 99),
    };
    const auto seqs = refill::extract_refill_sequences(s);
    REQUIRE(seqs.size() == 3);
    // sorted by first-fill time, then provider id
    CHECK(seqs[0].provider_id == "P");
    CHECK(seqs[0].sign == 1);
    CHECK(seqs[0].n() == 2);
    CHECK(seqs[0].volume() == 30);
    CHECK(seqs[1].provider_id == "Q");
    CHECK(seqs[1].n() == 1);
    CHECK(seqs[2].provider_id == "P");
    CHECK(seqs[2].sign == -1);
    CHECK(seqs[2].n() == 1);
    CHECK(seqs[2].volume() == 7);
}

TEST_CASE("partial fills of one limit order count once") {
    tape::Session s;
    s.id = {kDay, tape::Half::AM};
    const std::int64_t t0 = s.window_start();
    s.events = {
        fill(t0 + 1 * ns_per_sec, "P", "a1", 1, 10, 100),
        fill(t0 + 2 * ns_per_sec, "P", "a1", 1, 15, 100),  // same order, later fill
        fill(t0 + 3 * ns_per_sec, "P", "a2", 1, 20, 101),
    };
    const auto seqs = refill::extract_refill_sequences(s);
    REQUIRE(seqs.size() == 1);
    CHECK(seqs[0].n() == 2);  // a1 (merged) + a2
    CHECK(seqs[0].fills[0].q == 25);
    CHECK(seqs[0].fills[0].log_p == doctest::Approx(std::log(100.0)));
    CHECK(seqs[0].volume() == 45);
}

TEST_CASE("refill function inverts a noiseless K(i) = C i^-kappa") {
    const double C = 0.05, kappa = 0.5;
    std::vector<refill::RefillSequence> storage;
    refill::ProviderData pd;
    for (int k = 0; k < 40; ++k) {
        refill::RefillSequence seq;
        seq.provider_id = "P";
        seq.sign = k % 2 == 0 ? 1 : -1;
        double lp = std::log(500.0);
        for (int i = 0; i < 60; ++i) {
            if (i > 0) lp += seq.sign * C * std::pow(static_cast<double>(i), -kappa);
            seq.fills.push_back({static_cast<std::int64_t>(i) * ns_per_sec, 10, lp});
        }
        storage.push_back(std::move(seq));
    }
    for (const auto& seq : storage) {
        pd.sequences.push_back(&seq);
        pd.sigma_D.push_back(1.0);
    }
    const auto f = refill::refill_function("P", pd);
    CHECK(f.C == doctest::Approx(C).epsilon(1e-9));
    CHECK(f.kappa == doctest::Approx(kappa).epsilon(1e-9));
    CHECK(f.n_sequences == 40);
    CHECK(f.wary());

    refill::RefillFit tame;
    tame.C = 0.01;
    CHECK(!tame.wary());
}

TEST_CASE("too few sequences raises") {
    refill::RefillSequence seq;
    seq.provider_id = "P";
    seq.fills = {{0, 10, 0.0}, {ns_per_sec, 10, 0.01}};
    refill::ProviderData pd;
    pd.sequences.push_back(&seq);
    pd.sigma_D.push_back(1.0);
    CHECK_THROWS_AS(refill::refill_function("P", pd), InsufficientSequences);
}

TEST_CASE("length distribution needs a real sample") {
    std::vector<refill::RefillSequence> few(10);
    CHECK_THROWS_AS(refill::length_distribution(few), TooFewTailSamples);
}

TEST_CASE("share-vs-C curve averages adjacent providers") {
    std::vector<refill::RefillFit> fits(4);
    fits[0].C = 0.01;
    fits[0].liquidity_share = 0.4;
    fits[1].C = 0.05;
    fits[1].liquidity_share = 0.1;
    fits[2].C = 0.02;
    fits[2].liquidity_share = 0.3;
    fits[3].C = 0.03;
    fits[3].liquidity_share = 0.2;
    const auto pts = refill::liquidity_share_vs_C(fits);
    REQUIRE(pts.size() == 2);
    // sorted by C then paired: (0.01,0.02) and (0.03,0.05)
    CHECK(pts[0].C == doctest::Approx(0.015));
    CHECK(pts[0].share == doctest::Approx(0.35));
    CHECK(pts[1].C == doctest::Approx(0.04));
    CHECK(pts[1].share == doctest::Approx(0.15));
    // higher-C providers carry less volume here
    CHECK(pts[1].share < pts[0].share);

    CHECK(refill::liquidity_share_vs_C({fits[0]}).empty());
}
