#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mim/common.hpp"
#include "mim/impact.hpp"
#include "mim/metaorder.hpp"
#include "mim/refill.hpp"
#include "mim/sim.hpp"
#include "mim/stats.hpp"

namespace mim::io {

using nlohmann::json;

inline constexpr const char* tool_version = "0.1.0";

// ---------------------------------------------------------------------------
// FNV-1a 64-bit digests for input provenance.

inline std::uint64_t fnv1a_64(const void* data, std::size_t n,
                              std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char buf[1 << 16];
    std::uint64_t h = 0xcbf29ce484222325ULL;
    while (in) {
        in.read(buf, sizeof buf);
        h = fnv1a_64(buf, static_cast<std::size_t>(in.gcount()), h);
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// ---------------------------------------------------------------------------
// Atomic writes: temp file in the target directory, then rename.

inline void atomic_write_text(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

// ---------------------------------------------------------------------------
// Run manifest.

struct RunManifest {
    std::string command;
    std::vector<std::string> args;
    std::uint64_t seed = 0;
    json config;  // resolved configuration
    std::vector<std::pair<std::string, std::uint64_t>> inputs;  // path, digest
    std::vector<std::string> outputs;

    json to_json() const {
        json j;
        j["tool_version"] = tool_version;
        j["command"] = command;
        j["args"] = args;
        j["seed"] = seed;
        j["config"] = config;
        j["inputs"] = json::array();
        for (const auto& [p, d] : inputs)
            j["inputs"].push_back({{"path", p}, {"fnv1a64", hex64(d)}});
        j["outputs"] = outputs;
        return j;
    }
    void write(const std::string& path) const { atomic_write_text(path, to_json().dump(2) + "\n"); }
};

// ---------------------------------------------------------------------------
// Curve / table exports.

inline void write_curve_csv(const std::string& path, const stats::BinnedCurve& c) {
    std::ostringstream out;
    out << "bin_lo,bin_hi,x,mean,se,count\n";
    char buf[256];
    for (std::size_t i = 0; i < c.bins.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g,%.9g,%lld\n", c.edges[i],
                      c.edges[i + 1], c.x_of(i), c.bins[i].mean(), c.bins[i].se(),
                      static_cast<long long>(c.bins[i].n));
        out << buf;
    }
    atomic_write_text(path, out.str());
}

inline void write_metaorders_csv(const std::string& path,
                                 const std::vector<meta::Metaorder>& ms) {
    std::ostringstream out;
    out << "session_id,trader_id,sign,N,Q,T_s,f,start_ts,end_ts\n";
    char buf[256];
    for (const auto& m : ms) {
        std::snprintf(buf, sizeof buf, "%s,%s,%d,%lld,%lld,%.9g,%.9g,%lld,%lld\n",
                      m.session.str().c_str(), m.trader_id.c_str(), m.sign,
                      static_cast<long long>(m.N()), static_cast<long long>(m.Q), m.T_s, m.f,
                      static_cast<long long>(m.start_ts()), static_cast<long long>(m.end_ts()));
        out << buf;
    }
    atomic_write_text(path, out.str());
}

// Provider ids are salted-hashed on export; raw ids never leave the
// process in refill reports.
inline void write_refill_csv(const std::string& path, const std::vector<refill::RefillFit>& fits,
                             std::uint64_t salt) {
    std::ostringstream out;
    out << "provider_hash,C,kappa,n_sequences,liquidity_share,wary\n";
    char buf[256];
    for (const auto& f : fits) {
        const std::uint64_t h =
            fnv1a_64(f.provider_id.data(), f.provider_id.size(), 0xcbf29ce484222325ULL ^ salt);
        std::snprintf(buf, sizeof buf, "%s,%.9g,%.9g,%lld,%.9g,%d\n", hex64(h).c_str(), f.C,
                      f.kappa, static_cast<long long>(f.n_sequences), f.liquidity_share,
                      f.wary() ? 1 : 0);
        out << buf;
    }
    atomic_write_text(path, out.str());
}

inline json power_fit_json(const fit::PowerFit& f) {
    return {{"prefactor", f.prefactor},
            {"exponent", f.exponent},
            {"prefactor_se", f.prefactor_se()},
            {"exponent_se", f.exponent_se()},
            {"n_points", f.n_points}};
}

// ---------------------------------------------------------------------------
// Ground-truth ledger serialization.

inline json ledger_to_json(const sim::GroundTruthLedger& lg) {
    json j;
    j["seed"] = lg.seed;
    j["G0"] = lg.G0;
    j["i0"] = lg.i0;
    j["beta"] = lg.beta;
    j["dt_ref_s"] = lg.dt_ref_s;
    j["expected_bin_volume_share"] = lg.expected_bin_volume_share;
    j["sessions"] = json::array();
    for (const auto& s : lg.sessions)
        j["sessions"].push_back({{"session_id", s.session_id},
                                 {"day", s.day},
                                 {"half", s.half},
                                 {"sigma_D", s.sigma_D},
                                 {"V_D", s.V_D}});
    j["metaorders"] = json::array();
    for (const auto& m : lg.metaorders) {
        json jm = {{"session_idx", m.session_idx}, {"trader_id", m.trader_id},
                   {"sign", m.sign},               {"Q", m.Q},
                   {"N", m.N},                     {"start_ts", m.start_ts},
                   {"end_ts", m.end_ts},           {"dt_s", m.dt_s},
                   {"is_meta", m.is_meta},         {"noiseless_pre", m.noiseless_pre},
                   {"noiseless_post", m.noiseless_post},
                   {"predicted_dp", m.predicted_dp}};
        if (!m.child_ts.empty()) {
            jm["child_ts"] = m.child_ts;
            jm["child_q"] = m.child_q;
        }
        j["metaorders"].push_back(std::move(jm));
    }
    j["agents"] = json::array();
    for (const auto& a : lg.agents)
        j["agents"].push_back({{"trader_id", a.trader_id}, {"role", a.role}, {"fast", a.fast}});
    j["providers"] = json::array();
    for (const auto& p : lg.provider_scripts)
        j["providers"].push_back(
            {{"id", p.id}, {"C", p.C}, {"kappa", p.kappa}, {"weight", p.weight}, {"fast", p.fast}});
    return j;
}

inline sim::GroundTruthLedger ledger_from_json(const json& j) {
    sim::GroundTruthLedger lg;
    lg.seed = j.at("seed").get<std::uint64_t>();
    lg.G0 = j.at("G0").get<double>();
    lg.i0 = j.at("i0").get<double>();
    lg.beta = j.at("beta").get<double>();
    lg.dt_ref_s = j.at("dt_ref_s").get<double>();
    lg.expected_bin_volume_share =
        j.at("expected_bin_volume_share").get<std::vector<double>>();
    for (const auto& js : j.at("sessions")) {
        sim::LedgerSession s;
        s.session_id = js.at("session_id").get<std::string>();
        s.day = js.at("day").get<std::int64_t>();
        s.half = js.at("half").get<int>();
        s.sigma_D = js.at("sigma_D").get<double>();
        s.V_D = js.at("V_D").get<std::int64_t>();
        lg.sessions.push_back(std::move(s));
    }
    for (const auto& jm : j.at("metaorders")) {
        sim::LedgerMetaorder m;
        m.session_idx = jm.at("session_idx").get<int>();
        m.trader_id = jm.at("trader_id").get<std::string>();
        m.sign = jm.at("sign").get<int>();
        m.Q = jm.at("Q").get<std::int64_t>();
        m.N = jm.at("N").get<std::int64_t>();
        m.start_ts = jm.at("start_ts").get<std::int64_t>();
        m.end_ts = jm.at("end_ts").get<std::int64_t>();
        m.dt_s = jm.at("dt_s").get<double>();
        m.is_meta = jm.at("is_meta").get<bool>();
        m.noiseless_pre = jm.at("noiseless_pre").get<double>();
        m.noiseless_post = jm.at("noiseless_post").get<double>();
        m.predicted_dp = jm.value("predicted_dp", 0.0);
        if (jm.contains("child_ts")) {
            m.child_ts = jm.at("child_ts").get<std::vector<std::int64_t>>();
            m.child_q = jm.at("child_q").get<std::vector<std::int64_t>>();
        }
        lg.metaorders.push_back(std::move(m));
    }
    for (const auto& ja : j.at("agents")) {
        sim::AgentInfo a;
        a.trader_id = ja.at("trader_id").get<std::string>();
        a.role = ja.at("role").get<std::string>();
        a.fast = ja.at("fast").get<bool>();
        lg.agents.push_back(std::move(a));
    }
    for (const auto& jp : j.at("providers")) {
        sim::ProviderSpec p;
        p.id = jp.at("id").get<std::string>();
        p.C = jp.at("C").get<double>();
        p.kappa = jp.at("kappa").get<double>();
        p.weight = jp.at("weight").get<double>();
        p.fast = jp.at("fast").get<bool>();
        lg.provider_scripts.push_back(std::move(p));
    }
    return lg;
}

// ---------------------------------------------------------------------------
// Minimal standalone SVG log-log scatter with an optional power-law line.

struct PlotSeries {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    std::string label;
};

inline void write_loglog_svg(const std::string& path, const std::vector<PlotSeries>& series,
                             const std::string& title, const fit::PowerFit* fit_line = nullptr) {
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    if (xhi <= xlo || yhi <= ylo) {
        atomic_write_text(path, "<svg xmlns='http://www.w3.org/2000/svg'/>\n");
        return;
    }
    const double W = 640, H = 480, ML = 60, MR = 20, MT = 40, MB = 50;
    const double lx0 = std::log10(xlo), lx1 = std::log10(xhi);
    const double ly0 = std::log10(ylo), ly1 = std::log10(yhi);
    auto px = [&](double x) {
        return ML + (std::log10(x) - lx0) / (lx1 - lx0) * (W - ML - MR);
    };
    auto py = [&](double y) {
        return H - MB - (std::log10(y) - ly0) / (ly1 - ly0) * (H - MT - MB);
    };
    std::ostringstream out;
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
        << "</text>\n"
        << "<rect x='" << ML << "' y='" << MT << "' width='" << W - ML - MR << "' height='"
        << H - MT - MB << "' fill='none' stroke='#888'/>\n";
    // decade gridlines
    for (int d = static_cast<int>(std::ceil(lx0)); d <= static_cast<int>(std::floor(lx1)); ++d) {
        const double x = px(std::pow(10.0, d));
        out << "<line x1='" << x << "' y1='" << MT << "' x2='" << x << "' y2='" << H - MB
            << "' stroke='#ddd'/>\n"
            << "<text x='" << x << "' y='" << H - MB + 18 << "' text-anchor='middle' font-size='11'>1e"
            << d << "</text>\n";
    }
    for (int d = static_cast<int>(std::ceil(ly0)); d <= static_cast<int>(std::floor(ly1)); ++d) {
        const double y = py(std::pow(10.0, d));
        out << "<line x1='" << ML << "' y1='" << y << "' x2='" << W - MR << "' y2='" << y
            << "' stroke='#ddd'/>\n"
            << "<text x='" << ML - 6 << "' y='" << y + 4 << "' text-anchor='end' font-size='11'>1e"
            << d << "</text>\n";
    }
    if (fit_line && fit_line->prefactor > 0.0) {
        const double ya = fit_line->prefactor * std::pow(xlo, fit_line->exponent);
        const double yb = fit_line->prefactor * std::pow(xhi, fit_line->exponent);
        if (ya > 0 && yb > 0)
            out << "<line x1='" << px(xlo) << "' y1='" << py(std::clamp(ya, ylo, yhi)) << "' x2='"
                << px(xhi) << "' y2='" << py(std::clamp(yb, ylo, yhi))
                << "' stroke='#d62728' stroke-dasharray='5,4'/>\n";
    }
    double legend_y = MT + 16;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
            out << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i]) << "' r='3' fill='"
                << s.color << "'/>\n";
        }
        if (!s.label.empty()) {
            out << "<circle cx='" << ML + 12 << "' cy='" << legend_y - 4 << "' r='3' fill='"
                << s.color << "'/>\n"
                << "<text x='" << ML + 22 << "' y='" << legend_y << "' font-size='12'>" << s.label
                << "</text>\n";
            legend_y += 16;
        }
    }
    out << "</svg>\n";
    atomic_write_text(path, out.str());
}

}  // namespace mim::io
