// mim: market-microstructure analytics and mechanical tape simulator.
//
// Subcommands: simulate, ingest, metaorders, impact, child-profile,
// single-mo, shuffle, ecology, refill, report.
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 fit error.
// Every output directory receives a manifest.json sufficient to
// reproduce the run; all files are written atomically (temp + rename).

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mim/ecology.hpp"
#include "mim/impact.hpp"
#include "mim/io.hpp"
#include "mim/metaorder.hpp"
#include "mim/propagator.hpp"
#include "mim/refill.hpp"
#include "mim/shuffle.hpp"
#include "mim/sim.hpp"
#include "mim/tape.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mim;

namespace {

struct Common {
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string config_path;
    std::string out_dir = "out";
    json config;  // parsed --config content, {} when absent

    void add_to(CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Random seed (where applicable)");
        cmd->add_option("--jobs", jobs, "Upper bound on worker parallelism")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--config", config_path, "JSON configuration file");
        cmd->add_option("-o,--out", out_dir, "Output directory");
    }

    void load_config() {
        config = json::object();
        if (config_path.empty()) return;
        std::ifstream in(config_path);
        if (!in) throw DataError("cannot open config " + config_path);
        try {
            in >> config;
        } catch (const json::exception& e) {
            throw ConfigInvalid("bad config " + config_path + ": " + e.what());
        }
    }
};

struct Manifest {
    io::RunManifest m;
    std::string dir;

    Manifest(const std::string& command, const Common& c, int argc, char** argv) {
        dir = c.out_dir;
        fs::create_directories(dir);
        m.command = command;
        for (int i = 1; i < argc; ++i) m.args.emplace_back(argv[i]);
        m.seed = c.seed;
        m.config = c.config;
    }
    void input(const std::string& path) { m.inputs.emplace_back(path, io::digest_file(path)); }
    std::string out(const std::string& name) {
        m.outputs.push_back(name);
        return (fs::path(dir) / name).string();
    }
    void write() { m.write((fs::path(dir) / "manifest.json").string()); }
};

void write_json_file(const std::string& path, const json& j) {
    io::atomic_write_text(path, j.dump(2) + "\n");
}

std::vector<tape::OrderEvent> load_events(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    if (path.size() > 4 && path.substr(path.size() - 4) == ".bin")
        return tape::read_binary_tape(in);
    return tape::parse_tape(in);
}

std::vector<tape::Session> load_sessions(const std::string& path, const std::string& stock_id) {
    auto sessions = tape::split_sessions(load_events(path), stock_id);
    if (sessions.empty()) throw EmptySession("no sessions inside trading windows in " + path);
    return sessions;
}

json curve_json(const stats::BinnedCurve& c) {
    json j = json::array();
    for (std::size_t i = 0; i < c.bins.size(); ++i) {
        if (c.bins[i].n == 0) continue;
        j.push_back({{"x", c.x_of(i)},
                     {"mean", c.bins[i].mean()},
                     {"se", c.bins[i].se()},
                     {"count", c.bins[i].n}});
    }
    return j;
}

io::PlotSeries curve_series(const stats::BinnedCurve& c, const std::string& label,
                            const std::string& color = "#1f77b4") {
    io::PlotSeries s;
    s.label = label;
    s.color = color;
    for (std::size_t i = 0; i < c.bins.size(); ++i) {
        if (c.bins[i].n == 0) continue;
        s.x.push_back(c.x_of(i));
        s.y.push_back(c.bins[i].mean());
    }
    return s;
}

// ---------------------------------------------------------------------------
// simulate

void apply_sim_config(sim::SimConfig& cfg, const json& j) {
    for (const auto& [key, val] : j.items()) {
        if (key == "seed") cfg.seed = val.get<std::uint64_t>();
        else if (key == "n_sessions") cfg.n_sessions = val.get<int>();
        else if (key == "stock_id") cfg.stock_id = val.get<std::string>();
        else if (key == "tick_size") cfg.tick_size = val.get<double>();
        else if (key == "p0_price") cfg.p0_price = val.get<double>();
        else if (key == "spread_ticks") cfg.spread_ticks = val.get<int>();
        else if (key == "session_volume") cfg.session_volume = val.get<double>();
        else if (key == "meta_volume_fraction") cfg.meta_volume_fraction = val.get<double>();
        else if (key == "n_meta_traders") cfg.n_meta_traders = val.get<int>();
        else if (key == "f_log_median") cfg.f_log_median = val.get<double>();
        else if (key == "f_log_sigma") cfg.f_log_sigma = val.get<double>();
        else if (key == "f_min") cfg.f_min = val.get<double>();
        else if (key == "f_max") cfg.f_max = val.get<double>();
        else if (key == "f_pareto") cfg.f_pareto = val.get<bool>();
        else if (key == "f_pareto_alpha") cfg.f_pareto_alpha = val.get<double>();
        else if (key == "n_base") cfg.n_base = val.get<double>();
        else if (key == "n_f_exp") cfg.n_f_exp = val.get<double>();
        else if (key == "n_jitter") cfg.n_jitter = val.get<double>();
        else if (key == "n_max") cfg.n_max = val.get<std::int64_t>();
        else if (key == "dt_base_s") cfg.dt_base_s = val.get<double>();
        else if (key == "dt_f_exp") cfg.dt_f_exp = val.get<double>();
        else if (key == "dt_sigma_log") cfg.dt_sigma_log = val.get<double>();
        else if (key == "max_span_frac") cfg.max_span_frac = val.get<double>();
        else if (key == "child_time_jitter") cfg.child_time_jitter = val.get<double>();
        else if (key == "n_fast_takers") cfg.n_fast_takers = val.get<int>();
        else if (key == "fast_size_median") cfg.fast_size_median = val.get<double>();
        else if (key == "fast_size_sigma") cfg.fast_size_sigma = val.get<double>();
        else if (key == "G0") cfg.G0 = val.get<double>();
        else if (key == "i0") cfg.i0 = val.get<double>();
        else if (key == "beta") cfg.beta = val.get<double>();
        else if (key == "dt_ref_s") cfg.dt_ref_s = val.get<double>();
        else if (key == "normalize_total_impact") cfg.normalize_total_impact = val.get<bool>();
        else if (key == "noise_sigma_per_sqrt_s") cfg.noise_sigma_per_sqrt_s = val.get<double>();
        else if (key == "crowd_weight") cfg.crowd_weight = val.get<double>();
        else if (key == "refill_mu") cfg.refill_mu = val.get<double>();
        else if (key == "mm_limit_refresh_s") cfg.mm_limit_refresh_s = val.get<double>();
        else if (key == "quote_size_median") cfg.quote_size_median = val.get<double>();
        else if (key == "quote_size_sigma") cfg.quote_size_sigma = val.get<double>();
        else if (key == "u_shape_amp") cfg.u_shape_amp = val.get<double>();
        else if (key == "exact_kernel") cfg.exact_kernel = val.get<bool>();
        else if (key == "providers") {
            cfg.providers.clear();
            for (const auto& p : val)
                cfg.providers.push_back({p.at("id").get<std::string>(), p.at("C").get<double>(),
                                         p.at("kappa").get<double>(), p.at("weight").get<double>(),
                                         p.value("fast", true)});
        } else {
            throw ConfigInvalid("unknown simulate config key: " + key);
        }
    }
}

int cmd_simulate(const Common& c, const std::string& preset, int n_sessions, int argc,
                 char** argv) {
    sim::SimConfig cfg;
    if (preset == "paper-like") cfg = sim::preset_paper_like();
    else if (!preset.empty()) throw ConfigInvalid("unknown preset: " + preset);
    apply_sim_config(cfg, c.config);
    cfg.seed = c.seed;
    if (n_sessions > 0) cfg.n_sessions = n_sessions;

    auto res = sim::simulate(cfg);

    Manifest man("simulate", c, argc, argv);
    {
        std::ostringstream out;
        tape::serialize_tape(out, res.events);
        io::atomic_write_text(man.out("tape.csv"), out.str());
    }
    {
        std::ostringstream out;
        tape::write_meta(out, res.meta);
        io::atomic_write_text(man.out("stock_meta.txt"), out.str());
    }
    write_json_file(man.out("ledger.json"), io::ledger_to_json(res.ledger));
    man.write();
    std::cout << "simulate: " << res.events.size() << " events, "
              << res.ledger.sessions.size() << " sessions -> " << man.dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ingest: streaming parse + session split, bounded memory.

int cmd_ingest(const Common& c, const std::string& tape_path, const std::string& stock_id,
               bool binary_out, int argc, char** argv) {
    Manifest man("ingest", c, argc, argv);
    man.input(tape_path);

    std::ifstream in(tape_path, std::ios::binary);
    if (!in) throw DataError("cannot open " + tape_path);

    std::ostringstream sessions_csv;
    sessions_csv << "session_id,n_events,V_D,sigma_D\n";
    std::size_t n_sessions = 0, n_events = 0;
    std::ofstream bin_out;
    const std::string bin_path = binary_out ? man.out("tape.bin") : "";
    std::vector<tape::OrderEvent> bin_buf;

    tape::SessionSplitter splitter(stock_id, [&](tape::Session&& s) {
        if (s.empty_flag) return;
        double sigma = 0.0;
        try {
            sigma = tape::session_stats(s).sigma_D;
        } catch (const NoQuotes&) {
        }
        char buf[128];
        std::snprintf(buf, sizeof buf, "%s,%zu,%lld,%.9g\n", s.id.str().c_str(),
                      s.events.size(), static_cast<long long>(s.executed_volume()), sigma);
        sessions_csv << buf;
        ++n_sessions;
        if (binary_out)
            bin_buf.insert(bin_buf.end(), std::make_move_iterator(s.events.begin()),
                           std::make_move_iterator(s.events.end()));
    });
    tape::parse_tape_stream(in, [&](tape::OrderEvent&& ev) {
        ++n_events;
        splitter.push(std::move(ev));
    });
    splitter.finish();
    if (n_sessions == 0) throw EmptySession("no sessions inside trading windows in " + tape_path);

    io::atomic_write_text(man.out("sessions.csv"), sessions_csv.str());
    if (binary_out) {
        std::ostringstream out;
        tape::write_binary_tape(out, bin_buf);
        io::atomic_write_text(bin_path, out.str());
    }
    man.write();
    std::cout << "ingest: " << n_events << " events, " << n_sessions << " sessions -> "
              << man.dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// metaorders

int cmd_metaorders(const Common& c, const std::string& tape_path, int argc, char** argv) {
    Manifest man("metaorders", c, argc, argv);
    man.input(tape_path);
    const auto sessions = load_sessions(tape_path, "");
    const auto ms = meta::reconstruct_all(sessions);
    if (ms.empty()) throw TooFewOrders("no metaorders reconstructed from " + tape_path);

    io::write_metaorders_csv(man.out("metaorders.csv"), ms);
    const auto facts = meta::stylized_facts(ms);
    io::write_curve_csv(man.out("f_hist.csv"), facts.f_hist);
    io::write_curve_csv(man.out("dt_vs_f.csv"), facts.dt_vs_f);
    io::write_curve_csv(man.out("n_vs_f.csv"), facts.n_vs_f);

    const auto prof = meta::execution_profile(ms);
    {
        std::ostringstream out;
        out << "x,mean,se,count\n";
        char buf[128];
        for (std::size_t i = 0; i < prof.bins.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%lld\n", prof.x[i],
                          prof.bins[i].mean(), prof.bins[i].se(),
                          static_cast<long long>(prof.bins[i].n));
            out << buf;
        }
        io::atomic_write_text(man.out("execution_profile.csv"), out.str());
    }
    json j = {{"n_metaorders", ms.size()},
              {"f_mode", meta::f_mode(facts.f_hist)},
              {"profile_max_diagonal_deviation", prof.max_diagonal_deviation()}};
    write_json_file(man.out("metaorders_summary.json"), j);
    man.write();
    std::cout << "metaorders: " << ms.size() << " reconstructed -> " << man.dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// impact

int cmd_impact(const Common& c, const std::string& tape_path, double f_lo, double f_hi,
               bool robust, int argc, char** argv) {
    Manifest man("impact", c, argc, argv);
    man.input(tape_path);
    const auto sessions = load_sessions(tape_path, "");
    const auto ms = meta::reconstruct_all(sessions);

    impact::ImpactCurveOptions opt;
    opt.fit_f_lo = f_lo;
    opt.fit_f_hi = f_hi;
    opt.robust = robust;
    const auto ic = impact::metaorder_impact_curve(ms, opt);
    if (!ic.fit) throw FitUnavailable("impact: power fit did not converge");

    io::write_curve_csv(man.out("impact_curve.csv"), ic.curve);
    for (std::size_t k = 0; k < ic.t_strata.size(); ++k)
        io::write_curve_csv(man.out("impact_curve_Tstratum" + std::to_string(k) + ".csv"),
                            ic.t_strata[k]);
    json j;
    j["fit"] = io::power_fit_json(*ic.fit);
    j["n_metaorders"] = ic.n_used;
    j["fit_window"] = {{"f_lo", f_lo}, {"f_hi", f_hi}};
    j["robust"] = robust;
    if (const auto py = ic.pinned_prefactor()) j["pinned_sqrt_prefactor"] = *py;
    const auto tt = ic.t_trend();
    j["t_trend"] = {{"slope", tt.slope}, {"slope_se", tt.slope_se}, {"n", tt.n}};
    write_json_file(man.out("impact_fit.json"), j);
    io::write_loglog_svg(man.out("impact.svg"), {curve_series(ic.curve, "impact")},
                         "metaorder impact vs participation", &*ic.fit);
    man.write();
    std::cout << "impact: delta=" << ic.fit->exponent << " Y=" << ic.fit->prefactor << " -> "
              << man.dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// child-profile

int cmd_child_profile(const Common& c, const std::string& tape_path, std::size_t i_max,
                      std::int64_t min_children, int argc, char** argv) {
    Manifest man("child-profile", c, argc, argv);
    man.input(tape_path);
    const auto sessions = load_sessions(tape_path, "");
    const auto ms = meta::reconstruct_all(sessions);

    impact::ChildProfileOptions opt;
    opt.i_max = i_max;
    opt.min_children = min_children;
    const auto prof = impact::child_impact_profile(ms, opt);

    {
        std::ostringstream out;
        out << "rank,J_mean,J_se,J_count,D_mean,D_se,D_count\n";
        char buf[192];
        for (std::size_t i = 0; i < prof.ranks.size(); ++i) {
            if (prof.ranks[i].n == 0 && prof.diffs[i].n == 0) continue;
            std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%lld,%.9g,%.9g,%lld\n", i + 1,
                          prof.ranks[i].mean(), prof.ranks[i].se(),
                          static_cast<long long>(prof.ranks[i].n), prof.diffs[i].mean(),
                          prof.diffs[i].se(), static_cast<long long>(prof.diffs[i].n));
            out << buf;
        }
        io::atomic_write_text(man.out("child_profile.csv"), out.str());
    }
    auto cp_json = [](const impact::ChildProfileFit& f) {
        return json{{"A", f.A}, {"i0", f.i0}, {"beta", f.beta}, {"converged", f.converged}};
    };
    json j;
    if (prof.fit) j["fit"] = cp_json(*prof.fit);
    if (prof.fit_sqrt) j["fit_sqrt_constrained"] = cp_json(*prof.fit_sqrt);
    if (prof.fit_i0_zero) j["fit_i0_zero"] = io::power_fit_json(*prof.fit_i0_zero);
    write_json_file(man.out("child_profile_fit.json"), j);
    {
        io::PlotSeries s;
        s.label = "J(i)";
        for (std::size_t i = 0; i < prof.ranks.size(); ++i)
            if (prof.ranks[i].n > 0) {
                s.x.push_back(static_cast<double>(i + 1));
                s.y.push_back(prof.ranks[i].mean());
            }
        io::write_loglog_svg(man.out("child_profile.svg"), {s},
                             "cumulative child impact vs rank");
    }
    man.write();
    if (prof.fit)
        std::cout << "child-profile: i0=" << prof.fit->i0 << " beta=" << prof.fit->beta
                  << " -> " << man.dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// single-mo

int cmd_single_mo(const Common& c, const std::string& tape_path, int argc, char** argv) {
    Manifest man("single-mo", c, argc, argv);
    man.input(tape_path);
    const auto sessions = load_sessions(tape_path, "");
    const auto season = tape::seasonality_profile(sessions);
    const auto res = impact::single_mo_impact(sessions, season);

    io::write_curve_csv(man.out("single_mo_all.csv"), res.all);
    io::write_curve_csv(man.out("single_mo_zero.csv"), res.zero);
    json j;
    j["n_all"] = res.n_all;
    j["n_zero"] = res.n_zero;
    j["truncated"] = res.truncated;
    j["max_abs_lag0_zero"] = res.max_abs_lag0_zero;
    if (res.fit_all) j["fit_all"] = io::power_fit_json(*res.fit_all);
    if (res.fit_zero) j["fit_zero"] = io::power_fit_json(*res.fit_zero);
    write_json_file(man.out("single_mo_fit.json"), j);
    io::write_loglog_svg(man.out("single_mo.svg"),
                         {curve_series(res.all, "all"),
                          curve_series(res.zero, "zero-immediate", "#2ca02c")},
                         "single market-order impact in volume time",
                         res.fit_all ? &*res.fit_all : nullptr);
    man.write();
    std::cout << "single-mo: n_all=" << res.n_all << " n_zero=" << res.n_zero << " -> "
              << man.dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// shuffle

int cmd_shuffle(const Common& c, const std::string& tape_path, int n_seeds, double f_lo,
                double f_hi, int argc, char** argv) {
    Manifest man("shuffle", c, argc, argv);
    man.input(tape_path);
    const auto sessions = load_sessions(tape_path, "");
    const auto real_ms = meta::reconstruct_all(sessions);

    impact::ImpactCurveOptions opt;
    opt.fit_f_lo = f_lo;
    opt.fit_f_hi = f_hi;
    const auto real = impact::metaorder_impact_curve(real_ms, opt);
    io::write_curve_csv(man.out("impact_curve_real.csv"), real.curve);

    std::ostringstream csv;
    csv << "seed,chi2,dof,p_value,id_hist_preserved\n";
    int n_pass = 0, n_hist_ok = 0;
    for (int k = 0; k < n_seeds; ++k) {
        const std::uint64_t sd = c.seed + static_cast<std::uint64_t>(k);
        const auto syn = shuffle::synthetic_pipeline(sessions, sd, opt);
        const auto cmp = shuffle::compare_curves(real.curve, syn.curve.curve, 50, f_lo, f_hi);
        bool hist_ok = true;
        std::uint64_t sub = 0;
        for (const auto& s : sessions) {
            ++sub;
            std::size_t n_mo = 0;
            for (const auto& ev : s.events)
                if (ev.kind == tape::EventKind::submit_market && ++n_mo >= 2) break;
            if (n_mo < 2) continue;
            const auto sh = shuffle::shuffle_ids(s, sd * 0x9e3779b97f4a7c15ULL + sub);
            if (shuffle::id_histogram(s) != shuffle::id_histogram(sh.session)) hist_ok = false;
        }
        if (cmp.p_value > 0.01) ++n_pass;
        if (hist_ok) ++n_hist_ok;
        char buf[128];
        std::snprintf(buf, sizeof buf, "%llu,%.9g,%lld,%.9g,%d\n",
                      static_cast<unsigned long long>(sd), cmp.chi2,
                      static_cast<long long>(cmp.dof), cmp.p_value, hist_ok ? 1 : 0);
        csv << buf;
        if (k == 0) io::write_curve_csv(man.out("impact_curve_synthetic.csv"), syn.curve.curve);
    }
    io::atomic_write_text(man.out("shuffle_chi2.csv"), csv.str());
    json j = {{"n_seeds", n_seeds},
              {"n_p_above_0.01", n_pass},
              {"n_id_hist_preserved", n_hist_ok}};
    write_json_file(man.out("shuffle_summary.json"), j);
    man.write();
    std::cout << "shuffle: " << n_pass << "/" << n_seeds << " seeds with p>0.01 -> " << man.dir
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// ecology

int cmd_ecology(const Common& c, const std::string& tape_path, int argc, char** argv) {
    Manifest man("ecology", c, argc, argv);
    man.input(tape_path);
    const auto sessions = load_sessions(tape_path, "");

    std::ostringstream csv;
    csv << "session_id,V_D,V_fast,N_D,N_fast,v_fast_share,n_fast_share,against_fast_share\n";
    stats::Histogram hv(0.0, 1.0, 20), hn(0.0, 0.5, 50);
    for (const auto& s : sessions) {
        const auto eco = eco::classify_session(s);
        hv.add(eco.v_fast_share());
        hn.add(eco.n_fast_share());
        char buf[192];
        std::snprintf(buf, sizeof buf, "%s,%lld,%lld,%lld,%lld,%.9g,%.9g,%.9g\n",
                      s.id.str().c_str(), static_cast<long long>(eco.V_D),
                      static_cast<long long>(eco.V_fast), static_cast<long long>(eco.N_D),
                      static_cast<long long>(eco.N_fast), eco.v_fast_share(),
                      eco.n_fast_share(), eco.against_fast_share());
        csv << buf;
    }
    io::atomic_write_text(man.out("ecology_sessions.csv"), csv.str());
    json j = {{"n_sessions", sessions.size()},
              {"v_fast_share_mode", hv.mode()},
              {"n_fast_share_mode", hn.mode()}};
    write_json_file(man.out("ecology_summary.json"), j);
    man.write();
    std::cout << "ecology: " << sessions.size() << " sessions -> " << man.dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// refill

int cmd_refill(const Common& c, const std::string& tape_path, int argc, char** argv) {
    Manifest man("refill", c, argc, argv);
    man.input(tape_path);
    const auto sessions = load_sessions(tape_path, "");

    const auto fits = refill::fit_providers(sessions);
    if (fits.empty()) throw FitUnavailable("refill: no provider had enough sequences to fit");
    io::write_refill_csv(man.out("refill_fits.csv"), fits, c.seed);

    {
        std::ostringstream out;
        out << "C,liquidity_share\n";
        char buf[96];
        for (const auto& pt : refill::liquidity_share_vs_C(fits)) {
            std::snprintf(buf, sizeof buf, "%.9g,%.9g\n", pt.C, pt.share);
            out << buf;
        }
        io::atomic_write_text(man.out("share_vs_C.csv"), out.str());
    }
    // sequence-length distribution across all providers
    std::vector<refill::RefillSequence> all;
    for (const auto& s : sessions) {
        auto seqs = refill::extract_refill_sequences(s);
        all.insert(all.end(), std::make_move_iterator(seqs.begin()),
                   std::make_move_iterator(seqs.end()));
    }
    {
        std::map<std::int64_t, std::int64_t> hist;
        for (const auto& s : all) ++hist[s.n()];
        std::ostringstream out;
        out << "length,count\n";
        for (const auto& [n, cnt] : hist) out << n << "," << cnt << "\n";
        io::atomic_write_text(man.out("refill_lengths.csv"), out.str());
    }
    const auto tail = refill::length_distribution(all);
    json j;
    j["n_sequences"] = all.size();
    j["length_tail"] = {{"mu", tail.exponent}, {"x_min", tail.x_min}, {"n_tail", tail.n_tail}};
    j["n_fitted_providers"] = fits.size();
    write_json_file(man.out("refill_summary.json"), j);
    man.write();
    std::cout << "refill: " << fits.size() << " providers fitted, mu_p=" << tail.exponent
              << " -> " << man.dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// report: renders SVG figure analogues from CSVs produced by prior
// subcommands; consumes nothing else.

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;  // non-numeric cells parse as NaN
    int col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

Csv read_csv(const fs::path& p) {
    Csv c;
    std::ifstream in(p);
    if (!in) throw DataError("cannot open " + p.string());
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (std::size_t i = 0; i <= line.size(); ++i)
            if (i == line.size() || line[i] == ',') {
                fields.push_back(line.substr(start, i - start));
                start = i + 1;
            }
        if (first) {
            c.header = fields;
            first = false;
            continue;
        }
        std::vector<double> row;
        for (const auto& f : fields) {
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            row.push_back(end == f.c_str() + f.size() && !f.empty()
                              ? v
                              : std::numeric_limits<double>::quiet_NaN());
        }
        c.rows.push_back(std::move(row));
    }
    return c;
}

io::PlotSeries series_from_csv(const Csv& c, const std::string& xcol, const std::string& ycol,
                               const std::string& label, const std::string& color = "#1f77b4") {
    io::PlotSeries s;
    s.label = label;
    s.color = color;
    const int xi = c.col(xcol), yi = c.col(ycol);
    if (xi < 0 || yi < 0) throw DataError("missing column " + xcol + "/" + ycol);
    for (const auto& r : c.rows) {
        const double x = r[static_cast<std::size_t>(xi)], y = r[static_cast<std::size_t>(yi)];
        if (std::isnan(x) || std::isnan(y)) continue;
        s.x.push_back(x);
        s.y.push_back(y);
    }
    return s;
}

int cmd_report(const Common& c, const std::string& in_dir, int argc, char** argv) {
    Manifest man("report", c, argc, argv);
    const fs::path src(in_dir);
    if (!fs::is_directory(src)) throw DataError(in_dir + " is not a directory");
    json produced = json::array();

    // outputs may sit directly in in_dir or one level down (one directory per
    // prior subcommand, as in the documented pipeline)
    auto find = [&](const char* name) -> fs::path {
        if (fs::exists(src / name)) return src / name;
        for (const auto& e : fs::directory_iterator(src))
            if (e.is_directory() && fs::exists(e.path() / name)) return e.path() / name;
        return {};
    };
    auto have = [&](const char* name) { return !find(name).empty(); };
    auto use = [&](const char* name) {
        const fs::path p = find(name);
        man.input(p.string());
        return read_csv(p);
    };

    if (have("f_hist.csv")) {
        const auto csv = use("f_hist.csv");
        auto s = series_from_csv(csv, "x", "count", "metaorder count");
        io::write_loglog_svg(man.out("fig_participation_hist.svg"), {s},
                             "metaorder participation distribution");
        produced.push_back("fig_participation_hist.svg");
    }
    if (have("dt_vs_f.csv")) {
        const auto csv = use("dt_vs_f.csv");
        io::write_loglog_svg(man.out("fig_dt_vs_f.svg"),
                             {series_from_csv(csv, "x", "mean", "mean inter-child time (s)")},
                             "inter-child time vs participation");
        produced.push_back("fig_dt_vs_f.svg");
    }
    if (have("n_vs_f.csv")) {
        const auto csv = use("n_vs_f.csv");
        io::write_loglog_svg(man.out("fig_n_vs_f.svg"),
                             {series_from_csv(csv, "x", "mean", "mean child count")},
                             "children per metaorder vs participation");
        produced.push_back("fig_n_vs_f.svg");
    }
    if (have("execution_profile.csv")) {
        const auto csv = use("execution_profile.csv");
        io::write_loglog_svg(man.out("fig_execution_profile.svg"),
                             {series_from_csv(csv, "x", "mean", "executed fraction")},
                             "execution schedule profile");
        produced.push_back("fig_execution_profile.svg");
    }
    if (have("ecology_sessions.csv")) {
        const auto csv = use("ecology_sessions.csv");
        io::write_loglog_svg(man.out("fig_ecology.svg"),
                             {series_from_csv(csv, "V_D", "v_fast_share", "V_fast/V_D",
                                              "#1f77b4"),
                              series_from_csv(csv, "V_D", "n_fast_share", "N_fast/N_D",
                                              "#2ca02c")},
                             "fast-trader participation per session");
        produced.push_back("fig_ecology.svg");
    }
    if (have("single_mo_all.csv")) {
        const auto all = use("single_mo_all.csv");
        std::vector<io::PlotSeries> ss{series_from_csv(all, "x", "mean", "all orders")};
        if (have("single_mo_zero.csv"))
            ss.push_back(series_from_csv(use("single_mo_zero.csv"), "x", "mean",
                                         "zero immediate impact", "#2ca02c"));
        io::write_loglog_svg(man.out("fig_single_mo.svg"), ss,
                             "single market-order impact in volume time");
        produced.push_back("fig_single_mo.svg");
    }
    if (have("impact_curve.csv")) {
        const auto csv = use("impact_curve.csv");
        std::vector<io::PlotSeries> ss{series_from_csv(csv, "x", "mean", "metaorders")};
        io::write_loglog_svg(man.out("fig_impact.svg"), ss,
                             "metaorder impact vs participation");
        produced.push_back("fig_impact.svg");
    }
    if (have("impact_curve_real.csv") && have("impact_curve_synthetic.csv")) {
        const auto real = use("impact_curve_real.csv");
        const auto syn = use("impact_curve_synthetic.csv");
        io::write_loglog_svg(man.out("fig_shuffle.svg"),
                             {series_from_csv(real, "x", "mean", "real"),
                              series_from_csv(syn, "x", "mean", "ID-shuffled", "#d62728")},
                             "real vs synthetic metaorder impact");
        produced.push_back("fig_shuffle.svg");
    }
    if (have("refill_lengths.csv")) {
        const auto csv = use("refill_lengths.csv");
        io::write_loglog_svg(man.out("fig_refill_lengths.svg"),
                             {series_from_csv(csv, "length", "count", "sequences")},
                             "refill sequence length distribution");
        produced.push_back("fig_refill_lengths.svg");
    }
    if (have("refill_fits.csv")) {
        const auto csv = use("refill_fits.csv");
        io::write_loglog_svg(man.out("fig_refill_CK.svg"),
                             {series_from_csv(csv, "C", "kappa", "providers")},
                             "refill parameters C vs kappa");
        produced.push_back("fig_refill_CK.svg");
    }
    if (have("share_vs_C.csv")) {
        const auto csv = use("share_vs_C.csv");
        io::write_loglog_svg(man.out("fig_share_vs_C.svg"),
                             {series_from_csv(csv, "C", "liquidity_share", "providers")},
                             "liquidity share vs refill prefactor C");
        produced.push_back("fig_share_vs_C.svg");
    }
    if (produced.empty())
        throw DataError("report: no known subcommand outputs found in " + in_dir);
    write_json_file(man.out("report_summary.json"), json{{"figures", produced}});
    man.write();
    std::cout << "report: " << produced.size() << " figures -> " << man.dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"market-microstructure analytics and tape simulator"};
    app.require_subcommand(1);
    int rc = 0;

    // simulate
    Common sim_c;
    std::string sim_preset;
    int sim_sessions = 0;
    auto* sc_sim = app.add_subcommand("simulate", "Generate a seeded synthetic tape + ledger");
    sim_c.add_to(sc_sim);
    sc_sim->add_option("--preset", sim_preset, "Config preset (paper-like)");
    sc_sim->add_option("--sessions", sim_sessions, "Number of half-day sessions");
    sc_sim->callback([&] {
        sim_c.load_config();
        rc = cmd_simulate(sim_c, sim_preset, sim_sessions, argc, argv);
    });

    // ingest
    Common ing_c;
    std::string ing_tape, ing_stock;
    bool ing_binary = false;
    auto* sc_ing = app.add_subcommand("ingest", "Parse + session-split a tape (streaming)");
    ing_c.add_to(sc_ing);
    sc_ing->add_option("tape", ing_tape, "Tape CSV path")->required();
    sc_ing->add_option("--stock", ing_stock, "Stock identifier");
    sc_ing->add_flag("--binary", ing_binary, "Also write the binary tape");
    sc_ing->callback([&] {
        ing_c.load_config();
        rc = cmd_ingest(ing_c, ing_tape, ing_stock, ing_binary, argc, argv);
    });

    // metaorders
    Common mo_c;
    std::string mo_tape;
    auto* sc_mo = app.add_subcommand("metaorders", "Reconstruct metaorders + stylized facts");
    mo_c.add_to(sc_mo);
    sc_mo->add_option("tape", mo_tape, "Tape CSV path")->required();
    sc_mo->callback([&] {
        mo_c.load_config();
        rc = cmd_metaorders(mo_c, mo_tape, argc, argv);
    });

    // impact
    Common imp_c;
    std::string imp_tape;
    double imp_flo = 0.0, imp_fhi = std::numeric_limits<double>::infinity();
    bool imp_robust = false;
    auto* sc_imp = app.add_subcommand("impact", "Metaorder impact curve + square-root-law fit");
    imp_c.add_to(sc_imp);
    sc_imp->add_option("tape", imp_tape, "Tape CSV path")->required();
    sc_imp->add_option("--f-lo", imp_flo, "Lower edge of the fit window");
    sc_imp->add_option("--f-hi", imp_fhi, "Upper edge of the fit window");
    sc_imp->add_flag("--robust", imp_robust, "Median bins instead of means");
    sc_imp->callback([&] {
        imp_c.load_config();
        rc = cmd_impact(imp_c, imp_tape, imp_flo, imp_fhi, imp_robust, argc, argv);
    });

    // child-profile
    Common cp_c;
    std::string cp_tape;
    std::size_t cp_imax = 50;
    std::int64_t cp_minchild = 2;
    auto* sc_cp = app.add_subcommand("child-profile", "Cumulative child impact profile + fit");
    cp_c.add_to(sc_cp);
    sc_cp->add_option("tape", cp_tape, "Tape CSV path")->required();
    sc_cp->add_option("--i-max", cp_imax, "Highest rank used in the fit");
    sc_cp->add_option("--min-children", cp_minchild, "Minimum child count per metaorder");
    sc_cp->callback([&] {
        cp_c.load_config();
        rc = cmd_child_profile(cp_c, cp_tape, cp_imax, cp_minchild, argc, argv);
    });

    // single-mo
    Common smo_c;
    std::string smo_tape;
    auto* sc_smo = app.add_subcommand("single-mo", "Single market-order impact in volume time");
    smo_c.add_to(sc_smo);
    sc_smo->add_option("tape", smo_tape, "Tape CSV path")->required();
    sc_smo->callback([&] {
        smo_c.load_config();
        rc = cmd_single_mo(smo_c, smo_tape, argc, argv);
    });

    // shuffle
    Common sh_c;
    std::string sh_tape;
    int sh_nseeds = 100;
    double sh_flo = 0.0, sh_fhi = std::numeric_limits<double>::infinity();
    auto* sc_sh = app.add_subcommand("shuffle", "ID-shuffle invariance check");
    sh_c.add_to(sc_sh);
    sc_sh->add_option("tape", sh_tape, "Tape CSV path")->required();
    sc_sh->add_option("--n-seeds", sh_nseeds, "Number of shuffle seeds");
    sc_sh->add_option("--f-lo", sh_flo, "Lower edge of the comparison window");
    sc_sh->add_option("--f-hi", sh_fhi, "Upper edge of the comparison window");
    sc_sh->callback([&] {
        sh_c.load_config();
        rc = cmd_shuffle(sh_c, sh_tape, sh_nseeds, sh_flo, sh_fhi, argc, argv);
    });

    // ecology
    Common eco_c;
    std::string eco_tape;
    auto* sc_eco = app.add_subcommand("ecology", "Fast/slow trader classification per session");
    eco_c.add_to(sc_eco);
    sc_eco->add_option("tape", eco_tape, "Tape CSV path")->required();
    sc_eco->callback([&] {
        eco_c.load_config();
        rc = cmd_ecology(eco_c, eco_tape, argc, argv);
    });

    // refill
    Common rf_c;
    std::string rf_tape;
    auto* sc_rf = app.add_subcommand("refill", "Liquidity-provider refill analysis");
    rf_c.add_to(sc_rf);
    sc_rf->add_option("tape", rf_tape, "Tape CSV path")->required();
    sc_rf->callback([&] {
        rf_c.load_config();
        rc = cmd_refill(rf_c, rf_tape, argc, argv);
    });

    // report
    Common rep_c;
    std::string rep_dir;
    auto* sc_rep = app.add_subcommand("report", "Render SVG figures from prior outputs");
    rep_c.add_to(sc_rep);
    sc_rep->add_option("dir", rep_dir, "Directory with prior subcommand outputs")->required();
    sc_rep->callback([&] {
        rep_c.load_config();
        rc = cmd_report(rep_c, rep_dir, argc, argv);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;  // usage errors exit 2; --help exits 0
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const FitError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return rc;
}
