// fca_cli: run experiments from JSON configs, the acceptance suite, and benchmarks.
//
// Exit codes: 0 success, 1 validation failures, 2 config error, 3 numerical failure,
// 4 I/O failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <boost/version.hpp>
#include <fftw3.h>

#include "config.hpp"
#include "fca/fca.hpp"

namespace fs = std::filesystem;
using namespace fca;
using fca::cli::Block;
using fca::cli::ConfigError;
using fca::cli::json;

namespace {

constexpr const char* kVersion = "1.0.0";

struct RunContext {
    fs::path out_dir;
    json manifest = json::object();  ///< run metadata appended to the resolved config
    std::vector<std::string> files;
    bool validation_failed = false;

    std::string path(const std::string& file) {
        files.push_back(file);
        return (out_dir / file).string();
    }
};

std::string tag(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ---------------------------------------------------------------------------
// Blocks shared by several experiment kinds

ModelSpec parse_model(Block b) {
    const auto type = b.get<std::string>("type");
    ModelSpec spec;
    if (type == "quadratic") {
        QuadraticParams q;
        q.a = b.get<double>("a");
        q.b = b.get<double>("b", 0.0);
        q.c = b.get<double>("c");
        q.d = b.get<double>("d", 0.0);
        const auto& e = b.raw("e");
        if (e.is_number()) {
            q.e = ETilde::constant(e.get<double>());
        } else if (e.is_string() && e.get<std::string>() == "friedrich") {
            q.e = ETilde::friedrich();
        } else if (e.is_object()) {
            json resolved;
            Block eb(e, resolved, b.name("e"));
            q.e = ETilde::exponential(eb.get<double>("base"), eb.get<double>("amplitude", 0.0), eb.get<double>("rate", 0.0));
            eb.finish();
        } else {
            throw ConfigError("field '" + b.name("e") + "' must be a number, \"friedrich\" or {base, amplitude, rate}");
        }
        const auto clock = b.get<std::string>("clock", "unit");
        if (clock == "unit") q.clock = Clock::unit;
        else if (clock == "linear") q.clock = Clock::linear;
        else throw ConfigError("field '" + b.name("clock") + "' must be \"unit\" or \"linear\"");
        q.t0 = b.get<double>("t0", 0.0);
        q.x0 = b.get<double>("x0", 0.0);
        spec = q;
    } else if (type == "piecewise") {
        PiecewiseParams p;
        p.sigma = b.get<double>("sigma", 1.0);
        p.epsilon = b.get<double>("epsilon");
        p.hurst = b.get<double>("hurst", 0.5);
        p.mu = b.get<double>("mu", 0.0);
        p.r = b.get<double>("r", 0.0);
        p.t0 = b.get<double>("t0", 0.0);
        if (b.has("smooth_k")) p.smooth_k = b.get<double>("smooth_k");
        else b.ignore("smooth_k");
        spec = p;
    } else if (type == "vnb") {
        VnbParams v;
        v.alpha = b.get<double>("alpha");
        v.sigma = b.get<double>("sigma", 0.3);
        v.r = b.get<double>("r", 0.03);
        v.mu = b.get<double>("mu", 0.0);
        v.omega0 = b.get<double>("omega0", 0.0);
        v.t0 = b.get<double>("t0", 0.2);
        v.T = b.get<double>("T", 0.7);
        spec = v;
    } else {
        throw ConfigError("field '" + b.name("type") + "' must be quadratic, piecewise or vnb");
    }
    b.finish();
    try {
        validate_model(spec);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
    return spec;
}

Measure parse_measure(Block& root, const char* def) {
    const auto m = root.get<std::string>("measure", def);
    if (m == "objective") return Measure::objective;
    if (m == "risk-neutral") return Measure::risk_neutral;
    throw ConfigError("field 'measure' must be \"objective\" or \"risk-neutral\"");
}

struct EngineCfg {
    Scheme scheme = Scheme::strang;
    ConvolutionMethod convolution = ConvolutionMethod::fft;
    bool renormalize = false;
};

EngineCfg parse_engine(Block b, ConvolutionMethod def_conv) {
    EngineCfg e;
    const auto s = b.get<std::string>("scheme", "strang");
    if (s == "strang") e.scheme = Scheme::strang;
    else if (s == "euler") e.scheme = Scheme::euler;
    else throw ConfigError("field 'engine.scheme' must be \"strang\" or \"euler\"");
    const auto c = b.get<std::string>("convolution", def_conv == ConvolutionMethod::fft ? "fft" : "direct");
    if (c == "fft") e.convolution = ConvolutionMethod::fft;
    else if (c == "direct") e.convolution = ConvolutionMethod::direct;
    else throw ConfigError("field 'engine.convolution' must be \"fft\" or \"direct\"");
    e.renormalize = b.get<bool>("renormalize", false);
    b.finish();
    return e;
}

SpatialGrid make_grid(double z_min, std::size_t m, const std::string& what) {
    try {
        return build_grid(z_min, m);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

struct McCfg {
    std::size_t n_paths = 1'000'000;
    std::uint64_t seed = 20240521;
    std::optional<double> dtau;
    bool antithetic = false;
    std::size_t bins = 200;
};

McCfg parse_mc(Block b) {
    McCfg m;
    m.n_paths = b.count("n_paths", m.n_paths);
    m.seed = b.get<std::uint64_t>("seed", m.seed);
    if (b.has("dtau")) m.dtau = b.get<double>("dtau");
    else b.ignore("dtau");
    m.antithetic = b.get<bool>("antithetic", false);
    m.bins = b.count("bins", m.bins);
    b.finish();
    if (m.dtau && !(*m.dtau > 0.0)) throw ConfigError("field 'mc.dtau' must be positive");
    if (m.antithetic && m.n_paths % 2) throw ConfigError("field 'mc.n_paths' must be even with antithetic sampling");
    return m;
}

/// Time grid from {dtau, n} or {dtau, tau_end} or {dtau, snapshot_taus}.
TimeGrid parse_time(Block& b, std::vector<double>& snapshots, std::optional<double> default_end = std::nullopt) {
    const double dtau = b.get<double>("dtau");
    if (!(dtau > 0.0)) throw ConfigError("field '" + b.name("dtau") + "' must be positive");
    snapshots = b.get<std::vector<double>>("snapshot_taus", {});
    TimeGrid tg;
    if (b.has("n")) {
        tg = build_time_grid(dtau, b.count("n"));
        b.ignore("tau_end");
    } else if (b.has("tau_end") || default_end) {
        b.ignore("n");
        const double end = b.has("tau_end") ? b.get<double>("tau_end") : b.get<double>("tau_end", *default_end);
        if (!(end > 0.0)) throw ConfigError("field '" + b.name("tau_end") + "' must be positive");
        tg = time_grid_to(end, dtau);
    } else if (!snapshots.empty()) {
        b.ignore("n");
        b.ignore("tau_end");
        const double end = *std::max_element(snapshots.begin(), snapshots.end());
        tg = build_time_grid(dtau, static_cast<std::size_t>(std::llround(end / dtau)));
    } else {
        throw ConfigError("missing required field '" + b.name("n") + "'");
    }
    try {
        if (!snapshots.empty()) report_steps(tg, snapshots);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(b.name("snapshot_taus") + ": " + e.what());
    }
    return tg;
}

/// x range where the z density exceeds 1e-12 of its peak.
std::pair<double, double> support_in_x(const DensityVector& p, const SpatialGrid& g, const ModelSpec& model,
                                       Measure measure, double tau) {
    const double peak = *std::max_element(p.values.begin(), p.values.end());
    std::size_t lo = 0, hi = g.m - 1;
    while (lo < hi && p.values[lo] < 1e-12 * peak) ++lo;
    while (hi > lo && p.values[hi] < 1e-12 * peak) --hi;
    return {lamperti_inverse(model, measure, g.node(lo), tau), lamperti_inverse(model, measure, g.node(hi), tau)};
}

// ---------------------------------------------------------------------------
// Experiments

void run_density(Block& root, RunContext& rc) {
    const auto model = parse_model(root.child("model"));
    const auto measure = parse_measure(root, "objective");
    auto gb = root.child("grid");
    const auto grid = make_grid(gb.get<double>("z_min", -10.24), gb.count("m"), "grid");
    gb.finish();
    auto tb = root.child("time");
    std::vector<double> snaps;
    const auto tg = parse_time(tb, snaps);
    tb.finish();
    const auto eng = parse_engine(root.child_or_empty("engine"), ConvolutionMethod::fft);
    auto mcb = root.optional_child("mc");
    std::optional<McCfg> mc;
    if (mcb) mc = parse_mc(*mcb);
    if (snaps.empty()) snaps.push_back(tg.tau_end());

    PropagateOptions opt{eng.scheme, eng.renormalize, eng.convolution};
    PropagateStats st;
    const auto dens = propagate(model, measure, grid, tg, snaps, opt, &st);
    json snaps_meta = json::array();
    for (std::size_t s = 0; s < dens.size(); ++s) {
        const double tau = snaps[s];
        csv::write_file(rc.path("density_tau_" + tag(tau) + ".csv"), [&](std::ostream& os) { csv::write_density(os, dens[s], grid); });
        std::vector<double> xs(grid.m);
        for (std::size_t j = 0; j < grid.m; ++j) xs[j] = lamperti_inverse(model, measure, grid.node(j), tau);
        const auto fx = density_in_x(dens[s], model, measure, grid, tau, xs);
        csv::write_file(rc.path("density_x_tau_" + tag(tau) + ".csv"),
                        [&](std::ostream& os) { csv::write_density_x(os, xs, fx, tau); });
        snaps_meta.push_back({{"tau", tau}, {"mass", dens[s].mass}, {"mass_deficit", 1.0 - dens[s].mass}});
    }
    rc.manifest["snapshots"] = snaps_meta;
    rc.manifest["leaked"] = st.leaked;
    rc.manifest["max_negative_excursion"] = st.max_negative_excursion;
    rc.manifest["warnings"] = st.warnings;

    if (mc) {
        McConfig cfg{model, measure, tg.tau_end(), mc->dtau.value_or(tg.dtau), mc->n_paths, mc->seed, Functional::none,
                     mc->antithetic};
        for (double t : snaps)
            if (std::fabs(t - tg.tau_end()) > 1e-12) cfg.snapshot_taus.push_back(t);
        const auto samples = simulate(cfg);
        std::size_t q = 0;
        for (std::size_t s = 0; s < dens.size(); ++s) {
            const bool last = std::fabs(snaps[s] - tg.tau_end()) <= 1e-12;
            const auto& xs = last ? samples.state : samples.snapshots[q++];
            const auto [lo, hi] = support_in_x(dens[s], grid, model, measure, snaps[s]);
            const auto h = histogram(xs, mc->bins, lo, hi);
            csv::write_file(rc.path("histogram_tau_" + tag(snaps[s]) + ".csv"), [&](std::ostream& os) { csv::write_histogram(os, h); });
        }
    }
}

void run_joint(Block& root, RunContext& rc) {
    const auto model = parse_model(root.child("model"));
    const auto measure = parse_measure(root, "risk-neutral");
    auto gb = root.child("grid");
    const auto zg = make_grid(gb.get<double>("z_min", -10.24), gb.count("m"), "grid");
    const auto ug = make_grid(gb.get<double>("u_min"), gb.count("m_u"), "grid (u)");
    gb.finish();
    std::optional<double> horizon;
    if (const auto* v = std::get_if<VnbParams>(&model)) horizon = std::log(v->T / v->t0);
    auto tb = root.child("time");
    std::vector<double> snaps;
    const auto tg = parse_time(tb, snaps, horizon);
    tb.finish();
    const auto eng = parse_engine(root.child_or_empty("engine"), ConvolutionMethod::fft);
    const bool write_joint = root.get<bool>("write_joint", true);
    auto mcb = root.optional_child("mc");
    std::optional<McCfg> mc;
    if (mcb) mc = parse_mc(*mcb);

    URecursion rec;
    Functional functional;
    if (const auto* p = std::get_if<PiecewiseParams>(&model)) {
        rec = asian_recursion(*p, tg.dtau);
        functional = Functional::geometric_average;
    } else if (std::holds_alternative<VnbParams>(model)) {
        rec = vnb_recursion(tg.dtau);
        functional = Functional::integrated_omega_squared;
    } else {
        throw ConfigError("joint-density needs a piecewise (geometric average) or vnb (integrated Omega^2) model");
    }
    const JointSetup setup{zg, ug, tg, eng.scheme, eng.convolution};
    JointStats st;
    const auto J = joint_propagate(model, measure, rec, setup, &st);
    if (write_joint) csv::write_file(rc.path("joint.csv"), [&](std::ostream& os) { csv::write_joint(os, J); });
    csv::write_file(rc.path("marginal_u.csv"), [&](std::ostream& os) { csv::write_marginal_u(os, J); });
    const auto mz = marginal_z(J);
    csv::write_file(rc.path("marginal_z.csv"), [&](std::ostream& os) { csv::write_density(os, mz, zg); });
    rc.manifest["mass"] = J.mass;
    rc.manifest["mass_deficit"] = 1.0 - J.mass;
    rc.manifest["leaked_z"] = st.leaked_z;
    rc.manifest["leaked_u"] = st.leaked_u;
    rc.manifest["tau"] = J.tau;

    if (mc) {
        const McConfig cfg{model, measure, tg.tau_end(), mc->dtau.value_or(tg.dtau), mc->n_paths, mc->seed, functional,
                           mc->antithetic};
        const auto samples = simulate(cfg);
        const auto hu = histogram(samples.functional, mc->bins, ug.lower(), ug.upper());
        csv::write_file(rc.path("histogram_u.csv"), [&](std::ostream& os) { csv::write_histogram(os, hu); });
        const auto [lo, hi] = support_in_x(mz, zg, model, measure, tg.tau_end());
        const auto hx = histogram(samples.state, mc->bins, lo, hi);
        csv::write_file(rc.path("histogram_state.csv"), [&](std::ostream& os) { csv::write_histogram(os, hx); });
    }
}

OptionStyle parse_style(const std::string& s) {
    if (s == "vanilla-piecewise") return OptionStyle::vanilla_piecewise;
    if (s == "geometric-asian-piecewise") return OptionStyle::geometric_asian_piecewise;
    if (s == "vanilla-vnb") return OptionStyle::vanilla_vnb;
    throw ConfigError("field 'option.style' must be vanilla-piecewise, geometric-asian-piecewise or vanilla-vnb");
}

PricingGrids parse_pricing_grids(Block& root, OptionStyle style) {
    PricingGrids g;
    auto gb = root.child_or_empty("grid");
    g.z_grid = make_grid(gb.get<double>("z_min", -10.24), gb.count("m", style == OptionStyle::vanilla_piecewise ? 2048 : 1024), "grid");
    if (style != OptionStyle::vanilla_piecewise) {
        const double u_def = style == OptionStyle::vanilla_vnb ? -5.12 : -2.56;
        g.u_grid = make_grid(gb.get<double>("u_min", u_def), gb.count("m_u", 2048), "grid (u)");
    }
    gb.finish();
    auto tb = root.child_or_empty("time");
    g.dtau = tb.get<double>("dtau", 1e-3);
    if (!(g.dtau > 0.0)) throw ConfigError("field 'time.dtau' must be positive");
    tb.finish();
    const bool joint = style != OptionStyle::vanilla_piecewise;
    const bool asian = style == OptionStyle::geometric_asian_piecewise;
    const auto eng = parse_engine(root.child_or_empty("engine"), asian ? ConvolutionMethod::fft : ConvolutionMethod::direct);
    g.scheme = eng.scheme;
    if (joint) g.joint_convolution = eng.convolution;
    else g.convolution = eng.convolution;
    return g;
}

void run_price(Block& root, RunContext& rc) {
    const auto model = parse_model(root.child("model"));
    root.get<std::string>("measure", "risk-neutral");
    auto ob = root.child("option");
    const auto style = parse_style(ob.get<std::string>("style"));
    OptionContract c;
    c.style = style;
    c.spot = ob.get<double>("spot", 100.0);
    const auto strikes = ob.get<std::vector<double>>("strikes");
    c.T = ob.get<double>("T");
    c.rate = ob.get<double>("rate", 0.03);
    const auto kind = ob.get<std::string>("kind", "call");
    if (kind != "call" && kind != "put") throw ConfigError("field 'option.kind' must be \"call\" or \"put\"");
    c.kind = kind == "call" ? OptionKind::call : OptionKind::put;
    if (strikes.empty()) throw ConfigError("field 'option.strikes' must not be empty");
    const bool vnb = style == OptionStyle::vanilla_vnb;
    if (vnb != std::holds_alternative<VnbParams>(model) || (!vnb && !std::holds_alternative<PiecewiseParams>(model)))
        throw ConfigError("option.style does not match the model type");
    c.t0 = ob.get<double>("t0", start_time(model));
    ob.finish();
    const auto grids = parse_pricing_grids(root, style);
    auto mcb = root.optional_child("mc");
    std::optional<McCfg> mc;
    if (mcb) mc = parse_mc(*mcb);
    try {
        c.strike = strikes.front();
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("option: ") + e.what());
    }

    TerminalLaw law;
    bool forward_normalized = true;
    if (style == OptionStyle::vanilla_piecewise) {
        law = solve_vanilla_piecewise(c, std::get<PiecewiseParams>(model), grids);
    } else if (style == OptionStyle::geometric_asian_piecewise) {
        law = solve_asian(c, std::get<PiecewiseParams>(model), grids);
        forward_normalized = false;
    } else {
        law = solve_vnb(c, std::get<VnbParams>(model), grids);
    }
    std::vector<csv::PriceRow> rows;
    for (double K : strikes) {
        c.strike = K;
        rows.push_back({style, K, c.T - c.t0, price_from_law(law, c, forward_normalized), 1.0 - law.mass});
    }
    csv::write_file(rc.path("prices.csv"), [&](std::ostream& os) { csv::write_prices(os, rows); });
    rc.manifest["mass_deficit"] = 1.0 - law.mass;
    rc.manifest["steps"] = law.grid.steps;
    rc.manifest["dtau_used"] = law.grid.dtau;
    rc.manifest["warnings"] = law.warnings;
    if (forward_normalized) rc.manifest["martingale_ratio"] = martingale_ratio(law);

    if (mc) {
        std::vector<csv::LabeledEstimate> est;
        McConfig cfg;
        std::function<double(double, double, double)> payoff;  // (state, functional, strike)
        const double sign = c.kind == OptionKind::call ? 1.0 : -1.0;
        if (vnb) {
            auto p = std::get<VnbParams>(model);
            p.r = c.rate;
            p.T = c.T;
            cfg = McConfig{ModelSpec{p}, Measure::risk_neutral, std::log(c.T / p.t0), mc->dtau.value_or(law.grid.dtau),
                           mc->n_paths, mc->seed, Functional::integrated_omega_squared, mc->antithetic};
            const double grow = std::exp(c.rate * (c.T - c.t0));
            payoff = [=](double om, double u, double K) {
                return std::max(sign * (c.spot * grow * vnb_growth(p, c.T, om, u) - K), 0.0);
            };
        } else {
            auto p = std::get<PiecewiseParams>(model);
            p.r = c.rate;
            p.t0 = c.t0;
            const ModelSpec m{p};
            const bool asian = style == OptionStyle::geometric_asian_piecewise;
            cfg = McConfig{m, Measure::risk_neutral, integral_time(m, c.T), mc->dtau.value_or(law.grid.dtau), mc->n_paths,
                           mc->seed, asian ? Functional::geometric_average : Functional::none, mc->antithetic};
            const double kappa = 2.0 * (std::sqrt(c.T) - std::sqrt(c.t0)) / (c.T - c.t0);
            payoff = [=](double x, double u, double K) {
                const double s = asian ? c.spot * std::exp(kappa * u) : c.spot * std::exp(x);
                return std::max(sign * (s - K), 0.0);
            };
        }
        const auto samples = simulate(cfg);
        for (double K : strikes) {
            const auto e = estimate_payoff(samples, [&](double s, double u) { return payoff(s, u, K); }, c.discount());
            est.push_back({std::string(to_string(style)) + "-" + kind + "-K" + tag(K), e});
        }
        csv::write_file(rc.path("estimates.csv"), [&](std::ostream& os) { csv::write_estimates(os, est); });
    }
}

void run_surface(Block& root, RunContext& rc) {
    const auto model = parse_model(root.child("model"));
    root.get<std::string>("measure", "risk-neutral");
    if (!std::holds_alternative<VnbParams>(model)) throw ConfigError("surface experiments need a vnb model");
    const auto& p = std::get<VnbParams>(model);
    auto sb = root.child("surface");
    const auto strikes = sb.get<std::vector<double>>("strikes");
    const auto maturities = sb.get<std::vector<double>>("maturities");
    const double spot = sb.get<double>("spot", 100.0);
    const auto u_mins = sb.get<std::vector<double>>("u_min_by_maturity", {});
    sb.finish();
    if (!u_mins.empty() && u_mins.size() != maturities.size())
        throw ConfigError("field 'surface.u_min_by_maturity' must have one entry per maturity");
    if (strikes.empty() || maturities.empty()) throw ConfigError("surface strikes and maturities must not be empty");
    for (double t : maturities)
        if (!(t > 0.0)) throw ConfigError("surface maturities (T - t0) must be positive");
    const auto grids = parse_pricing_grids(root, OptionStyle::vanilla_vnb);
    auto mcb = root.optional_child("mc");
    std::optional<SurfaceMc> smc;
    if (mcb) {
        const auto m = parse_mc(*mcb);
        smc = SurfaceMc{m.n_paths, m.seed, m.antithetic};
    }
    const auto grid_for = [&](double tenor) {
        if (u_mins.empty()) return grids;
        auto g = grids;
        const auto it = std::find(maturities.begin(), maturities.end(), tenor);
        g.u_grid = make_grid(u_mins[static_cast<std::size_t>(it - maturities.begin())], g.u_grid.m, "surface.u_min_by_maturity");
        return g;
    };
    const auto s = build_surface(p, strikes, maturities, grid_for, spot, smc);
    csv::write_file(rc.path("surface.csv"), [&](std::ostream& os) { csv::write_surface(os, s); });
    json deficits = json::array();
    for (std::size_t t = 0; t < maturities.size(); ++t) deficits.push_back({{"maturity", maturities[t]}, {"mass_deficit", s.mass_deficit[t]}});
    rc.manifest["mass_deficits"] = deficits;
    std::size_t missing = 0;
    for (const auto& row : s.flags)
        for (const auto& f : row) missing += !f.empty();
    rc.manifest["missing_cells"] = missing;
}

void run_validate(Block& root, RunContext& rc) {
    auto vb = root.child_or_empty("validate");
    validation::Options o;
    o.mc_paths = vb.count("mc_paths", o.mc_paths);
    o.seed = vb.get<std::uint64_t>("seed", o.seed);
    o.stationary_m = vb.count("stationary_m", o.stationary_m);
    o.threads = static_cast<unsigned>(vb.get<double>("threads", 0.0));
    for (double id : vb.get<std::vector<double>>("only", {})) {
        if (id < 1 || id > 11 || id != std::floor(id)) throw ConfigError("field 'validate.only' must list criteria 1..11");
        o.only.insert(static_cast<int>(id));
    }
    vb.finish();
    const auto results = validation::run_all(o, [](const validation::CriterionResult& r) {
        std::printf("%s [%d] %s: measured=%s tolerance=%s runtime=%.1fs | %s\n", r.passed ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), csv::num(r.measured).c_str(), csv::num(r.tolerance).c_str(), r.seconds, r.details.c_str());
        std::fflush(stdout);
    });
    csv::write_file(rc.path("validation.csv"), [&](std::ostream& os) {
        os << "id,name,passed,measured,tolerance,seconds,details\n";
        for (const auto& r : results) {
            std::string d = r.details;
            std::replace(d.begin(), d.end(), '"', '\'');
            os << r.id << ",\"" << r.name << "\"," << (r.passed ? "true" : "false") << ',' << csv::num(r.measured) << ','
               << csv::num(r.tolerance) << ',' << csv::num(r.seconds) << ",\"" << d << "\"\n";
        }
    });
    std::size_t failed = 0;
    for (const auto& r : results) failed += !r.passed;
    rc.manifest["criteria"] = results.size();
    rc.manifest["failed"] = failed;
    rc.validation_failed = failed > 0;
}

void run_bench(Block& root, RunContext& rc) {
    auto bb = root.child_or_empty("bench");
    std::vector<double> sizes = bb.get<std::vector<double>>("sizes", {2048, 4096, 8192});
    const std::size_t steps = bb.count("steps", 1000);
    const bool mc_compare = bb.get<bool>("mc_compare", false);
    const std::size_t mc_paths = bb.count("mc_paths", 1'000'000);
    bb.finish();
    for (double s : sizes) {
        const auto m = static_cast<std::size_t>(s);
        if (s != static_cast<double>(m) || !is_power_of_two(m) || m < 8) throw ConfigError("bench sizes must be powers of two >= 8");
    }
    std::vector<double> t;
    for (double s : sizes) {
        t.push_back(validation::median_propagate_seconds(static_cast<std::size_t>(s), steps));
        std::printf("m=%g n=%zu median=%.4fs\n", s, steps, t.back());
        std::fflush(stdout);
    }
    csv::write_file(rc.path("bench.csv"), [&](std::ostream& os) {
        os << "m,steps,median_seconds,ratio,model_ratio\n";
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            const double ratio = i ? t[i] / t[i - 1] : std::nan("");
            const double model = i ? sizes[i] * std::log2(sizes[i]) / (sizes[i - 1] * std::log2(sizes[i - 1])) : std::nan("");
            os << csv::num(sizes[i]) << ',' << steps << ',' << csv::num(t[i]) << ',' << csv::num(ratio) << ','
               << csv::num(model) << '\n';
        }
    });
    if (mc_compare) {
        // Stationary quadratic model to tau = 1: FCA at m = 2^13 against MC with N paths.
        const auto q = ModelSpec{validation::detail::stationary_quadratic()};
        auto t0 = std::chrono::steady_clock::now();
        propagate(q, Measure::objective, build_grid(-10.24, 8192), build_time_grid(1e-3, 1000));
        const double fca_s = seconds_since(t0);
        t0 = std::chrono::steady_clock::now();
        simulate(McConfig{q, Measure::objective, 1.0, 1e-3, mc_paths});
        const double mc_s = seconds_since(t0);
        std::printf("stationary quadratic tau=1: FCA %.2fs, MC(N=%zu) %.2fs, MC/FCA = %.2f\n", fca_s, mc_paths, mc_s, mc_s / fca_s);
        rc.manifest["fca_seconds"] = fca_s;
        rc.manifest["mc_seconds"] = mc_s;
        rc.manifest["mc_over_fca"] = mc_s / fca_s;
    }
}

// ---------------------------------------------------------------------------

fs::path output_root() {
    const char* env = std::getenv("FCA_OUTPUT_ROOT");
    return env && *env ? fs::path(env) : fs::path("fca_output");
}

json read_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw fca::IoError("cannot read config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    const auto text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("missing required field 'experiment'");
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
}

/// Runs one experiment; returns the process exit code.
int run_config(json cfg, const std::string& default_name, std::optional<std::uint64_t> seed,
               std::optional<std::string> output_override) {
    if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
    if (seed) {
        const auto kind = cfg.value("experiment", std::string());
        if (kind == "validate") cfg["validate"]["seed"] = *seed;
        else if (cfg.contains("mc")) cfg["mc"]["seed"] = *seed;
    }
    json resolved = json::object();
    Block root(cfg, resolved, "");
    const auto kind = root.get<std::string>("experiment");
    const auto name = root.get<std::string>("output", default_name);
    root.ignore("manifest");
    static const std::set<std::string> kinds = {"density", "joint-density", "price", "surface", "validate", "bench"};
    if (!kinds.count(kind)) throw ConfigError("field 'experiment' must be one of density, joint-density, price, surface, validate, bench");

    RunContext rc;
    rc.out_dir = output_override ? fs::path(*output_override) : output_root() / name;
    std::error_code ec;
    fs::create_directories(rc.out_dir, ec);
    if (ec) throw fca::IoError("cannot create output directory " + rc.out_dir.string() + ": " + ec.message());

    const auto t0 = std::chrono::steady_clock::now();
    if (kind == "density") run_density(root, rc);
    else if (kind == "joint-density") run_joint(root, rc);
    else if (kind == "price") run_price(root, rc);
    else if (kind == "surface") run_surface(root, rc);
    else if (kind == "validate") run_validate(root, rc);
    else run_bench(root, rc);
    root.finish();

    rc.manifest["version"] = kVersion;
    rc.manifest["libraries"] = {{"fftw", std::string(fftw_version)},
                                {"boost", std::string(BOOST_LIB_VERSION)},
                                {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                      std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                      std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
                                {"compiler", std::string(__VERSION__)}};
    rc.manifest["outputs"] = rc.files;
    rc.manifest["wall_seconds"] = seconds_since(t0);
    resolved["manifest"] = rc.manifest;
    rc.files.push_back("manifest.json");
    csv::write_file((rc.out_dir / "manifest.json").string(), [&](std::ostream& os) { os << resolved.dump(2) << '\n'; });
    std::printf("wrote %zu files to %s\n", rc.files.size(), rc.out_dir.string().c_str());
    return rc.validation_failed ? 1 : 0;
}

std::vector<double> parse_sizes(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("--sizes must be a comma-separated list of integers");
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fast convolution densities, option prices and validation"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;

    auto* run = app.add_subcommand("run", "Run the experiment described by a JSON config");
    std::string config_path;
    run->add_option("config", config_path, "Config file")->required();
    run->add_option("--seed", seed, "Override the Monte Carlo seed");
    run->add_option("--output", output, "Output directory (default: $FCA_OUTPUT_ROOT/<config output>)");

    auto* val = app.add_subcommand("validate", "Run the acceptance criteria");
    std::vector<int> only;
    std::size_t paths = 1'000'000, stationary_m = 8192;
    val->add_option("--only", only, "Criteria to run (1..11)")->delimiter(',');
    val->add_option("--paths", paths, "Monte Carlo paths");
    val->add_option("--stationary-m", stationary_m, "Grid size of criterion 1 (negative control: 64)");
    val->add_option("--seed", seed, "Monte Carlo seed");
    val->add_option("--output", output, "Output directory");

    auto* bench = app.add_subcommand("bench", "Time propagate against the m log m model");
    std::string sizes = "2048,4096,8192";
    std::size_t steps = 1000;
    bool mc_compare = false;
    bench->add_option("--sizes", sizes, "Comma-separated grid sizes");
    bench->add_option("--steps", steps, "Time steps per run");
    bench->add_flag("--mc", mc_compare, "Also time MC (N = 1e6) against FCA");
    bench->add_option("--output", output, "Output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            return run_config(read_config(config_path), fs::path(config_path).stem().string(), seed, output);
        }
        if (*val) {
            json cfg = {{"experiment", "validate"}, {"output", "validate"}};
            cfg["validate"]["mc_paths"] = paths;
            cfg["validate"]["stationary_m"] = stationary_m;
            if (!only.empty()) cfg["validate"]["only"] = only;
            return run_config(cfg, "validate", seed, output);
        }
        json cfg = {{"experiment", "bench"}, {"output", "bench"}};
        cfg["bench"]["sizes"] = parse_sizes(sizes);
        cfg["bench"]["steps"] = steps;
        cfg["bench"]["mc_compare"] = mc_compare;
        return run_config(cfg, "bench", std::nullopt, output);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const fca::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return 4;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
}
