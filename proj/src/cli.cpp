#include "cpsguard/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cpsguard/errors.hpp"

namespace cpsguard {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json to_json(const Mat& m) {
    json rows = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat mat_from_json(const json& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.at(0).size() : 0;
    Mat m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (rows.at(i).size() != c) throw ConfigError("ragged matrix in certificates file");
        for (std::size_t j = 0; j < c; ++j) m(i, j) = rows.at(i).at(j).get<double>();
    }
    return m;
}

// Non-finite values become null in JSON; keep them readable instead.
json number(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
}

fs::path out_path(const RunConfig& c, const std::string& file) { return fs::path(c.out_dir) / file; }

void write_file(const fs::path& path, const std::string& content) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << content;
}

std::string csv(double v) { return format_double(v); }

void margins_line(std::ostream& out, const CertificateReport& r) {
    out << "margins: rate " << csv(r.rate_margin) << ", attack " << csv(r.attack_margin) << ", invariance "
        << csv(r.invariance_margin) << '\n';
}

} // namespace

RunConfig resolve_config(const CliRequest& req) {
    RunConfig c = req.config_path ? load_config(*req.config_path) : RunConfig{};
    if (req.out_dir) c.out_dir = *req.out_dir;
    if (req.seed) c.seed = *req.seed;
    if (req.trials) c.trials = *req.trials;
    if (req.horizon) c.horizon = *req.horizon;
    c.validate();
    return c;
}

std::string provenance_header(const Analysis& a) {
    return std::string("# ") + kToolName + ' ' + kToolVersion + " config=" + a.hash +
           " seed=" + std::to_string(a.config.seed);
}

std::string certificates_json(const Analysis& a) {
    const auto& L = a.loop;
    const auto& C = a.certs;
    json j;
    j["schema_version"] = kSchemaVersion;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["config_hash"] = a.hash;
    j["seed"] = a.config.seed;
    j["plant"] = {{"n", L.model.n()}, {"m", L.model.m()}, {"l", L.model.l()},
                  {"A", to_json(L.model.A)}, {"B", to_json(L.model.B)}, {"C", to_json(L.model.C)},
                  {"Q", to_json(L.model.Q)}, {"R", to_json(L.model.R)}, {"U", to_json(L.model.U)},
                  {"K", to_json(L.design.K)}, {"L", to_json(L.design.L)}, {"Sigma", to_json(L.design.Sigma)}};
    j["stealth"] = {{"window", L.detector.window}, {"dof", L.detector.dof()}, {"false_alarm", L.detector.false_alarm},
                    {"eta", L.detector.eta}, {"p_d", L.budget.p_d}, {"lambda_bar", L.budget.lambda_bar}};
    j["lmi"] = {{"gamma", C.rate.gamma},
                {"gamma_a", C.rate.gamma_a},
                {"alpha1", C.rate.alpha1},
                {"alpha2", C.inv.alpha2},
                {"alpha3", C.rate.alpha3},
                {"p", C.inv.p},
                {"p1_scale", C.p1_scale},
                {"p1_scale_auto", a.config.p1_scale_auto},
                {"p2_method", a.config.lmi.p2_method == P2Method::MaxDet ? "maxdet" : "scaling"},
                {"omega", {a.config.lmi.omega1, a.config.lmi.omega2, a.config.lmi.omega3}},
                {"P1", to_json(C.rate.P1)},
                {"P2", to_json(C.inv.P2)}};
    j["margins"] = {{"rate", C.report.rate_margin},
                    {"attack", C.report.attack_margin},
                    {"invariance", C.report.invariance_margin},
                    {"p1_min_eig", C.report.p1_min_eig},
                    {"p2_min_eig", C.report.p2_min_eig},
                    {"scalars_ok", C.report.scalars_ok},
                    {"accepted", C.report.accepted},
                    {"tolerance", CertificateReport::kTolerance}};
    json scan = json::array();
    for (const auto& s : C.scale_scan) {
        scan.push_back({{"scale", s.scale}, {"feasible", s.feasible}, {"gamma_a", s.gamma_a}, {"ta_bound", s.ta_bound}});
    }
    j["p1_scale_scan"] = std::move(scan);
    j["initial_condition_ok"] = initial_condition_ok(a);
    return j.dump(2) + "\n";
}

Analysis load_or_analyze(const RunConfig& config, bool fresh, bool* reused) {
    if (reused) *reused = false;
    const fs::path cache = out_path(config, "certificates.json");
    const std::string hash = config_hash(config);
    if (!fresh && fs::exists(cache)) {
        try {
            std::ifstream f(cache);
            const json j = json::parse(f);
            if (j.at("schema_version") == kSchemaVersion && j.at("version") == kToolVersion &&
                j.at("config_hash") == hash) {
                Analysis a;
                a.config = config;
                a.hash = hash;
                a.loop = build_loop(config);
                const json& l = j.at("lmi");
                a.certs.rate = {mat_from_json(l.at("P1")), l.at("gamma").get<double>(), l.at("gamma_a").get<double>(),
                                l.at("alpha1").get<double>(), l.at("alpha3").get<double>()};
                a.certs.inv = {mat_from_json(l.at("P2")), l.at("alpha2").get<double>(), l.at("p").get<double>()};
                a.certs.p1_scale = l.at("p1_scale").get<double>();
                for (const auto& s : j.at("p1_scale_scan")) {
                    a.certs.scale_scan.push_back({s.at("scale").get<double>(), s.at("feasible").get<bool>(),
                                                  s.at("gamma_a").get<double>(), s.at("ta_bound").get<double>()});
                }
                a.certs.report = check_certificates(a.loop.aug, {a.loop.model.U, a.loop.design.Sigma,
                                                                 a.loop.budget.lambda_bar},
                                                    a.certs.rate, a.certs.inv);
                if (a.certs.report.accepted) {
                    if (reused) *reused = true;
                    return a;
                }
            }
        } catch (const json::exception&) {
            // Unreadable cache: fall through and synthesize.
        }
    }
    Analysis a = analyze(config);
    if (!a.certs.report.accepted) {
        const auto& r = a.certs.report;
        throw NumericalError("lmi: certificate verification failed (rate margin " + csv(r.rate_margin) +
                             ", attack margin " + csv(r.attack_margin) + ", invariance margin " +
                             csv(r.invariance_margin) + ")");
    }
    return a;
}

void write_bound_csv(std::ostream& os, const Analysis& a) {
    const auto bound = bound_curve(a.certs.rate, a.certs.inv, a.loop.spec, a.config.horizon);
    os << provenance_header(a) << '\n' << "k,max_ta,percentage";
    for (const auto& s : a.config.schedules) os << ",tau_" << s.name << ",safe_" << s.name;
    os << '\n';
    for (std::size_t k = 0; k < bound.size(); ++k) {
        os << k << ',' << bound[k] << ',';
        if (k > 0) os << csv(static_cast<double>(bound[k]) / static_cast<double>(k));
        for (const auto& s : a.config.schedules) {
            const std::size_t tau = schedule_tau(s, k);
            os << ',' << tau << ',' << (tau <= bound[k] ? 1 : 0);
        }
        os << '\n';
    }
}

void write_sweep_csv(std::ostream& os, const Analysis& a, const std::string& axis) {
    std::vector<SweepPoint> pts;
    std::string column;
    if (axis == "Ta" || axis == "ta") {
        pts = sweep_ta(a.certs.rate, a.config.sweep_k);
        column = "ta";
    } else if (axis == "k") {
        pts = sweep_k(a.certs.rate, a.config.sweep_ta, a.config.sweep_k_max);
        column = "k";
    } else if (axis == "percentage") {
        pts = sweep_percentage(a.certs.rate, a.config.sweep_k);
        column = "percentage";
    } else if (axis == "p") {
        pts = sweep_p(a.certs.inv, a.config.sweep_p);
        column = "p";
    } else {
        throw ConfigError("unknown sweep axis '" + axis + "' (expected Ta, k, percentage or p)");
    }
    os << provenance_header(a) << '\n' << column << ",log_volume\n";
    for (const auto& p : pts) os << csv(p.x) << ',' << csv(p.log_volume) << '\n';
}

std::string simulation_json(const Analysis& a, const MonteCarloReport& r, const std::string& schedule) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["tool"] = kToolName;
    j["version"] = kToolVersion;
    j["config_hash"] = a.hash;
    j["seed"] = r.seed;
    j["trials"] = r.trials;
    j["horizon"] = r.horizon;
    j["attack"] = a.config.attack == AttackChoice::None ? "none"
                  : a.config.attack == AttackChoice::Covert ? "covert" : "budget";
    j["schedule"] = schedule;
    j["valid_trials"] = r.valid_trials;
    j["diverged_trials"] = r.diverged_trials;
    j["windows"] = r.windows;
    j["alarms"] = r.alarms;
    j["alarm_rate"] = number(r.alarm_rate);
    j["alarm_rate_se"] = number(r.alarm_rate_se);
    j["violation_trials"] = r.violation_trials;
    j["violation_rate"] = number(r.violation_rate);
    j["violation_rate_se"] = number(r.violation_rate_se);
    j["max_stat"] = number(r.max_stat);
    j["max_state_deviation"] = number(r.max_state_deviation);
    j["max_ratio"] = number(r.max_ratio);
    j["max_input_level"] = number(r.max_input_level);
    j["attack_steps"] = r.attack_steps;
    j["e2_samples"] = r.e2_samples;
    j["e2_outside"] = r.e2_outside;
    j["e2_outside_rate"] = number(r.e2_outside_rate);
    j["e2_outside_se"] = number(r.e2_outside_se);
    j["eta"] = a.loop.detector.eta;
    j["lambda_bar"] = a.loop.budget.lambda_bar;
    return j.dump(2) + "\n";
}

void write_simulation_csv(std::ostream& os, const Analysis& a, const MonteCarloReport& r) {
    os << provenance_header(a) << '\n' << "metric,value\n";
    auto row = [&](const char* k, double v) { os << k << ',' << csv(v) << '\n'; };
    auto cnt = [&](const char* k, std::size_t v) { os << k << ',' << v << '\n'; };
    cnt("trials", r.trials);
    cnt("horizon", r.horizon);
    cnt("valid_trials", r.valid_trials);
    cnt("diverged_trials", r.diverged_trials);
    cnt("windows", r.windows);
    cnt("alarms", r.alarms);
    row("alarm_rate", r.alarm_rate);
    row("alarm_rate_se", r.alarm_rate_se);
    cnt("violation_trials", r.violation_trials);
    row("violation_rate", r.violation_rate);
    row("violation_rate_se", r.violation_rate_se);
    row("max_stat", r.max_stat);
    row("max_state_deviation", r.max_state_deviation);
    row("max_input_level", r.max_input_level);
    cnt("attack_steps", r.attack_steps);
    row("e2_outside_rate", r.e2_outside_rate);
    row("e2_outside_se", r.e2_outside_se);
}

int cmd_synthesize(const CliRequest& req, std::ostream& out) {
    const RunConfig config = resolve_config(req);
    const Analysis a = load_or_analyze(config, true);
    const fs::path path = out_path(config, "certificates.json");
    write_file(path, certificates_json(a));
    out << "eta " << csv(a.loop.detector.eta) << ", lambda_bar " << csv(a.loop.budget.lambda_bar) << '\n';
    out << "P1 scale " << csv(a.certs.p1_scale) << ", gamma " << csv(a.certs.rate.gamma) << ", gamma_a "
        << csv(a.certs.rate.gamma_a) << ", alpha1 " << csv(a.certs.rate.alpha1) << ", alpha2 "
        << csv(a.certs.inv.alpha2) << ", alpha3 " << csv(a.certs.rate.alpha3) << '\n';
    margins_line(out, a.certs.report);
    if (!initial_condition_ok(a)) out << "warning: initial condition lies outside E1(0,0) + E2(p)\n";
    out << "wrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_bound(const CliRequest& req, std::ostream& out) {
    const RunConfig config = resolve_config(req);
    const Analysis a = load_or_analyze(config, req.fresh);
    std::ostringstream body;
    write_bound_csv(body, a);
    const fs::path path = out_path(config, "bound.csv");
    write_file(path, body.str());
    const auto bound = bound_curve(a.certs.rate, a.certs.inv, a.loop.spec, config.horizon);
    out << "max_ta(" << config.horizon << ") = " << bound.back() << '\n';
    for (const auto& s : config.schedules) {
        const ScheduleVerdict v = schedule_verdict(s, bound);
        out << "schedule " << s.name << " (" << s.pattern_string() << "): " << (v.safe ? "safe" : "unsafe") << '\n';
    }
    out << "wrote " << path.string() << '\n';
    return kExitOk;
}

int cmd_simulate(const CliRequest& req, std::ostream& out) {
    const RunConfig config = resolve_config(req);
    const Analysis a = load_or_analyze(config, req.fresh);
    if (!initial_condition_ok(a)) out << "warning: initial condition lies outside E1(0,0) + E2(p)\n";
    const auto bound = bound_curve(a.certs.rate, a.certs.inv, a.loop.spec, config.horizon);
    const std::vector<bool> mask = saturating_mask(bound);
    std::string schedule;
    for (bool b : mask) schedule.push_back(b ? 'T' : 'F');

    std::vector<TrialResult> trials;
    const MonteCarloReport rep = run_monte_carlo(make_sim_setup(a), make_strategy(a), mask, config.horizon,
                                                 config.trials, config.seed,
                                                 config.trajectories ? &trials : nullptr, config.threads);
    write_file(out_path(config, "simulation.json"), simulation_json(a, rep, schedule));
    std::ostringstream summary;
    write_simulation_csv(summary, a, rep);
    write_file(out_path(config, "simulation.csv"), summary.str());
    if (config.trajectories) {
        std::ostringstream traj;
        traj << provenance_header(a) << '\n';
        write_trajectories_csv(traj, trials);
        write_file(out_path(config, "trajectories.csv"), traj.str());
    }
    out << rep.trials << " trials x " << rep.horizon << " steps, " << rep.attack_steps << " attacked steps\n";
    out << "alarm rate " << csv(rep.alarm_rate) << " (se " << csv(rep.alarm_rate_se) << ")\n";
    out << "violations " << rep.violation_trials << " of " << rep.valid_trials << " valid trials, max |c^T x| "
        << csv(rep.max_state_deviation) << '\n';
    if (rep.diverged_trials) out << "diverged trials " << rep.diverged_trials << '\n';
    out << "wrote " << out_path(config, "simulation.json").string() << '\n';
    return kExitOk;
}

int cmd_sweep(const CliRequest& req, std::ostream& out) {
    const RunConfig config = resolve_config(req);
    if (req.axis != "Ta" && req.axis != "ta" && req.axis != "k" && req.axis != "percentage" && req.axis != "p") {
        throw ConfigError("unknown sweep axis '" + req.axis + "' (expected Ta, k, percentage or p)");
    }
    const Analysis a = load_or_analyze(config, req.fresh);
    std::ostringstream body;
    write_sweep_csv(body, a, req.axis);
    const std::string name = req.axis == "ta" ? "Ta" : req.axis;
    const fs::path path = out_path(config, "sweep_" + name + ".csv");
    write_file(path, body.str());
    out << "wrote " << path.string() << '\n';
    return kExitOk;
}

int run_command(const CliRequest& req, std::ostream& out, std::ostream& err) {
    try {
        if (req.command == "synthesize") return cmd_synthesize(req, out);
        if (req.command == "bound") return cmd_bound(req, out);
        if (req.command == "simulate") return cmd_simulate(req, out);
        if (req.command == "sweep") return cmd_sweep(req, out);
        err << "error: unknown command '" << req.command << "'\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InfeasibleError& e) {
        err << "infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Safe attack-time analysis for LQG loops under stealthy attacks"};
    app.require_subcommand(1, 1);
    CliRequest req;
    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    std::size_t trials = 0, horizon = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "Config file (built-in tank defaults if omitted)")
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "Output directory");
        sub->add_option("--seed", seed, "Monte-Carlo seed");
        sub->add_option("--trials", trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
        sub->add_option("--horizon", horizon, "Horizon in steps")->check(CLI::PositiveNumber);
        sub->add_flag("--fresh", req.fresh, "Ignore cached certificates");
    };
    add_common(app.add_subcommand("synthesize", "Synthesize and verify certificates"));
    add_common(app.add_subcommand("bound", "Safe attack-time bound and schedule verdicts"));
    add_common(app.add_subcommand("simulate", "Monte-Carlo validation under the bound-saturating schedule"));
    CLI::App* sweep = app.add_subcommand("sweep", "Ellipsoid log-volume curves");
    add_common(sweep);
    sweep->add_option("--axis", req.axis, "Ta, k, percentage or p")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }
    for (const auto* sub : app.get_subcommands()) req.command = sub->get_name();
    const CLI::App* sub = app.get_subcommand(req.command);
    if (sub->count("--config")) req.config_path = config_path;
    if (sub->count("--out")) req.out_dir = out_dir;
    if (sub->count("--seed")) req.seed = seed;
    if (sub->count("--trials")) req.trials = trials;
    if (sub->count("--horizon")) req.horizon = horizon;
    return run_command(req, std::cout, std::cerr);
}

} // namespace cpsguard
