// Command-line frontend: model checking, threshold analysis, deterministic
// integration, stochastic simulation, and the verification suite.
//
// Exit codes: 0 success, 1 scientific negative (hypothesis violated, no
// equilibrium, red verification), 2 usage/configuration error, 3 numerical
// failure.
#include <clocale>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metapop/bundled.hpp"
#include "metapop/io.hpp"
#include "metapop/verify.hpp"

namespace fs = std::filesystem;
using namespace metapop;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_negative = 1;
constexpr int exit_usage = 2;
constexpr int exit_numerical = 3;

struct CommonOptions {
    std::string model_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    double tol = 1e-8;
    double T = 50.0;
    std::int64_t N = 128;
    std::int64_t patches = 2000;
    std::string grid;
    bool quick = false;
    std::string init = "delta:1";
    std::string sweep_nu;
    bool dump_binary = false;
};

void add_common(CLI::App* cmd, CommonOptions& opt, bool model_required) {
    auto* model = cmd->add_option("--model", opt.model_path, "model specification file (JSON)");
    if (model_required) model->required();
    cmd->add_option("--out", opt.out_dir, "output directory");
    cmd->add_option("--seed", opt.seed, "RNG master seed");
    cmd->add_option("--tol", opt.tol, "tolerance for solves and reports");
    cmd->add_option("--T", opt.T, "time horizon");
    cmd->add_option("--N", opt.N, "truncation level");
    cmd->add_option("--patches", opt.patches, "patch count for simulation");
    cmd->add_option("--grid", opt.grid, "grid as a:b:step");
    cmd->add_flag("--quick", opt.quick, "reduced-effort variant");
    cmd->add_option("--init", opt.init, "initial condition: delta:K | uniform:K | equilibrium");
}

std::vector<double> parse_grid(const std::string& text) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw InvalidArgument("grid must have the form a:b:step");
    const double a = std::stod(text.substr(0, c1));
    const double b = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(text.substr(c2 + 1));
    if (!(step > 0.0) || b < a) throw InvalidArgument("grid needs step > 0 and b >= a");
    std::vector<double> grid;
    for (double v = a; v <= b + 1e-12 * (1.0 + std::fabs(b)); v += step) grid.push_back(v);
    return grid;
}

RateModel load_model(const CommonOptions& opt) {
    std::ifstream in(opt.model_path);
    if (!in) throw InvalidArgument("cannot open model file: " + opt.model_path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw InvalidModel(std::string("model file is not valid JSON: ") + e.what());
    }
    return model_from_json(j);
}

json config_json(const std::string& command, const CommonOptions& opt, const json& model) {
    return json{{"command", command}, {"model", model},     {"seed", opt.seed},
                {"tol", opt.tol},     {"T", opt.T},         {"N", opt.N},
                {"patches", opt.patches}, {"grid", opt.grid}, {"quick", opt.quick},
                {"init", opt.init}};
}

void stamp(json& j, const std::string& hash, std::uint64_t seed) {
    j["config_hash"] = hash;
    j["seed"] = seed;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out << text;
}

void emit_json(const CommonOptions& opt, const std::string& name, const json& j) {
    fs::create_directories(opt.out_dir);
    write_text(fs::path(opt.out_dir) / name, j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
}

void emit_csv(const CommonOptions& opt, const std::string& name, const std::string& hash,
              const std::string& body) {
    fs::create_directories(opt.out_dir);
    write_text(fs::path(opt.out_dir) / name,
               "# config=" + hash + " seed=" + std::to_string(opt.seed) + "\n" + body);
}

TruncatedState initial_state(const CommonOptions& opt, const RateModel& normalized) {
    const auto colon = opt.init.find(':');
    const std::string kind = opt.init.substr(0, colon);
    if (kind == "delta") {
        const std::int64_t k = colon == std::string::npos ? 1 : std::stoll(opt.init.substr(colon + 1));
        return delta_state(opt.N, k);
    }
    if (kind == "uniform") {
        const std::int64_t k = colon == std::string::npos ? 10 : std::stoll(opt.init.substr(colon + 1));
        return uniform_state(opt.N, k);
    }
    if (kind == "equilibrium") {
        const auto fixed = solve_fixed_point(normalized, std::min(opt.tol, 1e-8));
        if (fixed.s_star <= 0.0) return delta_state(opt.N, 0);
        const auto eq = stationary_distribution(chain_rates(normalized, fixed.s_star), 1e-12);
        return equilibrium_state(eq, opt.N);
    }
    throw InvalidArgument("unknown initial condition '" + opt.init + "'");
}

int cmd_check(const CommonOptions& opt) {
    const RateModel model = load_model(opt);
    const auto rep = check_hypotheses(model, std::max<std::int64_t>(10 * opt.N, 640));
    const json cfg = config_json("check", opt, model_to_json(model));
    const std::string hash = fnv1a_hex(cfg.dump());
    json j = to_json(rep);
    stamp(j, hash, opt.seed);
    emit_json(opt, "check.json", j);
    return rep.h1_holds && rep.h2_holds ? exit_ok : exit_negative;
}

int cmd_threshold(const CommonOptions& opt) {
    const RateModel model = normalize_rho(load_model(opt));
    const json cfg = config_json("threshold", opt, model_to_json(model));
    const std::string hash = fnv1a_hex(cfg.dump());

    const auto hyp = check_hypotheses(model, std::max<std::int64_t>(10 * opt.N, 640));
    if (!hyp.h1_holds) {
        json j = to_json(hyp);
        j["refusal"] = "concavity/convexity hypothesis fails; threshold theory does not apply";
        stamp(j, hash, opt.seed);
        emit_json(opt, "threshold.json", j);
        return exit_negative;
    }
    if (!hyp.h2_holds) {
        std::vector<double> grid =
            opt.grid.empty() ? std::vector<double>{0.5, 1.0, 2.0, 4.0} : parse_grid(opt.grid);
        const auto diag = no_equilibrium_when_h2_fails(model, grid, opt.tol);
        json j;
        j["refusal"] =
            "tail condition fails (margin <= 0): no nontrivial equilibrium exists; G(s) >= s on the grid";
        j["margin"] = hyp.margin;
        j["g_dominates_identity"] = diag.g_dominates_identity;
        j["min_ratio"] = diag.worst_ratio;
        json rows = json::array();
        for (std::size_t i = 0; i < diag.grid.size(); ++i)
            rows.push_back({{"s", diag.grid[i]}, {"G", diag.g_values[i]}});
        j["samples"] = rows;
        stamp(j, hash, opt.seed);
        emit_json(opt, "threshold.json", j);
        return exit_negative;
    }

    const auto rep = solve_fixed_point(model, opt.tol);
    json j = to_json(rep);
    stamp(j, hash, opt.seed);
    emit_json(opt, "threshold.json", j);

    std::vector<double> grid;
    if (opt.grid.empty()) {
        const double hi = 2.0 * std::max(rep.s_tilde, 1e-3);
        for (int i = 1; i <= 40; ++i) grid.push_back(hi * static_cast<double>(i) / 40.0);
    } else {
        grid = parse_grid(opt.grid);
    }
    std::vector<double> g_values;
    for (double s : grid) g_values.push_back(mean_G(model, s, std::min(opt.tol, 1e-10)));
    std::ostringstream csv;
    write_g_samples_csv(csv, grid, g_values);
    emit_csv(opt, "g_samples.csv", hash, csv.str());

    // equilibrium profile for plotting, when one exists
    if (rep.classification == Persistence::persistent) {
        const auto eq = stationary_distribution(chain_rates(model, rep.s_star), 1e-12);
        std::ostringstream eq_csv;
        write_distribution_csv(eq_csv, eq);
        emit_csv(opt, "equilibrium.csv", hash, eq_csv.str());
    }

    // spectral summary around the characteristic root
    std::vector<double> lambda_grid;
    const double lam_hi = rep.r0 > 1.0 ? 2.0 * std::max(0.1, rep.r0 - 1.0) : 1.0;
    for (int i = 0; i <= 12; ++i)
        lambda_grid.push_back(-alpha_estimate(model) / 2.0 +
                              (lam_hi + alpha_estimate(model) / 2.0) * static_cast<double>(i) / 12.0);
    const auto spectral = spectral_report(model, opt.tol, lambda_grid);
    json sj = to_json(spectral);
    stamp(sj, hash, opt.seed);
    fs::create_directories(opt.out_dir);
    write_text(fs::path(opt.out_dir) / "spectral.json", sj.dump(2) + "\n");
    std::ostringstream chi_csv;
    write_chi_samples_csv(chi_csv, spectral);
    emit_csv(opt, "chi_samples.csv", hash, chi_csv.str());
    return exit_ok;
}

int cmd_threshold_sweep(const CommonOptions& opt, const std::string& sweep_spec) {
    const RateModel base = normalize_rho(load_model(opt));
    const json cfg = config_json("threshold-sweep", opt, model_to_json(base));
    const std::string hash = fnv1a_hex(cfg.dump());
    const auto nus = parse_grid(sweep_spec);
    std::vector<SweepRow> rows;
    for (double nu : nus) {
        RateModel m = base;
        m.nu = nu;
        SweepRow row;
        row.param = nu;
        const auto rep = solve_fixed_point(m, opt.tol);
        row.r0 = rep.r0;
        row.s_star = rep.s_star;
        row.s_tilde = rep.s_tilde;
        row.classification = rep.classification;
        rows.push_back(row);
    }
    std::ostringstream csv;
    write_sweep_csv(csv, "nu", rows);
    emit_csv(opt, "sweep.csv", hash, csv.str());
    std::cout << "wrote " << rows.size() << " sweep rows\n";
    return exit_ok;
}

int cmd_integrate(const CommonOptions& opt) {
    const RateModel model = normalize_rho(load_model(opt));
    const json cfg = config_json("integrate", opt, model_to_json(model));
    const std::string hash = fnv1a_hex(cfg.dump());

    IntegrateControls ctl;
    if (!opt.grid.empty()) {
        const auto grid = parse_grid(opt.grid);
        ctl.dt_sample = grid.size() > 1 ? grid[1] - grid[0] : std::max(opt.T / 200.0, 1e-3);
    } else {
        ctl.dt_sample = std::max(opt.T / 200.0, 1e-3);
    }
    ctl.top_occupancy_limit = 1e-4;  // reject under-truncated configurations
    const TruncatedState p0 = initial_state(opt, model);
    const Trajectory traj = integrate(model, p0, opt.T, ctl);

    std::ostringstream csv;
    write_trajectory_csv(csv, traj);
    emit_csv(opt, "trajectory.csv", hash, csv.str());
    if (opt.dump_binary) {
        std::ofstream bin(fs::path(opt.out_dir) / "trajectory.bin", std::ios::binary);
        if (!bin) throw InvalidArgument("cannot write trajectory.bin");
        write_trajectory_binary(bin, traj);
    }

    // convergence report against the predicted limit profile
    const auto fixed = solve_fixed_point(model, std::min(opt.tol, 1e-8));
    std::vector<double> target{1.0};
    if (fixed.classification == Persistence::persistent)
        target = stationary_distribution(chain_rates(model, fixed.s_star), 1e-12).pi;
    const auto series = convergence_diagnose(traj, target);

    json j;
    j["target"] = fixed.classification == Persistence::persistent ? "equilibrium" : "extinction";
    j["s_star"] = fixed.s_star;
    j["final_distance"] = series.final_distance;
    j["tail_nonincreasing"] = series.tail_nonincreasing;
    j["T"] = opt.T;
    j["final_s"] = traj.samples.back().s;
    j["max_mass_defect"] = traj.max_mass_defect;
    j["steps"] = traj.steps;
    stamp(j, hash, opt.seed);
    emit_json(opt, "convergence.json", j);
    return exit_ok;
}

int cmd_simulate(const CommonOptions& opt) {
    const RateModel raw = load_model(opt);
    if (opt.patches < 2) throw InvalidArgument("need at least two patches");
    const json cfg = config_json("simulate", opt, model_to_json(raw));
    const std::string hash = fnv1a_hex(cfg.dump());

    std::vector<double> grid;
    if (opt.grid.empty()) {
        for (int i = 1; i <= 10; ++i) grid.push_back(opt.T * static_cast<double>(i) / 10.0);
    } else {
        grid = parse_grid(opt.grid);
    }

    const auto colon = opt.init.find(':');
    const std::int64_t at =
        opt.init.rfind("delta", 0) == 0 && colon != std::string::npos
            ? std::stoll(opt.init.substr(colon + 1))
            : 1;
    std::vector<std::int64_t> hist(static_cast<std::size_t>(at) + 1, 0);
    hist.back() = opt.patches;

    const auto run = simulate_metapopulation(raw, opt.patches, hist, opt.T, opt.seed, grid, 50);
    std::ostringstream csv;
    write_empirical_csv(csv, run);
    emit_csv(opt, "empirical.csv", hash, csv.str());

    // deterministic limit for comparison
    const RateModel normalized = normalize_rho(raw);
    IntegrateControls ctl;
    ctl.dt_sample = grid.front();
    for (std::size_t i = 1; i < grid.size(); ++i)
        ctl.dt_sample = std::min(ctl.dt_sample, grid[i] - grid[i - 1]);
    const Trajectory traj = integrate(normalized, delta_state(opt.N, at), opt.T, ctl);

    json rows = json::array();
    double worst_z = 0.0;
    for (std::size_t k = 0; k < run.times.size(); ++k) {
        std::size_t idx = 0;
        for (std::size_t q = 0; q < traj.samples.size(); ++q)
            if (std::fabs(traj.samples[q].t - run.times[k]) < 1e-9) idx = q;
        for (std::size_t i = 0; i <= 10 && i < traj.samples[idx].p.size(); ++i) {
            const double p = traj.samples[idx].p[i];
            const double se =
                std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(opt.patches));
            const double z = (run.freq[k][i] - p) / se;
            worst_z = std::max(worst_z, std::fabs(z));
            rows.push_back({{"t", run.times[k]}, {"i", i}, {"empirical", run.freq[k][i]},
                            {"ode", p}, {"z", z}});
        }
    }
    json j;
    j["counters"] = to_json(run.counters);
    j["events"] = run.events;
    j["max_abs_z"] = worst_z;
    j["comparison"] = rows;
    stamp(j, hash, opt.seed);
    emit_json(opt, "simulation.json", j);
    return exit_ok;
}

int cmd_verify(const CommonOptions& opt) {
    verify::VerifyOptions vopt;
    vopt.quick = opt.quick;
    vopt.seed = opt.seed;
    json model_echo = nullptr;
    if (!opt.model_path.empty()) {
        const RateModel m = normalize_rho(load_model(opt));
        vopt.model_override = m;
        model_echo = model_to_json(m);
    }
    const json cfg = config_json("verify", opt, model_echo);
    const std::string hash = fnv1a_hex(cfg.dump());

    const auto results = verify::run_all(vopt);
    json rows = json::array();
    bool all_green = true;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& res = results[i];
        std::printf("[%s] %2zu  %-55s (%.2fs)  %s\n", res.pass ? "PASS" : "FAIL", i + 1,
                    res.name.c_str(), res.seconds, res.detail.c_str());
        rows.push_back({{"index", i + 1}, {"name", res.name}, {"pass", res.pass},
                        {"seconds", res.seconds}, {"detail", res.detail}});
        all_green = all_green && res.pass;
    }
    json j;
    j["checks"] = rows;
    j["all_green"] = all_green;
    j["quick"] = opt.quick;
    stamp(j, hash, opt.seed);
    fs::create_directories(opt.out_dir);
    write_text(fs::path(opt.out_dir) / "verify.json", j.dump(2) + "\n");
    return all_green ? exit_ok : exit_negative;
}

}  // namespace

int main(int argc, char** argv) {
    std::setlocale(LC_NUMERIC, "C");
    CLI::App app{"metapopulation persistence toolkit"};
    app.require_subcommand(1);

    CommonOptions opt;
    auto* check = app.add_subcommand("check", "validate the model hypotheses");
    add_common(check, opt, true);
    auto* threshold = app.add_subcommand("threshold", "reproduction number and fixed point");
    add_common(threshold, opt, true);
    threshold->add_option("--sweep-nu", opt.sweep_nu,
                          "sweep the catastrophe rate over a:b:step and write sweep.csv");
    auto* integrate_cmd = app.add_subcommand("integrate", "truncated deterministic dynamics");
    add_common(integrate_cmd, opt, true);
    integrate_cmd->add_flag("--dump-binary", opt.dump_binary, "also write the full-state binary dump");
    auto* simulate = app.add_subcommand("simulate", "finite stochastic metapopulation");
    add_common(simulate, opt, true);
    auto* verify_cmd = app.add_subcommand("verify", "run the verification suite");
    add_common(verify_cmd, opt, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (check->parsed()) return cmd_check(opt);
        if (threshold->parsed())
            return opt.sweep_nu.empty() ? cmd_threshold(opt) : cmd_threshold_sweep(opt, opt.sweep_nu);
        if (integrate_cmd->parsed()) return cmd_integrate(opt);
        if (simulate->parsed()) return cmd_simulate(opt);
        if (verify_cmd->parsed()) return cmd_verify(opt);
        return exit_usage;
    } catch (const InvalidArgument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return exit_usage;
    } catch (const InvalidModel& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return exit_usage;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_numerical;
    }
}
