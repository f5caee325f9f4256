// Command-line front-end: wires models, solvers and reports together.
//
// Exit codes: 0 success, 1 error, 2 condition-check failure (the checks ran
// and the mathematically meaningful answer is "no").

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mfglq/csv.hpp"
#include "mfglq/emfg.hpp"
#include "mfglq/emftc.hpp"
#include "mfglq/grid_problem.hpp"
#include "mfglq/model.hpp"
#include "mfglq/nash.hpp"
#include "mfglq/spectral.hpp"

namespace fs = std::filesystem;
using namespace mfglq;

namespace {

struct RunConfig {
    std::string command;
    std::string model_path;
    int steps = 2000;
    uint64_t seed = 0;
    int n_paths = 10000;
    std::vector<int> Ns{4, 16, 64, 256};
    std::string out = "out";
    double tol = 0.0;   // optional override, recorded in the manifest
    double T_override = 0.0;
    double tmin = 0.29, tmax = 0.32;
    int points = 31;
    int n_mc = 500;
};

void write_manifest(const RunConfig& cfg, const std::vector<std::string>& outputs) {
    fs::create_directories(cfg.out);
    nlohmann::json j;
    j["command"] = cfg.command;
    if (!cfg.model_path.empty()) j["model"] = cfg.model_path;
    j["steps"] = cfg.steps;
    j["seed"] = cfg.seed;
    j["paths"] = cfg.n_paths;
    j["N"] = cfg.Ns;
    j["out"] = cfg.out;
    if (cfg.tol > 0.0) j["tol"] = cfg.tol;
    if (cfg.T_override > 0.0) j["T"] = cfg.T_override;
    j["tmin"] = cfg.tmin;
    j["tmax"] = cfg.tmax;
    j["points"] = cfg.points;
    j["n_mc"] = cfg.n_mc;
    j["outputs"] = outputs;
    j["version"] = "mfglq 1.0";
    std::ofstream((fs::path(cfg.out) / "manifest.json")) << j.dump(2) << "\n";
}

EMFGModel load_emfg_with_T(const RunConfig& cfg) {
    EMFGModel model = load_emfg_model(cfg.model_path);
    if (cfg.T_override > 0.0) model.T = cfg.T_override;
    return model;
}

int cmd_check(const RunConfig& cfg) {
    auto loaded = load_model(cfg.model_path);
    std::vector<ConditionReport> reports;
    bool certified = false;
    if (auto* emfg = std::get_if<EMFGModel>(&loaded)) {
        EMFGModel model = *emfg;
        if (cfg.T_override > 0.0) model.T = cfg.T_override;
        TimeGrid grid(model.T, cfg.steps);
        reports.push_back(validate_convexity(model, grid));
        const bool convex = reports.back().holds;
        reports.push_back(check_small_time(model, grid));
        certified |= convex && reports.back().holds;
        reports.push_back(check_refined(model, grid, model.T));
        certified |= convex && reports.back().applicable && reports.back().holds;
        const KConstants K = compute_K(model, grid);
        reports.push_back(check_global(K));
        certified |= convex && reports.back().holds;
        reports.push_back(check_weyl(model, grid));
    } else {
        EMFTCModel model = std::get<EMFTCModel>(loaded);
        if (cfg.T_override > 0.0) model.T = cfg.T_override;
        TimeGrid grid(model.T, cfg.steps);
        reports.push_back(check_mftc_conditions(model, grid));
        certified = reports.back().holds;
    }
    std::cout << format_report_table(reports);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : reports) j.push_back(r.to_json());
    fs::create_directories(cfg.out);
    std::ofstream(fs::path(cfg.out) / "check.json") << j.dump(2) << "\n";
    write_manifest(cfg, {"check.json"});
    std::cout << (certified ? "certified solvable\n" : "no sufficient condition holds\n");
    return certified ? 0 : 2;
}

int cmd_solve_emfg(const RunConfig& cfg) {
    EMFGModel model = load_emfg_with_T(cfg);
    TimeGrid grid(model.T, cfg.steps);
    FBODESolution fbode = solve_mean_field(model, grid, MeanFieldMethod::gamma);
    RiccatiSolution xi = solve_xi(model, grid);
    if (!xi.ok()) throw std::runtime_error("Xi Riccati blow-up: convexity inputs violated");
    EquilibriumFeedback fb = build_feedback(model, xi, fbode);
    fs::create_directories(cfg.out);
    export_fbode_csv(fbode, (fs::path(cfg.out) / "fbode.csv").string());
    export_feedback_csv(fb, (fs::path(cfg.out) / "feedback.csv").string());
    export_riccati_csv(xi, "Xi", (fs::path(cfg.out) / "xi.csv").string());
    write_manifest(cfg, {"fbode.csv", "feedback.csv", "xi.csv"});
    std::cout << "terminal residual " << fbode.terminal_residual << "\n";
    return 0;
}

int cmd_solve_emftc(const RunConfig& cfg) {
    EMFTCModel model = load_emftc_model(cfg.model_path);
    if (cfg.T_override > 0.0) model.T = cfg.T_override;
    TimeGrid grid(model.T, cfg.steps);
    ConditionReport cond = check_mftc_conditions(model, grid);
    std::cout << format_report_table({cond});
    if (!cond.holds) return 2;
    MFTCSolution sol = solve_mftc(model, grid);
    fs::create_directories(cfg.out);
    export_mftc_csv(sol, (fs::path(cfg.out) / "mftc.csv").string());
    GateauxReport gx = gateaux_test(model, sol, 5, {0.05, 0.1, 0.2},
                                    std::max(100, cfg.n_paths / 5), cfg.seed);
    std::ofstream(fs::path(cfg.out) / "gateaux.json") << gx.to_json().dump(2) << "\n";
    write_manifest(cfg, {"mftc.csv", "gateaux.json"});
    std::cout << "terminal residual " << sol.terminal_residual << ", ansatz residual "
              << sol.ansatz_residual << "\n";
    return 0;
}

int cmd_simulate(const RunConfig& cfg) {
    EMFGModel model = load_emfg_with_T(cfg);
    TimeGrid grid(model.T, cfg.steps);
    FBODESolution fbode = solve_mean_field(model, grid, MeanFieldMethod::gamma);
    RiccatiSolution xi = solve_xi(model, grid);
    if (!xi.ok()) throw std::runtime_error("Xi Riccati blow-up: convexity inputs violated");
    EquilibriumFeedback fb = build_feedback(model, xi, fbode);
    SimulationResult sim = simulate_representative(model, fb, cfg.n_paths, cfg.seed);
    fs::create_directories(cfg.out);
    CsvWriter csv((fs::path(cfg.out) / "simulation.csv").string());
    std::vector<std::string> names{"t"};
    for (int i = 0; i < model.n; ++i) names.push_back("mean_" + std::to_string(i));
    for (int i = 0; i < model.n; ++i) names.push_back("stderr_" + std::to_string(i));
    for (int i = 0; i < model.n; ++i) names.push_back("xi_" + std::to_string(i));
    csv.header(names);
    for (int k = 0; k < grid.n_nodes(); ++k) {
        std::vector<double> row{grid.node(k)};
        for (int i = 0; i < model.n; ++i) row.push_back(sim.mean[k](i));
        for (int i = 0; i < model.n; ++i) row.push_back(sim.std_error[k](i));
        for (int i = 0; i < model.n; ++i) row.push_back(fbode.xi[k](i));
        csv.row(row);
    }
    write_manifest(cfg, {"simulation.csv"});
    std::cout << "fixed-point residual " << sim.fixed_point_residual << "\n";
    return 0;
}

int cmd_nash(const RunConfig& cfg) {
    EMFGModel model = load_emfg_with_T(cfg);
    TimeGrid grid(model.T, cfg.steps);
    const KConstants K = compute_K(model, grid);
    if (!check_global(K).holds) {
        std::cout << "T3.4 does not hold; epsilon-Nash constants undefined\n";
        return 2;
    }
    FBODESolution fbode = solve_mean_field(model, grid, MeanFieldMethod::gamma);
    RiccatiSolution xi = solve_xi(model, grid);
    EquilibriumFeedback fb = build_feedback(model, xi, fbode);
    NashExperiment exp;
    exp.Ns = cfg.Ns;
    exp.n_mc = cfg.n_mc;
    exp.seed = cfg.seed;
    RateReport report = epsilon_nash_estimate(model, fb, exp);
    fs::create_directories(cfg.out);
    export_nash_csv(report, (fs::path(cfg.out) / "nash.csv").string());
    std::ofstream(fs::path(cfg.out) / "nash.json") << report.to_json().dump(2) << "\n";
    std::ofstream(fs::path(cfg.out) / "constants.json")
        << theoretical_constants(model, grid).to_json().dump(2) << "\n";
    write_manifest(cfg, {"nash.csv", "nash.json", "constants.json"});
    std::cout << "state slope " << report.state_slope << ", gap slope " << report.gap_slope
              << "\n";
    return 0;
}

int cmd_counterexample(const RunConfig& cfg) {
    CounterexampleScan scan = counterexample_scan(cfg.tmin, cfg.tmax, cfg.points, cfg.steps);
    fs::create_directories(cfg.out);
    export_scan_csv(scan, (fs::path(cfg.out) / "scan.csv").string());
    write_manifest(cfg, {"scan.csv"});
    for (const auto& [lo, hi] : scan.phi1_sign_changes)
        std::cout << "Phi1 sign change bracketed in [" << lo << ", " << hi << "]\n";
    if (scan.phi1_sign_changes.empty()) std::cout << "no Phi1 sign change in range\n";
    return 0;
}

int cmd_grid(const RunConfig& cfg) {
    GridParams params =
        cfg.model_path.empty() ? GridParams{} : GridParams::load(cfg.model_path);
    TimeGrid grid(params.T, cfg.steps);
    GridCoefficients coeffs = solve_grid_coefficients(params, grid);
    GridSimulation sim = simulate_grid(params, coeffs, cfg.n_paths, cfg.seed, 64, 8);
    fs::create_directories(cfg.out);
    export_grid_coeffs_csv(coeffs, (fs::path(cfg.out) / "grid_coeffs.csv").string());
    export_grid_paths_csv(sim, (fs::path(cfg.out) / "grid_paths.csv").string());
    write_manifest(cfg, {"grid_coeffs.csv", "grid_paths.csv"});
    std::cout << "coefficient residual " << coeffs.residual_sup << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"linear-quadratic extended mean field game / control solver"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto add_common = [&](CLI::App* sub, bool needs_model) {
        if (needs_model)
            sub->add_option("--model", cfg.model_path, "model JSON file")->required();
        else
            sub->add_option("--model", cfg.model_path, "model JSON file");
        sub->add_option("--steps", cfg.steps, "grid steps (default 2000)");
        sub->add_option("--seed", cfg.seed, "RNG seed (default 0)");
        sub->add_option("--paths", cfg.n_paths, "Monte Carlo paths (default 10000)");
        sub->add_option("--N", cfg.Ns, "player counts (comma list)")->delimiter(',');
        sub->add_option("--out", cfg.out, "output directory (default ./out)");
        sub->add_option("--tol", cfg.tol, "tolerance override (recorded)");
        sub->add_option("--T", cfg.T_override, "horizon override");
    };

    auto* check = app.add_subcommand("check", "run the solvability condition checks");
    add_common(check, true);
    auto* solve_emfg = app.add_subcommand("solve-emfg", "solve the mean-field equilibrium");
    add_common(solve_emfg, true);
    auto* solve_emftc = app.add_subcommand("solve-emftc", "solve the mean-field-type control");
    add_common(solve_emftc, true);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo of the representative agent");
    add_common(simulate, true);
    auto* nash = app.add_subcommand("nash", "finite-N convergence experiment");
    add_common(nash, true);
    nash->add_option("--reps", cfg.n_mc, "MC replications per N (default 500)");
    auto* counterexample = app.add_subcommand("counterexample", "horizon scan of the 2x2 example");
    add_common(counterexample, false);
    counterexample->add_option("--tmin", cfg.tmin, "smallest horizon");
    counterexample->add_option("--tmax", cfg.tmax, "largest horizon");
    counterexample->add_option("--points", cfg.points, "number of horizons");
    auto* gridcmd = app.add_subcommand("grid", "storage/grid example with common noise");
    add_common(gridcmd, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (check->parsed()) { cfg.command = "check"; return cmd_check(cfg); }
        if (solve_emfg->parsed()) { cfg.command = "solve-emfg"; return cmd_solve_emfg(cfg); }
        if (solve_emftc->parsed()) { cfg.command = "solve-emftc"; return cmd_solve_emftc(cfg); }
        if (simulate->parsed()) { cfg.command = "simulate"; return cmd_simulate(cfg); }
        if (nash->parsed()) { cfg.command = "nash"; return cmd_nash(cfg); }
        if (counterexample->parsed()) { cfg.command = "counterexample"; return cmd_counterexample(cfg); }
        if (gridcmd->parsed()) { cfg.command = "grid"; return cmd_grid(cfg); }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
