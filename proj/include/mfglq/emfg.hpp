#pragma once

#include <cstdint>
#include <optional>

#include "mfglq/model.hpp"
#include "mfglq/riccati.hpp"

namespace mfglq {

/// Mean-field fixed point: xi = E[x_hat], eta = E[p], upsilon = E[v_hat].
struct FBODESolution {
    TimeGrid grid;
    std::vector<VectorXd> xi, eta, upsilon;
    double terminal_residual = 0.0;   // ||eta_T - (QT+QbarT_cal) xi_T||

    VectorXd xi_at(double t) const;
    VectorXd eta_at(double t) const;
    VectorXd upsilon_at(double t) const;
};

enum class MeanFieldMethod { gamma, shooting };

/// Equilibrium law v(t, x) = F_t x + G_t xi_t + g_t.
struct EquilibriumFeedback {
    TimeGrid grid;
    std::vector<MatrixXd> F;     // gain on own state, m x n
    std::vector<MatrixXd> G;     // gain on the mean path, m x n
    std::vector<VectorXd> g;     // offset (zeta and eta terms)
    FBODESolution fbode;
    RiccatiSolution xi_riccati;
    std::vector<VectorXd> zeta;  // eta - Xi xi, the costate offset along the fixed point

    VectorXd control(int node, const VectorXd& x) const { return F[node] * x + G[node] * fbode.xi[node] + g[node]; }
};

struct SimulationResult {
    int n_paths = 0;
    uint64_t seed = 0;
    TimeGrid grid;
    std::vector<VectorXd> mean;        // MC mean state per node
    std::vector<VectorXd> std_error;   // componentwise std error per node
    double fixed_point_residual = 0.0; // sup_t ||mean - xi||
    std::vector<std::vector<VectorXd>> paths;  // retained (thinned) paths, optional

    };

FBODESolution solve_mean_field(const EMFGModel& model, const TimeGrid& grid,
                               MeanFieldMethod method = MeanFieldMethod::gamma);

EquilibriumFeedback build_feedback(const EMFGModel& model, const RiccatiSolution& xi_riccati,
                                   const FBODESolution& fbode);

/// Euler-Maruyama on the representative dynamics under the equilibrium law,
/// with the mean paths (xi, upsilon) as the frozen mean-field input. One RNG
/// stream per (seed, path index).
SimulationResult simulate_representative(const EMFGModel& model, const EquilibriumFeedback& fb,
                                         int n_paths, uint64_t seed, int keep_paths = 0);

/// One horizon of the fixed 4x4 counterexample experiment.
struct ScanRow {
    double T;
    double phi1;   // det of the terminal-bracket block that must stay invertible
    double phi2;
};

struct CounterexampleScan {
    std::vector<ScanRow> rows;
    std::vector<std::pair<double, double>> phi1_sign_changes;  // brackets [T_k, T_{k+1}]
};

/// Sweeps the counterexample horizons: the coefficient data is the fixed
/// 4x4 system matrix and 2x2 terminal weight of the two-player example.
CounterexampleScan counterexample_scan(double t_min, double t_max, int n_horizons,
                                       int grid_steps);

void export_fbode_csv(const FBODESolution& sol, const std::string& path);
void export_feedback_csv(const EquilibriumFeedback& fb, const std::string& path);
void export_scan_csv(const CounterexampleScan& scan, const std::string& path);

} // namespace mfglq
