#pragma once

#include <cstdint>

#include "mfglq/model.hpp"
#include "mfglq/riccati.hpp"

namespace mfglq {

/// Closed-form solution of the control problem: the optimal law splits into a
/// bias gain on (x - xbar) and a mean gain on xbar.
struct MFTCSolution {
    TimeGrid grid;
    RiccatiSolution gamma_bar;           // mean-path Riccati
    RiccatiSolution xi_b;                // bias-path Riccati
    std::vector<VectorXd> xbar, pbar;    // mean state / costate, forward-integrated
    std::vector<MatrixXd> K_bias;        // -(P+Pbar)^{-1}(B^T Xi_b + N^T)
    std::vector<MatrixXd> K_mean;        // -(P+Ptilde)^{-1}((B+Bbar)^T Gamma_bar + Ntilde^T)
    double terminal_residual = 0.0;      // ||pbar_T - (QT + QtildeT) xbar_T||
    double ansatz_residual = 0.0;        // sup_t ||pbar - Gamma_bar xbar||

    VectorXd control(int node, const VectorXd& x) const {
        return K_bias[node] * (x - xbar[node]) + K_mean[node] * xbar[node];
    }
};

MFTCSolution solve_mftc(const EMFTCModel& model, const TimeGrid& grid);

struct MFTCSimulation {
    int n_paths = 0;
    std::vector<VectorXd> mean, std_error;   // state statistics per node
    double mean_residual = 0.0;              // sup_t ||mean - xbar||
};

/// Euler-Maruyama under the optimal law (decomposition-identity diagnostics).
MFTCSimulation simulate_mftc(const EMFTCModel& model, const MFTCSolution& solution, int n_paths,
                             uint64_t seed);

struct GateauxDirectionResult {
    double linear = 0.0;        // fitted coefficient of epsilon
    double linear_se = 0.0;
    double quadratic = 0.0;     // fitted coefficient of epsilon^2
    std::vector<double> delta_j;     // J(v+eps w) - J(v) per epsilon
    std::vector<double> delta_j_se;
};

struct GateauxReport {
    std::vector<double> epsilons;
    std::vector<GateauxDirectionResult> directions;
    nlohmann::json to_json() const;
};

/// First-order optimality probe: perturbs the optimal control process by
/// eps * w for random piecewise-constant directions w, re-simulating with
/// common random numbers, and fits Delta J = a eps + b eps^2.
GateauxReport gateaux_test(const EMFTCModel& model, const MFTCSolution& solution,
                           int n_directions, const std::vector<double>& epsilons, int n_paths,
                           uint64_t seed);

void export_mftc_csv(const MFTCSolution& sol, const std::string& path);

} // namespace mfglq
