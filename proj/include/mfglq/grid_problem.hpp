#pragma once

#include <array>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "mfglq/types.hpp"

namespace mfglq {

/// Scalar coefficients of the storage/grid demand-charge problem with common
/// noise. gamma0/gamma1 may be constant or sampled scalar paths.
struct GridParams {
    GridParams() {
        gamma0 = MatrixPath::constant(MatrixXd::Ones(1, 1));
        gamma1 = MatrixPath::constant(MatrixXd::Ones(1, 1));
    }

    double alpha0 = 1.0, alpha1 = 1.0;
    MatrixPath gamma0, gamma1;            // 1x1 paths
    double beta0 = 1.0, beta1 = 1.0;
    double sigma = 1.0;
    double a = 1.0, l = 1.0, c = 1.0;
    double K0 = 1.0, K1 = 1.0;
    double p0 = 0.1, p1 = 1.0;
    double h0 = 1.0, h1 = 1.0;
    double T = 1.0;
    double Q00 = 1.0, Q10 = 1.0;

    void validate() const;
    static GridParams from_json(const nlohmann::json& j);
    static GridParams load(const std::string& path);
};

/// Backward-solved coefficient paths of the two affine decompositions:
/// the conditional-mean ("bar") system and the centered ("tilde") system.
struct GridCoefficients {
    TimeGrid grid;
    // bar system
    std::vector<double> lambda0_bar, Gamma0_bar, Gamma1_bar, nu_bar, q3_bar;
    // tilde system
    std::vector<double> lambda0, Gamma0, Gamma1, q3;
    double residual_sup = 0.0;
};

GridCoefficients solve_grid_coefficients(const GridParams& params, const TimeGrid& grid);

struct GridSimulation {
    int n_paths = 0;
    int cohort_size = 0;
    uint64_t seed = 0;
    TimeGrid grid;
    // per-cohort conditional-mean paths (shared common-noise draw)
    std::vector<std::vector<double>> Q0_bar, Q1_bar, S_bar, v_bar;   // [cohort][node]
    // cohort-averaged controlled paths and std errors (conditional-mean check)
    std::vector<std::vector<double>> S_hat_cohort_mean, S_hat_cohort_se;
    std::vector<std::vector<double>> v_hat_cohort_mean, v_hat_cohort_se;
    // retained individual paths: Q0, Q1, S_hat, v_hat
    std::vector<std::array<std::vector<double>, 4>> paths;
};

/// Euler-Maruyama on the decomposed system: the bar paths are driven by the
/// cohort's common-noise stream only, the tilde paths by per-path idiosyncratic
/// streams only.
GridSimulation simulate_grid(const GridParams& params, const GridCoefficients& coeffs,
                             int n_paths, uint64_t seed, int cohort_size = 64,
                             int keep_paths = 0);

void export_grid_coeffs_csv(const GridCoefficients& c, const std::string& path);
void export_grid_paths_csv(const GridSimulation& sim, const std::string& path);

} // namespace mfglq
