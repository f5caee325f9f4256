#pragma once

#include <cstdint>

#include "mfglq/emfg.hpp"
#include "mfglq/model.hpp"
#include "mfglq/spectral.hpp"

namespace mfglq {

/// Constants of the convergence-rate analysis, all recomputable from the
/// model and the horizon.
struct ConstantsReport {
    double C1 = 0, C2 = 0, C3 = 0, C4 = 0, C5 = 0, C6 = 0, C7 = 0;
    double Me1 = 0, Me2 = 0, Me3 = 0;
    double Md4 = 0, Md5 = 0, Md6 = 0, Md7 = 0;
    double L1 = 0, L2 = 0, L3 = 0, L4 = 0, L5 = 0;
    bool applicable = true;
    std::string note;

    nlohmann::json to_json() const;
};

ConstantsReport theoretical_constants(const EMFGModel& model, const TimeGrid& grid);

/// Objective-gap bound under the equilibrium control:
///   42 C6 (1+C7)/sqrt(N-1) * { Me2 ||E x0||^2 + (Me1 + Me3 (T+1)) (tr cov + T ||sigma||_T^2) }.
double equilibrium_gap_bound(const EMFGModel& model, const ConstantsReport& c, int N);

/// Epsilon-Nash bound with the L constants and the dummy control's moments.
double dummy_gap_bound(const EMFGModel& model, const ConstantsReport& c, int N,
                       double int_mean_sq, double int_second_moment, double int_var);

struct DeviationSpec {
    enum class Kind { none, zero_control, constant_shift };
    Kind kind = Kind::none;
    VectorXd shift;   // for constant_shift
};

struct NashExperiment {
    std::vector<int> Ns;
    int n_mc = 500;
    uint64_t seed = 0;
    DeviationSpec deviation;
};

/// One game size: per-replication statistics for player 1 plus per-player
/// objectives of the final replication (exchangeability checks).
struct NPlayerResult {
    int N = 0;
    std::vector<double> sup_state_err_sq;   // sup_t ||xhat1 - yhat1||^2 per replication
    std::vector<double> obj_nplayer;        // script-J of player 1 per replication
    std::vector<double> obj_meanfield;      // J of player 1 per replication
    std::vector<double> last_rep_objectives;  // script-J per player, final replication
};

/// Simulates the coupled N-player system and the decoupled mean-field systems
/// with shared drivers; every agent applies the equilibrium feedback to its
/// own decoupled state. stream_perm (optional, size N) maps player -> RNG
/// stream slot.
NPlayerResult simulate_nplayer(const EMFGModel& model, const EquilibriumFeedback& fb, int N,
                               int n_mc, uint64_t seed, const DeviationSpec& deviation,
                               const std::vector<int>* stream_perm = nullptr);

/// Running cost of one agent given its state/control and the benchmark paths
/// it is measured against (others' empirical means, or the mean-field input).
double running_cost(const EMFGModel& model, double t, const VectorXd& y, const VectorXd& v,
                    const VectorXd& mu, const VectorXd& nu);
double terminal_cost(const EMFGModel& model, const VectorXd& y, const VectorXd& mu);

/// Objective along sampled paths: trapezoid with the given node stride plus
/// the exact terminal term. n_steps must be divisible by the stride.
double path_objective(const EMFGModel& model, const TimeGrid& grid,
                      const std::vector<VectorXd>& states,
                      const std::vector<VectorXd>& controls,
                      const std::vector<VectorXd>& mean_states,
                      const std::vector<VectorXd>& mean_controls, int stride = 1);

struct RateRow {
    int N;
    double state_err_mean, state_err_se;
    double obj_gap_mean, obj_gap_se;   // mean |script-J - J| per replication
    double bound;
};

struct RateReport {
    std::vector<RateRow> rows;
    double state_slope = 0.0;   // log-log fit vs (N-1)
    double gap_slope = 0.0;
    nlohmann::json to_json() const;
};

RateReport epsilon_nash_estimate(const EMFGModel& model, const EquilibriumFeedback& fb,
                                 const NashExperiment& experiment);

void export_nash_csv(const RateReport& report, const std::string& path);

} // namespace mfglq
