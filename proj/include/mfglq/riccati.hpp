#pragma once

#include <functional>
#include <optional>
#include <string>

#include "mfglq/model.hpp"
#include "mfglq/types.hpp"

namespace mfglq {

/// Backward-solved matrix path on a grid. path[k] is the value at node k;
/// when blow_up is set, nodes earlier than the escape time hold NaN.
struct RiccatiSolution {
    TimeGrid grid;
    std::vector<MatrixXd> path;
    MatrixXd terminal;
    std::optional<double> blow_up;      // escape time of the backward sweep
    std::optional<double> singular_t;   // fundamental method: singular block time
    double residual_sup = 0.0;          // sup_t of the ODE residual (FD check)
    double min_rcond = 1.0;             // fundamental method: worst block conditioning

    bool ok() const { return !blow_up && !singular_t; }
    const MatrixXd& at(int k) const { return path[k]; }
    MatrixXd eval(double t) const;      // linear interpolation between nodes
};

struct OffsetSolution {
    TimeGrid grid;
    std::vector<VectorXd> path;         // zeta at each node
    VectorXd terminal;
    VectorXd eval(double t) const;
};

enum class GammaMethod { fundamental, direct };

/// Symmetric Riccati equation of the representative-agent adjoint:
///   0 = dXi/dt + Xi F + F^T Xi - Xi C Xi + D,  Xi(T) = QT + QbarT,
/// with F = A - B(P+Pbar)^{-1}N^T, C = B(P+Pbar)^{-1}B^T,
/// D = Q + Qbar - N(P+Pbar)^{-1}N^T.
RiccatiSolution solve_xi(const EMFGModel& model, const TimeGrid& grid);

/// Linear offset of the adjoint ansatz p = Xi x + zeta, driven by the mean
/// paths (z, w); zeta(T) = -QbarT ST z(T).
OffsetSolution solve_zeta(const EMFGModel& model, const RiccatiSolution& xi,
                          const std::function<VectorXd(double)>& z,
                          const std::function<VectorXd(double)>& w, const TimeGrid& grid);

/// Non-symmetric Riccati equation of the mean-field system. The fundamental
/// method assembles Gamma_t from the state-transition matrix of the 2n x 2n
/// system and reports a singular block (the non-existence mechanism) instead
/// of integrating through it; the direct method is a plain backward solve.
RiccatiSolution solve_gamma(const EMFGModel& model, const TimeGrid& grid,
                            GammaMethod method = GammaMethod::fundamental);

/// Mean-path Riccati equation of the control problem (tilde-weighted blocks).
RiccatiSolution solve_gamma_bar(const EMFTCModel& model, const TimeGrid& grid);

/// Bias-path Riccati equation of the control problem (bar-weighted blocks).
RiccatiSolution solve_xi_b(const EMFTCModel& model, const TimeGrid& grid);

/// One row per grid time, flattened row-major entries, headers like "Xi_0_1".
void export_riccati_csv(const RiccatiSolution& sol, const std::string& symbol,
                        const std::string& path);

} // namespace mfglq
