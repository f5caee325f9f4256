#include "mfglq/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfglq/csv.hpp"
#include "mfglq/linalg.hpp"
#include "mfglq/ode.hpp"

namespace mfglq {

namespace {

double nan_d() { return std::numeric_limits<double>::quiet_NaN(); }

// Generator triple of a (possibly non-symmetric) Riccati equation
//   0 = dG/dt + G F1 + F2 G - G C G + D.
struct RiccatiBlocks {
    std::function<MatrixXd(double)> F1, F2, C, D;
};

MatrixXd riccati_rhs(const RiccatiBlocks& b, double t, const MatrixXd& g) {
    return g * b.C(t) * g - g * b.F1(t) - b.F2(t) * g - b.D(t);
}

RiccatiSolution solve_backward(const RiccatiBlocks& blocks, const MatrixXd& terminal,
                               const TimeGrid& grid) {
    const int n = (int)terminal.rows(), m = (int)terminal.cols();
    RiccatiSolution sol;
    sol.grid = grid;
    sol.terminal = terminal;
    sol.path.assign(grid.n_nodes(), MatrixXd::Constant(n, m, nan_d()));
    sol.path.back() = terminal;

    auto rhs = [&](double t, const VectorXd& y) {
        return mat_to_vec(riccati_rhs(blocks, t, vec_to_mat(y, n, m)));
    };
    const double h = grid.step();
    VectorXd y = mat_to_vec(terminal);
    for (int k = grid.n_steps; k > 0; --k) {
        VectorXd y_next = rk4_step(rhs, grid.node(k), y, -h);
        if (!y_next.allFinite() || y_next.cwiseAbs().maxCoeff() > kBlowUpThreshold) {
            sol.blow_up = grid.node(k);   // last good time of the backward sweep
            return sol;
        }
        y = std::move(y_next);
        sol.path[k - 1] = vec_to_mat(y, n, m);
    }

    // Residual of the solved samples against the ODE, via a 4th-order
    // centered difference on interior nodes.
    double res = 0.0;
    for (int k = 2; k + 2 < grid.n_nodes(); ++k) {
        const MatrixXd deriv = (-sol.path[k + 2] + 8.0 * sol.path[k + 1] - 8.0 * sol.path[k - 1] +
                                sol.path[k - 2]) /
                               (12.0 * h);
        res = std::max(res, mat_norm(deriv - riccati_rhs(blocks, grid.node(k), sol.path[k])));
    }
    sol.residual_sup = res;
    return sol;
}

RiccatiBlocks xi_blocks(const EMFGModel& model) {
    auto ppb_inv = [&model](double t) { return MatrixXd((model.P(t) + model.Pbar(t)).inverse()); };
    RiccatiBlocks b;
    b.F1 = [&model, ppb_inv](double t) {
        return MatrixXd(model.A(t) - model.B(t) * ppb_inv(t) * model.N(t).transpose());
    };
    b.F2 = [&model, ppb_inv](double t) {
        return MatrixXd(model.A(t).transpose() -
                        model.N(t) * ppb_inv(t) * model.B(t).transpose());
    };
    b.C = [&model, ppb_inv](double t) {
        return MatrixXd(model.B(t) * ppb_inv(t) * model.B(t).transpose());
    };
    b.D = [&model, ppb_inv](double t) {
        return MatrixXd(model.Q(t) + model.Qbar(t) -
                        model.N(t) * ppb_inv(t) * model.N(t).transpose());
    };
    return b;
}

RiccatiBlocks gamma_blocks(const EMFGModel& model) {
    RiccatiBlocks b;
    b.F1 = [&model](double t) {
        ReducedCoefficients rc(model);
        const MatrixXd ppc_inv = (model.P(t) + rc.Pbar_cal(t)).inverse();
        return MatrixXd(model.A(t) + model.Abar(t) -
                        (model.B(t) + model.Bbar(t)) * ppc_inv * rc.Sbar_cal(t));
    };
    b.F2 = [&model](double t) {
        ReducedCoefficients rc(model);
        const MatrixXd ppc_inv = (model.P(t) + rc.Pbar_cal(t)).inverse();
        return MatrixXd(model.A(t).transpose() -
                        rc.Rbar_cal(t) * ppc_inv * model.B(t).transpose());
    };
    b.C = [&model](double t) {
        ReducedCoefficients rc(model);
        const MatrixXd ppc_inv = (model.P(t) + rc.Pbar_cal(t)).inverse();
        return MatrixXd((model.B(t) + model.Bbar(t)) * ppc_inv * model.B(t).transpose());
    };
    b.D = [&model](double t) {
        ReducedCoefficients rc(model);
        const MatrixXd ppc_inv = (model.P(t) + rc.Pbar_cal(t)).inverse();
        return MatrixXd(model.Q(t) + rc.Qbar_cal(t) -
                        rc.Rbar_cal(t) * ppc_inv * rc.Sbar_cal(t));
    };
    return b;
}

} // namespace

MatrixXd RiccatiSolution::eval(double t) const {
    const double h = grid.step();
    const double u = std::clamp(t / h, 0.0, (double)grid.n_steps);
    const int k = std::min((int)u, grid.n_steps - 1);
    const double w = u - k;
    return (1.0 - w) * path[k] + w * path[k + 1];
}

VectorXd OffsetSolution::eval(double t) const {
    const double h = grid.step();
    const double u = std::clamp(t / h, 0.0, (double)grid.n_steps);
    const int k = std::min((int)u, grid.n_steps - 1);
    const double w = u - k;
    return (1.0 - w) * path[k] + w * path[k + 1];
}

RiccatiSolution solve_xi(const EMFGModel& model, const TimeGrid& grid) {
    return solve_backward(xi_blocks(model), model.QT + model.QbarT, grid);
}

OffsetSolution solve_zeta(const EMFGModel& model, const RiccatiSolution& xi,
                          const std::function<VectorXd(double)>& z,
                          const std::function<VectorXd(double)>& w, const TimeGrid& grid) {
    if (xi.grid.n_steps != grid.n_steps || xi.grid.t_end != grid.t_end)
        throw std::invalid_argument("solve_zeta: grid mismatch with the Xi solution");
    if (!xi.ok()) throw std::invalid_argument("solve_zeta: Xi solution blew up");

    OffsetSolution sol;
    sol.grid = grid;
    sol.terminal = -model.QbarT * model.ST * z(grid.t_end);
    sol.path.assign(grid.n_nodes(), VectorXd::Constant(model.n, nan_d()));
    sol.path.back() = sol.terminal;

    auto rhs = [&](double t, const VectorXd& y) -> VectorXd {
        const MatrixXd ppb_inv = (model.P(t) + model.Pbar(t)).inverse();
        const MatrixXd Xi = xi.eval(t);
        const MatrixXd B = model.B(t), N = model.N(t);
        const MatrixXd drift = model.A(t).transpose() - N * ppb_inv * B.transpose() -
                               Xi * B * ppb_inv * B.transpose();
        const MatrixXd bz = Xi * (B * ppb_inv * N.transpose() * model.Sbar(t) + model.Abar(t)) +
                            (N * ppb_inv * N.transpose() * model.Sbar(t) -
                             model.Qbar(t) * model.S(t));
        const MatrixXd bw = Xi * (B * ppb_inv * model.Pbar(t) * model.R(t) + model.Bbar(t)) +
                            (N * ppb_inv * model.Pbar(t) * model.R(t) - N * model.Rbar(t));
        return -(drift * y + bz * z(t) + bw * w(t));
    };
    const double h = grid.step();
    VectorXd y = sol.terminal;
    for (int k = grid.n_steps; k > 0; --k) {
        y = rk4_step(rhs, grid.node(k), y, -h);
        if (!y.allFinite()) throw std::runtime_error("solve_zeta: diverged");
        sol.path[k - 1] = y;
    }
    return sol;
}

RiccatiSolution solve_gamma(const EMFGModel& model, const TimeGrid& grid, GammaMethod method) {
    const RiccatiBlocks blocks = gamma_blocks(model);
    ReducedCoefficients rc(model);
    const MatrixXd terminal = model.QT + rc.QbarT_cal();
    const int n = model.n;

    if (method == GammaMethod::direct) return solve_backward(blocks, terminal, grid);

    // Assemble Gamma_t from the transition matrix of d/dt (xi; eta) = Acal (xi; eta):
    //   Gamma_t = -[ (GT, -I) Phi(T,t) (0;I) ]^{-1} [ (GT, -I) Phi(T,t) (I;0) ].
    auto acal = [&](double t) {
        MatrixXd a(2 * n, 2 * n);
        a.topLeftCorner(n, n) = blocks.F1(t);
        a.topRightCorner(n, n) = -blocks.C(t);
        a.bottomLeftCorner(n, n) = -blocks.D(t);
        a.bottomRightCorner(n, n) = -blocks.F2(t);
        return a;
    };
    FundamentalSolution phi(acal, 2 * n, grid);

    RiccatiSolution sol;
    sol.grid = grid;
    sol.terminal = terminal;
    sol.path.assign(grid.n_nodes(), MatrixXd::Constant(n, n, nan_d()));

    MatrixXd bracket(n, 2 * n);   // (QT + QbarT_cal, -I)
    bracket << terminal, -MatrixXd::Identity(n, n);
    const int last = grid.n_steps;
    // March from the terminal side, where the block equals -I. A singular
    // block between two nodes flips the sign of its determinant, so the sign
    // change is checked alongside the per-node conditioning cutoff.
    double prev_det = 0.0;
    for (int k = last; k >= 0; --k) {
        const MatrixXd w = bracket * phi.evaluate(last, k);
        const MatrixXd u = w.rightCols(n);
        const MatrixXd v = w.leftCols(n);
        const double rc_u = rcond(u);
        const double det_u = u.determinant();
        sol.min_rcond = std::min(sol.min_rcond, rc_u);
        if (rc_u < 1e-10 || (k < last && prev_det * det_u < 0.0)) {
            sol.singular_t = grid.node(k);
            return sol;
        }
        prev_det = det_u;
        sol.path[k] = -u.partialPivLu().solve(v);
    }

    double res = 0.0;
    const double h = grid.step();
    for (int k = 2; k + 2 < grid.n_nodes(); ++k) {
        const MatrixXd deriv = (-sol.path[k + 2] + 8.0 * sol.path[k + 1] - 8.0 * sol.path[k - 1] +
                                sol.path[k - 2]) /
                               (12.0 * h);
        res = std::max(res, mat_norm(deriv - riccati_rhs(blocks, grid.node(k), sol.path[k])));
    }
    sol.residual_sup = res;
    return sol;
}

RiccatiSolution solve_gamma_bar(const EMFTCModel& model, const TimeGrid& grid) {
    RiccatiBlocks b;
    b.F1 = [&model](double t) {
        const MatrixXd ppt_inv = (model.P(t) + model.Ptilde(t)).inverse();
        return MatrixXd(model.A(t) + model.Abar(t) -
                        (model.B(t) + model.Bbar(t)) * ppt_inv * model.Ntilde(t).transpose());
    };
    b.F2 = [&model](double t) {
        const MatrixXd ppt_inv = (model.P(t) + model.Ptilde(t)).inverse();
        return MatrixXd((model.A(t) + model.Abar(t)).transpose() -
                        model.Ntilde(t) * ppt_inv * (model.B(t) + model.Bbar(t)).transpose());
    };
    b.C = [&model](double t) {
        const MatrixXd ppt_inv = (model.P(t) + model.Ptilde(t)).inverse();
        const MatrixXd bb = model.B(t) + model.Bbar(t);
        return MatrixXd(bb * ppt_inv * bb.transpose());
    };
    b.D = [&model](double t) {
        const MatrixXd ppt_inv = (model.P(t) + model.Ptilde(t)).inverse();
        return MatrixXd(model.Q(t) + model.Qtilde(t) -
                        model.Ntilde(t) * ppt_inv * model.Ntilde(t).transpose());
    };
    return solve_backward(b, model.QT + model.QtildeT(), grid);
}

RiccatiSolution solve_xi_b(const EMFTCModel& model, const TimeGrid& grid) {
    RiccatiBlocks b;
    b.F1 = [&model](double t) {
        const MatrixXd ppb_inv = (model.P(t) + model.Pbar(t)).inverse();
        return MatrixXd(model.A(t) - model.B(t) * ppb_inv * model.N(t).transpose());
    };
    b.F2 = [&model](double t) {
        const MatrixXd ppb_inv = (model.P(t) + model.Pbar(t)).inverse();
        return MatrixXd(model.A(t).transpose() -
                        model.N(t) * ppb_inv * model.B(t).transpose());
    };
    b.C = [&model](double t) {
        const MatrixXd ppb_inv = (model.P(t) + model.Pbar(t)).inverse();
        return MatrixXd(model.B(t) * ppb_inv * model.B(t).transpose());
    };
    b.D = [&model](double t) {
        const MatrixXd ppb_inv = (model.P(t) + model.Pbar(t)).inverse();
        return MatrixXd(model.Q(t) + model.Qbar(t) -
                        model.N(t) * ppb_inv * model.N(t).transpose());
    };
    return solve_backward(b, model.QT + model.QbarT, grid);
}

void export_riccati_csv(const RiccatiSolution& sol, const std::string& symbol,
                        const std::string& path) {
    CsvWriter csv(path);
    const int r = (int)sol.terminal.rows(), c = (int)sol.terminal.cols();
    std::vector<std::string> names{"t"};
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) names.push_back(symbol + "_" + std::to_string(i) + "_" + std::to_string(j));
    csv.header(names);
    for (int k = 0; k < sol.grid.n_nodes(); ++k) {
        std::vector<double> row{sol.grid.node(k)};
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) row.push_back(sol.path[k](i, j));
        csv.row(row);
    }
}

} // namespace mfglq
