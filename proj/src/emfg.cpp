#include "mfglq/emfg.hpp"

#include <algorithm>
#include <cmath>

#include "mfglq/csv.hpp"
#include "mfglq/linalg.hpp"
#include "mfglq/ode.hpp"
#include "mfglq/parallel.hpp"
#include "mfglq/rng.hpp"

namespace mfglq {

namespace {

VectorXd interp_nodes(const std::vector<VectorXd>& values, const TimeGrid& grid, double t) {
    const double h = grid.step();
    const double u = std::clamp(t / h, 0.0, (double)grid.n_steps);
    const int k = std::min((int)u, grid.n_steps - 1);
    const double w = u - k;
    return (1.0 - w) * values[k] + w * values[k + 1];
}

// System matrix of d/dt (xi; eta) = Acal(t) (xi; eta) for the expected
// forward-backward system.
MatrixXd mean_field_matrix(const EMFGModel& model, double t) {
    ReducedCoefficients rc(model);
    const int n = model.n;
    const MatrixXd ppc_inv = (model.P(t) + rc.Pbar_cal(t)).inverse();
    const MatrixXd B = model.B(t), Bb = model.Bbar(t);
    const MatrixXd Sc = rc.Sbar_cal(t), Rc = rc.Rbar_cal(t);
    MatrixXd a(2 * n, 2 * n);
    a.topLeftCorner(n, n) = model.A(t) + model.Abar(t) - (B + Bb) * ppc_inv * Sc;
    a.topRightCorner(n, n) = -(B + Bb) * ppc_inv * B.transpose();
    a.bottomLeftCorner(n, n) = -(model.Q(t) + rc.Qbar_cal(t) - Rc * ppc_inv * Sc);
    a.bottomRightCorner(n, n) = -(model.A(t).transpose() - Rc * ppc_inv * B.transpose());
    return a;
}

FBODESolution integrate_mean_field(const EMFGModel& model, const TimeGrid& grid,
                                   const VectorXd& eta0) {
    const int n = model.n;
    ReducedCoefficients rc(model);
    FBODESolution sol;
    sol.grid = grid;
    sol.xi.reserve(grid.n_nodes());
    sol.eta.reserve(grid.n_nodes());
    sol.upsilon.reserve(grid.n_nodes());

    VectorXd y(2 * n);
    y << model.x0_mean, eta0;
    auto rhs = [&](double t, const VectorXd& s) -> VectorXd {
        return mean_field_matrix(model, t) * s;
    };
    const double h = grid.step();
    for (int k = 0;; ++k) {
        sol.xi.push_back(y.head(n));
        sol.eta.push_back(y.tail(n));
        const double t = grid.node(k);
        const MatrixXd ppc_inv = (model.P(t) + rc.Pbar_cal(t)).inverse();
        sol.upsilon.push_back(-ppc_inv *
                              (rc.Sbar_cal(t) * y.head(n) + model.B(t).transpose() * y.tail(n)));
        if (k == grid.n_steps) break;
        y = rk4_step(rhs, t, y, h);
        if (!y.allFinite()) throw std::runtime_error("solve_mean_field: integration diverged");
    }
    sol.terminal_residual =
        (sol.eta.back() - (model.QT + rc.QbarT_cal()) * sol.xi.back()).norm();
    return sol;
}

} // namespace

VectorXd FBODESolution::xi_at(double t) const { return interp_nodes(xi, grid, t); }
VectorXd FBODESolution::eta_at(double t) const { return interp_nodes(eta, grid, t); }
VectorXd FBODESolution::upsilon_at(double t) const { return interp_nodes(upsilon, grid, t); }

FBODESolution solve_mean_field(const EMFGModel& model, const TimeGrid& grid,
                               MeanFieldMethod method) {
    const int n = model.n;
    ReducedCoefficients rc(model);

    if (method == MeanFieldMethod::gamma) {
        RiccatiSolution gamma = solve_gamma(model, grid, GammaMethod::fundamental);
        if (!gamma.ok())
            throw std::runtime_error(
                "solve_mean_field: non-existence or non-uniqueness at this horizon (singular "
                "fundamental block)");
        return integrate_mean_field(model, grid, gamma.path.front() * model.x0_mean);
    }

    // Shooting: solve the n x n linear system for eta_0 from the transition
    // matrix over the whole horizon.
    FundamentalSolution phi([&](double t) { return mean_field_matrix(model, t); }, 2 * n, grid);
    const MatrixXd terminal = model.QT + rc.QbarT_cal();
    MatrixXd bracket(n, 2 * n);
    bracket << terminal, -MatrixXd::Identity(n, n);
    const MatrixXd w = bracket * phi.at_node(grid.n_steps);
    const MatrixXd u = w.rightCols(n);
    const MatrixXd v = w.leftCols(n);
    if (rcond(u) < 1e-10)
        throw std::runtime_error(
            "solve_mean_field: non-existence or non-uniqueness at this horizon (singular "
            "shooting matrix)");
    const VectorXd eta0 = u.partialPivLu().solve(MatrixXd(-v * model.x0_mean));
    return integrate_mean_field(model, grid, eta0);
}

EquilibriumFeedback build_feedback(const EMFGModel& model, const RiccatiSolution& xi_riccati,
                                   const FBODESolution& fbode) {
    if (!xi_riccati.ok()) throw std::invalid_argument("build_feedback: Xi solution invalid");
    if (xi_riccati.grid.n_steps != fbode.grid.n_steps)
        throw std::invalid_argument("build_feedback: inputs on different grids");
    const TimeGrid& grid = fbode.grid;
    ReducedCoefficients rc(model);

    EquilibriumFeedback fb;
    fb.grid = grid;
    fb.fbode = fbode;
    fb.xi_riccati = xi_riccati;
    fb.F.reserve(grid.n_nodes());
    fb.G.reserve(grid.n_nodes());
    fb.g.reserve(grid.n_nodes());
    fb.zeta.reserve(grid.n_nodes());

    for (int k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.node(k);
        const MatrixXd ppb = model.P(t) + model.Pbar(t);
        if (rcond(ppb) < 1e-10)
            throw std::runtime_error("build_feedback: P+Pbar singular at t=" + std::to_string(t));
        const MatrixXd ppb_inv = ppb.inverse();
        const MatrixXd ppc_inv = (model.P(t) + rc.Pbar_cal(t)).inverse();
        const MatrixXd B = model.B(t), N = model.N(t);
        const MatrixXd& Xi = xi_riccati.path[k];
        // costate offset along the fixed point: p = Xi x + zeta in expectation
        const VectorXd zeta_k = fbode.eta[k] - Xi * fbode.xi[k];
        fb.zeta.push_back(zeta_k);
        fb.F.push_back(-ppb_inv * (N.transpose() + B.transpose() * Xi));
        fb.G.push_back(-ppb_inv * (model.Pbar(t) * model.R(t) * ppc_inv * rc.Sbar_cal(t) -
                                   N.transpose() * model.Sbar(t)));
        fb.g.push_back(-ppb_inv * (model.Pbar(t) * model.R(t) * ppc_inv * B.transpose() *
                                       fbode.eta[k] +
                                   B.transpose() * zeta_k));
    }
    return fb;
}

SimulationResult simulate_representative(const EMFGModel& model, const EquilibriumFeedback& fb,
                                         int n_paths, uint64_t seed, int keep_paths) {
    const TimeGrid& grid = fb.grid;
    const int n = model.n;
    const int nodes = grid.n_nodes();
    const double h = grid.step();

    SimulationResult res;
    res.n_paths = n_paths;
    res.seed = seed;
    res.grid = grid;
    res.mean.assign(nodes, VectorXd::Zero(n));
    res.std_error.assign(nodes, VectorXd::Zero(n));
    if (keep_paths > 0) res.paths.resize(std::min(keep_paths, n_paths));

    const MatrixXd cov_root = sqrt_sym(model.x0_cov);

    // The state is integrated in deviation coordinates around the mean path:
    // x = xi + d with d' = (A + B F) d + sigma dW. At the fixed point the
    // remaining drift terms cancel identically (mean-feedback consistency),
    // so E[d] = 0 holds exactly under the Euler recursion and the residual
    // check carries no discretization bias.
    std::vector<MatrixXd> closed_loop(grid.n_steps);
    for (int k = 0; k < grid.n_steps; ++k)
        closed_loop[k] = model.A(grid.node(k)) + model.B(grid.node(k)) * fb.F[k];

    std::vector<std::vector<VectorXd>> partial(n_paths);
    parallel_for((size_t)n_paths, [&](size_t p) {
        Rng rng(seed, p);
        std::vector<VectorXd>& states = partial[p];
        states.reserve(nodes);
        VectorXd z(n);
        for (int i = 0; i < n; ++i) z(i) = rng.gaussian();
        VectorXd d = cov_root * z;
        states.push_back(fb.fbode.xi[0] + d);
        for (int k = 0; k < grid.n_steps; ++k) {
            VectorXd dw(n);
            for (int i = 0; i < n; ++i) dw(i) = std::sqrt(h) * rng.gaussian();
            d = d + h * closed_loop[k] * d + model.sigma(grid.node(k)) * dw;
            states.push_back(fb.fbode.xi[k + 1] + d);
        }
    });

    for (int k = 0; k < nodes; ++k) {
        VectorXd sum = VectorXd::Zero(n), sumsq = VectorXd::Zero(n);
        for (int p = 0; p < n_paths; ++p) {
            sum += partial[p][k];
            sumsq += partial[p][k].cwiseProduct(partial[p][k]);
        }
        res.mean[k] = sum / n_paths;
        if (n_paths > 1) {
            const VectorXd var =
                (sumsq - n_paths * res.mean[k].cwiseProduct(res.mean[k])) / (n_paths - 1.0);
            res.std_error[k] = (var.cwiseMax(0.0) / n_paths).cwiseSqrt();
        }
        res.fixed_point_residual =
            std::max(res.fixed_point_residual, (res.mean[k] - fb.fbode.xi[k]).norm());
    }
    for (size_t p = 0; p < res.paths.size(); ++p) res.paths[p] = std::move(partial[p]);
    return res;
}

CounterexampleScan counterexample_scan(double t_min, double t_max, int n_horizons,
                                       int grid_steps) {
    if (!(t_min > 0.0) || !(t_max > t_min) || n_horizons < 2)
        throw std::invalid_argument("counterexample_scan: need 0 < t_min < t_max, >= 2 horizons");

    // Two-player example data: system matrix of d/dt (xi; eta) = Acal (xi; eta)
    // and the terminal state weight.
    MatrixXd acal(4, 4);
    acal << -6.24, -4.47, -0.5, -1.1,
            -7.98,  1.38, -1.1, -3.2,
             1.176, -0.566, -2.38, -1.66,
            -7.062, -2.152, -3.37, -2.08;
    MatrixXd q(2, 2);
    q << 2.1, -0.3,
        -0.3,  0.2;
    MatrixXd bracket(2, 4);
    bracket << q, -MatrixXd::Identity(2, 2);

    CounterexampleScan scan;
    scan.rows.reserve(n_horizons);
    auto rhs = [&](double, const VectorXd& y) { return mat_to_vec(MatrixXd(acal * vec_to_mat(y, 4, 4))); };
    for (int i = 0; i < n_horizons; ++i) {
        const double T = t_min + (t_max - t_min) * i / (n_horizons - 1);
        OdePath path = rk4_integrate(rhs, mat_to_vec(MatrixXd::Identity(4, 4)), 0.0, T, grid_steps);
        if (path.blow_up) throw std::runtime_error("counterexample_scan: integration diverged");
        const MatrixXd phi = vec_to_mat(path.back_state(), 4, 4);
        const MatrixXd w = bracket * phi;
        ScanRow row;
        row.T = T;
        row.phi1 = w.rightCols(2).determinant();
        row.phi2 = w.leftCols(2).determinant();
        scan.rows.push_back(row);
    }
    for (size_t i = 1; i < scan.rows.size(); ++i) {
        if (scan.rows[i - 1].phi1 * scan.rows[i].phi1 < 0.0)
            scan.phi1_sign_changes.emplace_back(scan.rows[i - 1].T, scan.rows[i].T);
    }
    return scan;
}

void export_fbode_csv(const FBODESolution& sol, const std::string& path) {
    CsvWriter csv(path);
    const int n = (int)sol.xi.front().size();
    const int m = (int)sol.upsilon.front().size();
    std::vector<std::string> names{"t"};
    for (int i = 0; i < n; ++i) names.push_back("xi_" + std::to_string(i));
    for (int i = 0; i < n; ++i) names.push_back("eta_" + std::to_string(i));
    for (int i = 0; i < m; ++i) names.push_back("upsilon_" + std::to_string(i));
    csv.header(names);
    for (int k = 0; k < sol.grid.n_nodes(); ++k) {
        std::vector<double> row{sol.grid.node(k)};
        for (int i = 0; i < n; ++i) row.push_back(sol.xi[k](i));
        for (int i = 0; i < n; ++i) row.push_back(sol.eta[k](i));
        for (int i = 0; i < m; ++i) row.push_back(sol.upsilon[k](i));
        csv.row(row);
    }
}

void export_feedback_csv(const EquilibriumFeedback& fb, const std::string& path) {
    CsvWriter csv(path);
    const int m = (int)fb.F.front().rows(), n = (int)fb.F.front().cols();
    std::vector<std::string> names{"t"};
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) names.push_back("F_" + std::to_string(i) + "_" + std::to_string(j));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) names.push_back("G_" + std::to_string(i) + "_" + std::to_string(j));
    for (int i = 0; i < m; ++i) names.push_back("g_" + std::to_string(i));
    csv.header(names);
    for (int k = 0; k < fb.grid.n_nodes(); ++k) {
        std::vector<double> row{fb.grid.node(k)};
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) row.push_back(fb.F[k](i, j));
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) row.push_back(fb.G[k](i, j));
        for (int i = 0; i < m; ++i) row.push_back(fb.g[k](i));
        csv.row(row);
    }
}

void export_scan_csv(const CounterexampleScan& scan, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"T", "Phi1", "Phi2"});
    for (const auto& r : scan.rows) csv.row({r.T, r.phi1, r.phi2});
}

} // namespace mfglq
