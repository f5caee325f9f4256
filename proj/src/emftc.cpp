#include "mfglq/emftc.hpp"

#include <cmath>

#include "mfglq/csv.hpp"
#include "mfglq/linalg.hpp"
#include "mfglq/ode.hpp"
#include "mfglq/parallel.hpp"
#include "mfglq/rng.hpp"

namespace mfglq {

MFTCSolution solve_mftc(const EMFTCModel& model, const TimeGrid& grid) {
    const int n = model.n;
    MFTCSolution sol;
    sol.grid = grid;
    sol.gamma_bar = solve_gamma_bar(model, grid);
    if (!sol.gamma_bar.ok()) throw std::runtime_error("solve_mftc: Gamma_bar blew up");
    sol.xi_b = solve_xi_b(model, grid);
    if (!sol.xi_b.ok()) throw std::runtime_error("solve_mftc: Xi_b blew up");

    // forward integration of the coupled mean system from pbar(0) = Gamma_bar(0) xbar(0)
    auto mean_matrix = [&](double t) {
        const MatrixXd ppt_inv = (model.P(t) + model.Ptilde(t)).inverse();
        const MatrixXd bb = model.B(t) + model.Bbar(t);
        const MatrixXd nt = model.Ntilde(t);
        MatrixXd a(2 * n, 2 * n);
        a.topLeftCorner(n, n) = model.A(t) + model.Abar(t) - bb * ppt_inv * nt.transpose();
        a.topRightCorner(n, n) = -bb * ppt_inv * bb.transpose();
        a.bottomLeftCorner(n, n) = -(model.Q(t) + model.Qtilde(t) - nt * ppt_inv * nt.transpose());
        a.bottomRightCorner(n, n) =
            -((model.A(t) + model.Abar(t)).transpose() - nt * ppt_inv * bb.transpose());
        return a;
    };
    VectorXd y(2 * n);
    y << model.x0_mean, sol.gamma_bar.path.front() * model.x0_mean;
    auto rhs = [&](double t, const VectorXd& s) -> VectorXd { return mean_matrix(t) * s; };
    const double h = grid.step();
    for (int k = 0;; ++k) {
        sol.xbar.push_back(y.head(n));
        sol.pbar.push_back(y.tail(n));
        sol.ansatz_residual = std::max(
            sol.ansatz_residual, (y.tail(n) - sol.gamma_bar.path[k] * y.head(n)).norm());
        if (k == grid.n_steps) break;
        y = rk4_step(rhs, grid.node(k), y, h);
        if (!y.allFinite()) throw std::runtime_error("solve_mftc: mean system diverged");
    }
    sol.terminal_residual =
        (sol.pbar.back() - (model.QT + model.QtildeT()) * sol.xbar.back()).norm();

    sol.K_bias.reserve(grid.n_nodes());
    sol.K_mean.reserve(grid.n_nodes());
    for (int k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.node(k);
        const MatrixXd ppb_inv = (model.P(t) + model.Pbar(t)).inverse();
        const MatrixXd ppt_inv = (model.P(t) + model.Ptilde(t)).inverse();
        sol.K_bias.push_back(-ppb_inv * (model.B(t).transpose() * sol.xi_b.path[k] +
                                         model.N(t).transpose()));
        sol.K_mean.push_back(-ppt_inv *
                             ((model.B(t) + model.Bbar(t)).transpose() * sol.gamma_bar.path[k] +
                              model.Ntilde(t).transpose()));
    }
    return sol;
}

namespace {

// One batch of controlled paths under the optimal feedback; a fixed seed
// fixes every path, so perturbed costs evaluated from shifted copies of the
// batch share its random numbers.
struct Batch {
    std::vector<std::vector<VectorXd>> x;   // [path][node]
    std::vector<std::vector<VectorXd>> v;
    std::vector<VectorXd> x_mean, v_mean;
};

Batch simulate_batch(const EMFTCModel& model, const MFTCSolution& sol, int n_paths,
                     uint64_t seed) {
    const TimeGrid& grid = sol.grid;
    const int n = model.n, m = model.m;
    const int nodes = grid.n_nodes();
    const double h = grid.step();
    const MatrixXd cov_root = sqrt_sym(model.x0_cov);

    Batch batch;
    batch.x.assign(n_paths, {});
    batch.v.assign(n_paths, {});

    // Mean input paths under the optimal feedback: the solved xbar and its
    // control.
    std::vector<VectorXd> xbar_in(nodes), vbar_in(nodes);
    for (int k = 0; k < nodes; ++k) {
        xbar_in[k] = sol.xbar[k];
        vbar_in[k] = sol.K_mean[k] * sol.xbar[k];
    }

    // hoisted coefficient samples for the path loop
    std::vector<MatrixXd> A(nodes), B(nodes), Ab(nodes), Bb(nodes), Sg(nodes);
    for (int k = 0; k < nodes; ++k) {
        const double t = grid.node(k);
        A[k] = model.A(t);
        B[k] = model.B(t);
        Ab[k] = model.Abar(t);
        Bb[k] = model.Bbar(t);
        Sg[k] = model.sigma(t);
    }

    parallel_for((size_t)n_paths, [&](size_t p) {
        Rng rng(seed, p);
        auto& xs = batch.x[p];
        auto& vs = batch.v[p];
        xs.reserve(nodes);
        vs.reserve(nodes);
        VectorXd z(n);
        for (int i = 0; i < n; ++i) z(i) = rng.gaussian();
        VectorXd x = model.x0_mean + cov_root * z;
        for (int k = 0;; ++k) {
            xs.push_back(x);
            vs.push_back(sol.control(k, x));
            if (k == grid.n_steps) break;
            VectorXd dw(n);
            for (int i = 0; i < n; ++i) dw(i) = std::sqrt(h) * rng.gaussian();
            x = x + h * (A[k] * x + B[k] * vs.back() + Ab[k] * xbar_in[k] +
                         Bb[k] * vbar_in[k]) +
                Sg[k] * dw;
        }
    });

    batch.x_mean.assign(nodes, VectorXd::Zero(n));
    batch.v_mean.assign(nodes, VectorXd::Zero(m));
    for (int p = 0; p < n_paths; ++p)
        for (int k = 0; k < nodes; ++k) {
            batch.x_mean[k] += batch.x[p][k];
            batch.v_mean[k] += batch.v[p][k];
        }
    for (int k = 0; k < nodes; ++k) {
        batch.x_mean[k] /= n_paths;
        batch.v_mean[k] /= n_paths;
    }
    return batch;
}

// Per-path objective contribution with the batch means plugged in for the
// mean-field terms. A direction/epsilon pair evaluates the cost of the
// shifted paths (x + eps chi, v + eps w): the Euler scheme is linear in the
// control, so the shifted base batch IS the common-random-number re-run.
std::vector<double> per_path_cost(const EMFTCModel& model, const TimeGrid& grid,
                                  const Batch& batch,
                                  const std::vector<VectorXd>* chi = nullptr,
                                  const std::vector<VectorXd>* w_dir = nullptr,
                                  double eps = 0.0) {
    const int nodes = grid.n_nodes();
    const double h = grid.step();
    const int n_paths = (int)batch.x.size();
    std::vector<double> cost(n_paths, 0.0);

    // hoisted coefficient samples
    std::vector<MatrixXd> Q(nodes), P(nodes), Qb(nodes), Pb(nodes), S(nodes), Sb(nodes),
        R(nodes), Rb(nodes), Nc(nodes);
    for (int k = 0; k < nodes; ++k) {
        const double t = grid.node(k);
        Q[k] = model.Q(t);
        P[k] = model.P(t);
        Qb[k] = model.Qbar(t);
        Pb[k] = model.Pbar(t);
        S[k] = model.S(t);
        Sb[k] = model.Sbar(t);
        R[k] = model.R(t);
        Rb[k] = model.Rbar(t);
        Nc[k] = model.N(t);
    }
    parallel_for((size_t)n_paths, [&](size_t p) {
        double acc = 0.0;
        VectorXd x, v, xm, vm;
        for (int k = 0; k < nodes; ++k) {
            x = batch.x[p][k];
            v = batch.v[p][k];
            xm = batch.x_mean[k];
            vm = batch.v_mean[k];
            if (eps != 0.0) {
                x += eps * (*chi)[k];
                v += eps * (*w_dir)[k];
                xm += eps * (*chi)[k];
                vm += eps * (*w_dir)[k];
            }
            const VectorXd xd = x - S[k] * xm;
            const VectorXd xc = x - Sb[k] * xm;
            const VectorXd vd = v - R[k] * vm;
            const VectorXd vc = v - Rb[k] * vm;
            const double run = x.dot(Q[k] * x) + v.dot(P[k] * v) + xd.dot(Qb[k] * xd) +
                               2.0 * xc.dot(Nc[k] * vc) + vd.dot(Pb[k] * vd);
            const double tw = (k == 0 || k == grid.n_steps) ? 0.5 : 1.0;
            acc += 0.5 * tw * h * run;
        }
        VectorXd xT = batch.x[p].back();
        VectorXd xmT = batch.x_mean.back();
        if (eps != 0.0) {
            xT += eps * chi->back();
            xmT += eps * chi->back();
        }
        const VectorXd xdT = xT - model.ST * xmT;
        acc += 0.5 * xT.dot(model.QT * xT) + 0.5 * xdT.dot(model.QbarT * xdT);
        cost[p] = acc;
    });
    return cost;
}

} // namespace

MFTCSimulation simulate_mftc(const EMFTCModel& model, const MFTCSolution& solution, int n_paths,
                             uint64_t seed) {
    const TimeGrid& grid = solution.grid;
    const int n = model.n;
    const int nodes = grid.n_nodes();
    Batch batch = simulate_batch(model, solution, n_paths, seed);
    MFTCSimulation sim;
    sim.n_paths = n_paths;
    sim.mean = batch.x_mean;
    sim.std_error.assign(nodes, VectorXd::Zero(n));
    for (int k = 0; k < nodes; ++k) {
        VectorXd var = VectorXd::Zero(n);
        for (int p = 0; p < n_paths; ++p) {
            const VectorXd d = batch.x[p][k] - batch.x_mean[k];
            var += d.cwiseProduct(d);
        }
        if (n_paths > 1) sim.std_error[k] = (var / ((n_paths - 1.0) * n_paths)).cwiseSqrt();
        sim.mean_residual =
            std::max(sim.mean_residual, (batch.x_mean[k] - solution.xbar[k]).norm());
    }
    return sim;
}

GateauxReport gateaux_test(const EMFTCModel& model, const MFTCSolution& solution,
                           int n_directions, const std::vector<double>& epsilons, int n_paths,
                           uint64_t seed) {
    const TimeGrid& grid = solution.grid;
    const int m = model.m;
    const int nodes = grid.n_nodes();

    GateauxReport report;
    report.epsilons = epsilons;

    // Baseline batch under the optimal feedback; its recorded control process
    // is the perturbation anchor.
    Batch base = simulate_batch(model, solution, n_paths, seed);
    const std::vector<double> cost0 = per_path_cost(model, grid, base);

    for (int d = 0; d < n_directions; ++d) {
        // Piecewise-constant direction on 8 equal subintervals, unit L2 norm.
        Rng rng(seed ^ 0xA5A5A5A5ULL, (uint64_t)d);
        std::vector<VectorXd> w(nodes);
        std::vector<VectorXd> pieces(8, VectorXd::Zero(m));
        for (auto& piece : pieces)
            for (int i = 0; i < m; ++i) piece(i) = rng.gaussian();
        double norm_sq = 0.0;
        for (int k = 0; k < nodes; ++k) {
            const int piece = std::min(7, (int)(8.0 * grid.node(k) / grid.t_end));
            w[k] = pieces[piece];
            const double tw = (k == 0 || k == grid.n_steps) ? 0.5 : 1.0;
            norm_sq += tw * grid.step() * w[k].squaredNorm();
        }
        for (auto& wk : w) wk /= std::sqrt(norm_sq);

        // deterministic state response of the perturbation (the per-path
        // Euler difference is exactly eps * chi)
        std::vector<VectorXd> chi(nodes, VectorXd::Zero(model.n));
        for (int k = 0; k < grid.n_steps; ++k) {
            const double t = grid.node(k);
            chi[k + 1] = chi[k] + grid.step() * ((model.A(t) + model.Abar(t)) * chi[k] +
                                                 (model.B(t) + model.Bbar(t)) * w[k]);
        }

        GateauxDirectionResult res;
        std::vector<std::vector<double>> deltas;   // [eps][path]
        for (double eps : epsilons) {
            const std::vector<double> cost = per_path_cost(model, grid, base, &chi, &w, eps);
            std::vector<double> delta(n_paths);
            for (int p = 0; p < n_paths; ++p) delta[p] = cost[p] - cost0[p];
            double mean = 0.0;
            for (double v : delta) mean += v;
            mean /= n_paths;
            double var = 0.0;
            for (double v : delta) var += (v - mean) * (v - mean);
            var /= std::max(1, n_paths - 1);
            res.delta_j.push_back(mean);
            res.delta_j_se.push_back(std::sqrt(var / n_paths));
            deltas.push_back(std::move(delta));
        }

        // least-squares fit Delta J = a eps + b eps^2, per path, then average
        // (the quadratic term is deterministic, the noise sits in a).
        const int ne = (int)epsilons.size();
        Eigen::MatrixXd X(ne, 2);
        for (int i = 0; i < ne; ++i) {
            X(i, 0) = epsilons[i];
            X(i, 1) = epsilons[i] * epsilons[i];
        }
        const Eigen::MatrixXd pinv =
            (X.transpose() * X).ldlt().solve(X.transpose()).eval();
        std::vector<double> a_p(n_paths), b_p(n_paths);
        for (int p = 0; p < n_paths; ++p) {
            Eigen::VectorXd y(ne);
            for (int i = 0; i < ne; ++i) y(i) = deltas[i][p];
            const Eigen::VectorXd coeff = pinv * y;
            a_p[p] = coeff(0);
            b_p[p] = coeff(1);
        }
        double a_mean = 0.0, b_mean = 0.0;
        for (int p = 0; p < n_paths; ++p) {
            a_mean += a_p[p];
            b_mean += b_p[p];
        }
        a_mean /= n_paths;
        b_mean /= n_paths;
        double a_var = 0.0;
        for (int p = 0; p < n_paths; ++p) a_var += (a_p[p] - a_mean) * (a_p[p] - a_mean);
        a_var /= std::max(1, n_paths - 1);
        res.linear = a_mean;
        res.linear_se = std::sqrt(a_var / n_paths);
        res.quadratic = b_mean;
        report.directions.push_back(std::move(res));
    }
    return report;
}

nlohmann::json GateauxReport::to_json() const {
    nlohmann::json j;
    j["epsilons"] = epsilons;
    nlohmann::json dirs = nlohmann::json::array();
    for (const auto& d : directions) {
        nlohmann::json jd;
        jd["linear"] = d.linear;
        jd["linear_se"] = d.linear_se;
        jd["quadratic"] = d.quadratic;
        jd["delta_j"] = d.delta_j;
        jd["delta_j_se"] = d.delta_j_se;
        dirs.push_back(jd);
    }
    j["directions"] = dirs;
    return j;
}

void export_mftc_csv(const MFTCSolution& sol, const std::string& path) {
    CsvWriter csv(path);
    const int n = (int)sol.xbar.front().size();
    std::vector<std::string> names{"t"};
    for (int i = 0; i < n; ++i) names.push_back("xbar_" + std::to_string(i));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            names.push_back("Gammabar_" + std::to_string(i) + "_" + std::to_string(j));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            names.push_back("Xib_" + std::to_string(i) + "_" + std::to_string(j));
    csv.header(names);
    for (int k = 0; k < sol.grid.n_nodes(); ++k) {
        std::vector<double> row{sol.grid.node(k)};
        for (int i = 0; i < n; ++i) row.push_back(sol.xbar[k](i));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) row.push_back(sol.gamma_bar.path[k](i, j));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) row.push_back(sol.xi_b.path[k](i, j));
        csv.row(row);
    }
}

} // namespace mfglq
