#include "mfglq/nash.hpp"

#include <cmath>

#include "mfglq/csv.hpp"
#include "mfglq/linalg.hpp"
#include "mfglq/parallel.hpp"
#include "mfglq/rng.hpp"

namespace mfglq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double sup_norm(const MatrixPath& p, const TimeGrid& grid) {
    double s = 0.0;
    for (int k = 0; k < grid.n_nodes(); ++k) s = std::max(s, mat_norm(p(grid.node(k))));
    return s;
}
} // namespace

ConstantsReport theoretical_constants(const EMFGModel& model, const TimeGrid& grid) {
    ConstantsReport c;
    ReducedCoefficients rc(model);
    const double T = model.T;

    const KConstants K = compute_K(model, grid);
    if (!(K.K1 > K.K5)) {
        c.applicable = false;
        c.note = "K1 - K5 <= 0: the epsilon window is empty, constants undefined";
        return c;
    }

    double sup_bwd = 0, sup_conv = 0, sup_qq = 0;
    double inf_conv = kInf, inf_bpb = kInf, inf_qq = kInf, inf_ppb = kInf, sup_qq_lmax = 0;
    double sup_bwd_cal = 0, sup_src_cal = 0, sup_qqc = 0;
    double sup_ppc_inv = 0, sup_scal = 0, sup_bt = 0;
    for (int k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.node(k);
        const MatrixXd ppb = model.P(t) + model.Pbar(t);
        const MatrixXd ppb_inv = ppb.inverse();
        const MatrixXd ppc = model.P(t) + rc.Pbar_cal(t);
        const MatrixXd ppc_inv = ppc.inverse();
        const MatrixXd B = model.B(t), N = model.N(t);
        const MatrixXd conv = model.Q(t) + model.Qbar(t) - N * ppb_inv * N.transpose();
        sup_bwd = std::max(sup_bwd,
                           mat_norm(model.A(t).transpose() - N * ppb_inv * B.transpose()));
        sup_conv = std::max(sup_conv, mat_norm(conv));
        sup_qq = std::max(sup_qq, mat_norm(model.Q(t) + model.Qbar(t)));
        inf_conv = std::min(inf_conv, lambda_min(symmetrize(conv)));
        inf_bpb = std::min(inf_bpb, lambda_min(symmetrize(B * ppb_inv * B.transpose())));
        inf_qq = std::min(inf_qq, lambda_min(model.Q(t) + model.Qbar(t)));
        inf_ppb = std::min(inf_ppb, lambda_min(ppb));
        sup_qq_lmax = std::max(sup_qq_lmax, lambda_max(model.Q(t) + model.Qbar(t)));
        const MatrixXd Rc = rc.Rbar_cal(t), Sc = rc.Sbar_cal(t);
        sup_qqc = std::max(sup_qqc, mat_norm(model.Q(t) + rc.Qbar_cal(t)));
        sup_bwd_cal = std::max(
            sup_bwd_cal, mat_norm(model.A(t).transpose() - Rc * ppc_inv * B.transpose()));
        sup_src_cal = std::max(
            sup_src_cal, mat_norm(model.Q(t) + rc.Qbar_cal(t) - Rc * ppc_inv * Sc));
        sup_ppc_inv = std::max(sup_ppc_inv, mat_norm(ppc_inv));
        sup_scal = std::max(sup_scal, mat_norm(Sc));
        sup_bt = std::max(sup_bt, mat_norm(B.transpose()));
    }

    c.C1 = 2.0 * sup_bwd + sup_conv + sup_qq * sup_qq;
    c.C2 = std::min({lambda_min(model.QT + model.QbarT), inf_conv, inf_bpb});
    c.C3 = 3.0 * K.K1 + K.K2 - K.K5 +
           std::sqrt((K.K1 - K.K5 - K.K2) * (K.K1 - K.K5 - K.K2) + 2.0 * (K.K3 + K.K4));
    c.C4 = sup_qqc * sup_qqc + 2.0 * sup_bwd_cal + sup_src_cal;
    const double nA = sup_norm(model.A, grid), nAb = sup_norm(model.Abar, grid);
    const double nB = sup_norm(model.B, grid), nBb = sup_norm(model.Bbar, grid);
    c.C5 = 3.0 * std::max({nA * nA, nAb * nAb, nBb * nBb});
    c.C6 = std::max({sup_norm(model.Q, grid), sup_norm(model.Qbar, grid),
                     sup_norm(model.Pbar, grid), sup_norm(model.N, grid)});
    const double nS = sup_norm(model.S, grid), nR = sup_norm(model.R, grid);
    const double nSb = sup_norm(model.Sbar, grid), nRb = sup_norm(model.Rbar, grid);
    c.C7 = std::max({nS * nS, nR * nR, nSb * nSb, nRb * nRb});

    c.Me1 = (1.0 + c.C1 * c.C1 / (c.C2 * c.C2)) /
            ((1.0 - model.delta / sup_qq_lmax) * std::min(inf_qq, inf_ppb));
    c.Me2 = 4.0 * c.C4 / (c.C3 * c.C3) *
            (1.0 + sup_ppc_inv * sup_ppc_inv * sup_scal * sup_scal +
             sup_ppc_inv * sup_ppc_inv * sup_bt * sup_bt);
    c.Me3 = c.Me1 * c.C5 * std::exp(3.0 * c.C5 * T);
    c.Md4 = (1.0 + nB) * std::exp(T * (2.0 * nA + nB));
    c.Md5 = (1.0 + nB + c.Me2 * nAb + c.Me2 * nBb) *
            std::exp(T * (2.0 * nA + nB + nAb + nBb));
    c.Md6 = 6.0 * c.C5 * std::exp(7.0 * c.C5 * T) * (c.Me1 + c.Md4);
    c.Md7 = 6.0 * c.C5 * std::exp(7.0 * c.C5 * T) * c.Md4;

    const double base = c.C6 * (1.0 + c.C7);
    c.L1 = 78.0 * base * c.Me2 + 36.0 * base * c.Md5 * (T + 1.0);
    c.L2 = 78.0 * base * c.Me1 + 42.0 * base * c.Me3 * (T + 1.0) +
           36.0 * base * c.Md4 * (T + 1.0) + 36.0 * base * c.Md6 * (T + 1.0);
    c.L3 = 36.0 * base * c.Md5 * (T + 1.0);
    c.L4 = 36.0 * base;
    c.L5 = 36.0 * base * (c.Md4 + c.Md7) * (T + 1.0);
    return c;
}

double equilibrium_gap_bound(const EMFGModel& model, const ConstantsReport& c, int N) {
    TimeGrid probe(model.T, 256);
    const double sig = sup_norm(model.sigma, probe);
    const double spread = model.x0_cov.trace() + model.T * sig * sig;
    return 42.0 * c.C6 * (1.0 + c.C7) / std::sqrt((double)N - 1.0) *
           (c.Me2 * model.x0_mean.squaredNorm() + (c.Me1 + c.Me3 * (model.T + 1.0)) * spread);
}

double dummy_gap_bound(const EMFGModel& model, const ConstantsReport& c, int N,
                       double int_mean_sq, double int_second_moment, double int_var) {
    TimeGrid probe(model.T, 256);
    const double sig = sup_norm(model.sigma, probe);
    const double spread = model.x0_cov.trace() + model.T * sig * sig;
    return (c.L1 * model.x0_mean.squaredNorm() + c.L2 * spread + c.L3 * int_mean_sq +
            c.L4 * int_second_moment + c.L5 * int_var) /
           std::sqrt((double)N - 1.0);
}

double running_cost(const EMFGModel& model, double t, const VectorXd& y, const VectorXd& v,
                    const VectorXd& mu, const VectorXd& nu) {
    const VectorXd xd = y - model.S(t) * mu;
    const VectorXd xc = y - model.Sbar(t) * mu;
    const VectorXd vd = v - model.R(t) * nu;
    const VectorXd vc = v - model.Rbar(t) * nu;
    return y.dot(model.Q(t) * y) + v.dot(model.P(t) * v) + xd.dot(model.Qbar(t) * xd) +
           2.0 * xc.dot(model.N(t) * vc) + vd.dot(model.Pbar(t) * vd);
}

double terminal_cost(const EMFGModel& model, const VectorXd& y, const VectorXd& mu) {
    const VectorXd xd = y - model.ST * mu;
    return 0.5 * y.dot(model.QT * y) + 0.5 * xd.dot(model.QbarT * xd);
}

double path_objective(const EMFGModel& model, const TimeGrid& grid,
                      const std::vector<VectorXd>& states,
                      const std::vector<VectorXd>& controls,
                      const std::vector<VectorXd>& mean_states,
                      const std::vector<VectorXd>& mean_controls, int stride) {
    if (stride < 1 || grid.n_steps % stride != 0)
        throw std::invalid_argument("path_objective: n_steps must be divisible by the stride");
    const double h = grid.step() * stride;
    double acc = 0.0;
    for (int k = 0; k <= grid.n_steps; k += stride) {
        const double w = (k == 0 || k == grid.n_steps) ? 0.5 : 1.0;
        acc += 0.5 * w * h *
               running_cost(model, grid.node(k), states[k], controls[k], mean_states[k],
                            mean_controls[k]);
    }
    return acc + terminal_cost(model, states.back(), mean_states.back());
}

NPlayerResult simulate_nplayer(const EMFGModel& model, const EquilibriumFeedback& fb, int N,
                               int n_mc, uint64_t seed, const DeviationSpec& deviation,
                               const std::vector<int>* stream_perm) {
    if (N < 2) throw std::invalid_argument("simulate_nplayer: N must be >= 2");
    if (n_mc < 1) throw std::invalid_argument("simulate_nplayer: n_mc must be >= 1");
    if (stream_perm && (int)stream_perm->size() != N)
        throw std::invalid_argument("simulate_nplayer: stream_perm must have one slot per player");
    const TimeGrid& grid = fb.grid;
    const int n = model.n, m = model.m;
    const double h = grid.step();
    const MatrixXd cov_root = sqrt_sym(model.x0_cov);

    // Agents are simulated indexed by RNG stream slot; player i reads slot
    // perm[i]. That makes a permuted run bitwise a relabeling of the same
    // realizations.
    const int dev_slot = stream_perm ? (*stream_perm)[0] : 0;

    NPlayerResult result;
    result.N = N;
    result.sup_state_err_sq.assign(n_mc, 0.0);
    result.obj_nplayer.assign(n_mc, 0.0);
    result.obj_meanfield.assign(n_mc, 0.0);
    result.last_rep_objectives.assign(N, 0.0);

    std::vector<std::vector<double>> last_obj_store(n_mc);

    parallel_for((size_t)n_mc, [&](size_t rep) {
        std::vector<Rng> rngs;
        rngs.reserve(N);
        for (int s = 0; s < N; ++s) rngs.emplace_back(seed, (uint64_t)rep * N + s);

        std::vector<VectorXd> y(N), xhat(N);
        for (int s = 0; s < N; ++s) {
            VectorXd z(n);
            for (int i = 0; i < n; ++i) z(i) = rngs[s].gaussian();
            y[s] = model.x0_mean + cov_root * z;
            xhat[s] = y[s];
        }

        std::vector<double> obj_np(N, 0.0);   // script-J accumulators per slot
        double obj_mf = 0.0;                  // J accumulator for the deviated slot
        double sup_err = 0.0;
        std::vector<VectorXd> v(N);
        VectorXd sum_y(n), sum_v(m);

        for (int k = 0;; ++k) {
            const double t = grid.node(k);
            // controls from the decoupled states; optional deviation on one slot
            for (int s = 0; s < N; ++s) v[s] = fb.control(k, xhat[s]);
            if (deviation.kind == DeviationSpec::Kind::zero_control)
                v[dev_slot] = VectorXd::Zero(m);
            else if (deviation.kind == DeviationSpec::Kind::constant_shift)
                v[dev_slot] += deviation.shift;

            sum_y.setZero();
            sum_v.setZero();
            for (int s = 0; s < N; ++s) {
                sum_y += y[s];
                sum_v += v[s];
            }

            // running costs (trapezoid weights)
            const double tw = (k == 0 || k == grid.n_steps) ? 0.5 : 1.0;
            const MatrixXd Q = model.Q(t), P = model.P(t), Qb = model.Qbar(t),
                           Pb = model.Pbar(t), S = model.S(t), Sb = model.Sbar(t),
                           R = model.R(t), Rb = model.Rbar(t), Nc = model.N(t);
            for (int s = 0; s < N; ++s) {
                const VectorXd mu = (sum_y - y[s]) / (N - 1.0);
                const VectorXd nu = (sum_v - v[s]) / (N - 1.0);
                const VectorXd xd = y[s] - S * mu;
                const VectorXd xc = y[s] - Sb * mu;
                const VectorXd vd = v[s] - R * nu;
                const VectorXd vc = v[s] - Rb * nu;
                obj_np[s] += 0.5 * tw * h *
                             (y[s].dot(Q * y[s]) + v[s].dot(P * v[s]) + xd.dot(Qb * xd) +
                              2.0 * xc.dot(Nc * vc) + vd.dot(Pb * vd));
            }
            {
                const int s = dev_slot;
                const VectorXd& xi_k = fb.fbode.xi[k];
                const VectorXd& up_k = fb.fbode.upsilon[k];
                const VectorXd xd = xhat[s] - S * xi_k;
                const VectorXd xc = xhat[s] - Sb * xi_k;
                const VectorXd vd = v[s] - R * up_k;
                const VectorXd vc = v[s] - Rb * up_k;
                obj_mf += 0.5 * tw * h *
                          (xhat[s].dot(Q * xhat[s]) + v[s].dot(P * v[s]) + xd.dot(Qb * xd) +
                           2.0 * xc.dot(Nc * vc) + vd.dot(Pb * vd));
            }
            sup_err = std::max(sup_err, (xhat[dev_slot] - y[dev_slot]).squaredNorm());
            if (k == grid.n_steps) break;

            const MatrixXd A = model.A(t), B = model.B(t), Ab = model.Abar(t),
                           Bb = model.Bbar(t), sig = model.sigma(t);
            const VectorXd& xi_k = fb.fbode.xi[k];
            const VectorXd& up_k = fb.fbode.upsilon[k];
            for (int s = 0; s < N; ++s) {
                VectorXd dw(n);
                for (int i = 0; i < n; ++i) dw(i) = std::sqrt(h) * rngs[s].gaussian();
                const VectorXd mu = (sum_y - y[s]) / (N - 1.0);
                const VectorXd nu = (sum_v - v[s]) / (N - 1.0);
                y[s] = y[s] + h * (A * y[s] + B * v[s] + Ab * mu + Bb * nu) + sig * dw;
                xhat[s] = xhat[s] + h * (A * xhat[s] + B * v[s] + Ab * xi_k + Bb * up_k) + sig * dw;
            }
        }

        // terminal costs
        {
            const VectorXd& xiT = fb.fbode.xi.back();
            for (int s = 0; s < N; ++s) {
                const VectorXd mu = (sum_y - y[s]) / (N - 1.0);
                const VectorXd xd = y[s] - model.ST * mu;
                obj_np[s] += 0.5 * y[s].dot(model.QT * y[s]) + 0.5 * xd.dot(model.QbarT * xd);
            }
            const VectorXd xd = xhat[dev_slot] - model.ST * xiT;
            obj_mf += 0.5 * xhat[dev_slot].dot(model.QT * xhat[dev_slot]) +
                      0.5 * xd.dot(model.QbarT * xd);
        }

        result.sup_state_err_sq[rep] = sup_err;
        result.obj_nplayer[rep] = obj_np[dev_slot];
        result.obj_meanfield[rep] = obj_mf;
        if ((int)rep == n_mc - 1) last_obj_store[rep] = obj_np;
    });

    if (!last_obj_store[n_mc - 1].empty()) {
        // player i's objective is the slot perm[i] accumulator
        for (int i = 0; i < N; ++i) {
            const int slot = stream_perm ? (*stream_perm)[i] : i;
            result.last_rep_objectives[i] = last_obj_store[n_mc - 1][slot];
        }
    }
    return result;
}

RateReport epsilon_nash_estimate(const EMFGModel& model, const EquilibriumFeedback& fb,
                                 const NashExperiment& experiment) {
    if (experiment.Ns.size() < 2)
        throw std::invalid_argument("epsilon_nash_estimate: need at least two player counts");
    RateReport report;
    TimeGrid probe(model.T, std::min(fb.grid.n_steps, 512));
    const ConstantsReport consts = theoretical_constants(model, probe);

    for (int N : experiment.Ns) {
        NPlayerResult r = simulate_nplayer(model, fb, N, experiment.n_mc, experiment.seed,
                                           experiment.deviation);
        const int n_mc = experiment.n_mc;
        auto mean_se = [n_mc](const std::vector<double>& xs) {
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= n_mc;
            double var = 0.0;
            for (double x : xs) var += (x - mean) * (x - mean);
            var /= std::max(1, n_mc - 1);
            return std::pair<double, double>(mean, std::sqrt(var / n_mc));
        };
        RateRow row;
        row.N = N;
        std::tie(row.state_err_mean, row.state_err_se) = mean_se(r.sup_state_err_sq);
        std::vector<double> abs_gap(n_mc);
        for (int i = 0; i < n_mc; ++i)
            abs_gap[i] = std::abs(r.obj_nplayer[i] - r.obj_meanfield[i]);
        std::tie(row.obj_gap_mean, row.obj_gap_se) = mean_se(abs_gap);
        row.bound = consts.applicable ? equilibrium_gap_bound(model, consts, N)
                                      : std::numeric_limits<double>::infinity();
        report.rows.push_back(row);
    }

    // least-squares slopes of log(stat) against log(N-1)
    auto slope = [&](auto getter) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int n = (int)report.rows.size();
        for (const auto& r : report.rows) {
            const double x = std::log((double)r.N - 1.0);
            const double y = std::log(std::max(getter(r), 1e-300));
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    report.state_slope = slope([](const RateRow& r) { return r.state_err_mean; });
    report.gap_slope = slope([](const RateRow& r) { return r.obj_gap_mean; });
    return report;
}

nlohmann::json ConstantsReport::to_json() const {
    nlohmann::json j;
    j["applicable"] = applicable;
    if (!note.empty()) j["note"] = note;
    j["C1"] = C1; j["C2"] = C2; j["C3"] = C3; j["C4"] = C4;
    j["C5"] = C5; j["C6"] = C6; j["C7"] = C7;
    j["Me1"] = Me1; j["Me2"] = Me2; j["Me3"] = Me3;
    j["Md4"] = Md4; j["Md5"] = Md5; j["Md6"] = Md6; j["Md7"] = Md7;
    j["L1"] = L1; j["L2"] = L2; j["L3"] = L3; j["L4"] = L4; j["L5"] = L5;
    return j;
}

nlohmann::json RateReport::to_json() const {
    nlohmann::json j;
    j["state_slope"] = state_slope;
    j["gap_slope"] = gap_slope;
    nlohmann::json rows_j = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_j.push_back({{"N", r.N},
                          {"state_err_mean", r.state_err_mean},
                          {"state_err_se", r.state_err_se},
                          {"obj_gap_mean", r.obj_gap_mean},
                          {"obj_gap_se", r.obj_gap_se},
                          {"bound", r.bound}});
    }
    j["rows"] = rows_j;
    return j;
}

void export_nash_csv(const RateReport& report, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"N", "state_err_mean", "state_err_se", "obj_gap_mean", "obj_gap_se", "bound"});
    for (const auto& r : report.rows)
        csv.row({(double)r.N, r.state_err_mean, r.state_err_se, r.obj_gap_mean, r.obj_gap_se,
                 r.bound});
}

} // namespace mfglq
