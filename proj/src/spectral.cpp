#include "mfglq/spectral.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "mfglq/linalg.hpp"
#include "mfglq/ode.hpp"

namespace mfglq {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

double psd_tol(const MatrixXd& m) { return -1e-12 * std::max(1.0, lambda_max(m)); }
} // namespace

ConditionReport check_small_time(const EMFGModel& model, const TimeGrid& grid) {
    ConditionReport rep;
    rep.theorem_id = "T3.1";
    ReducedCoefficients rc(model);

    double sup_fwd = 0, sup_gain = 0, sup_bwd = 0, sup_src = 0;
    for (int k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.node(k);
        const MatrixXd PPc = model.P(t) + rc.Pbar_cal(t);
        if (rcond(PPc) < 1e-10)
            throw std::runtime_error("check_small_time: P+Pbar_cal singular at t=" + std::to_string(t));
        const MatrixXd PPc_inv = PPc.inverse();
        const MatrixXd B = model.B(t), Bb = model.Bbar(t);
        const MatrixXd Sc = rc.Sbar_cal(t), Rc = rc.Rbar_cal(t);
        sup_fwd = std::max(sup_fwd, mat_norm(model.A(t) + model.Abar(t) - (B + Bb) * PPc_inv * Sc));
        sup_gain = std::max(sup_gain, mat_norm((B + Bb) * PPc_inv * B.transpose()));
        sup_bwd = std::max(sup_bwd, mat_norm(model.A(t).transpose() - Rc * PPc_inv * B.transpose()));
        sup_src = std::max(sup_src, mat_norm(model.Q(t) + rc.Qbar_cal(t) - Rc * PPc_inv * Sc));
    }
    const double terminal_norm = mat_norm(model.QT + rc.QbarT_cal());
    const double alpha =
        2.0 + 2.0 * sup_fwd + 2.0 * sup_gain * sup_gain * std::max(1.0, terminal_norm * terminal_norm);
    const double beta = 2.0 + 2.0 * sup_bwd + sup_src * sup_src;
    const double growth = std::exp((alpha + beta) * model.T);

    rep.scalars["alpha"] = alpha;
    rep.scalars["beta"] = beta;
    rep.scalars["exp_growth"] = growth;
    rep.scalars["T"] = model.T;
    rep.scalars["T_max"] = std::log(2.0) / (alpha + beta);
    rep.holds = growth < 2.0;
    return rep;
}

ConditionReport check_refined(const EMFGModel& model, const TimeGrid& grid,
                              std::optional<double> T0) {
    ConditionReport rep;
    rep.theorem_id = "T3.2";
    ReducedCoefficients rc(model);

    // The four sup-norms over [0, H] (H = T for Condition 1, H = T0 for Condition 2).
    struct Norms {
        double n2 = 0, n3 = 0, n2b = 0, n1a = 0, n1b = 0;
    };
    auto norms_on = [&](const TimeGrid& g) {
        Norms nm;
        for (int k = 0; k < g.n_nodes(); ++k) {
            const double t = std::min(g.node(k), model.T);
            const MatrixXd Q = model.Q(t);
            const MatrixXd B = model.B(t), Bb = model.Bbar(t);
            const MatrixXd P = model.P(t);
            const MatrixXd BPB = B * P.inverse() * B.transpose();
            if (lambda_min(Q) <= 1e-12 * std::max(1.0, lambda_max(Q)) ||
                lambda_min(symmetrize(BPB)) <= 1e-12 * std::max(1.0, lambda_max(symmetrize(BPB))))
                throw std::runtime_error("refined condition inapplicable: Q or B P^{-1} B^T singular");
            const MatrixXd Qmh = inv_sqrt_sym(Q);
            const MatrixXd Wmh = inv_sqrt_sym(BPB);
            const MatrixXd PPc = model.P(t) + rc.Pbar_cal(t);
            const MatrixXd PPc_inv = PPc.inverse();
            const MatrixXd Sc = rc.Sbar_cal(t), Rc = rc.Rbar_cal(t);
            nm.n2 = std::max(nm.n2,
                             mat_norm(Wmh * (model.Abar(t) - (B + Bb) * PPc_inv * Sc) * Qmh));
            nm.n3 = std::max(nm.n3, mat_norm(Wmh * (B * P.inverse() * rc.Pbar_cal(t) - Bb) *
                                             PPc_inv * B.transpose() * Wmh));
            nm.n2b = std::max(nm.n2b, mat_norm(Qmh * Rc * PPc_inv * B.transpose() * Wmh));
            nm.n1a = std::max(nm.n1a, mat_norm(Qmh * rc.Qbar_cal(t) * Qmh));
            nm.n1b = std::max(nm.n1b, mat_norm(Qmh * Rc * PPc_inv * Sc * Qmh));
        }
        return nm;
    };

    try {
        const Norms nm = norms_on(grid);
        const double lhs1 = nm.n2 * nm.n2 + nm.n3 * nm.n3 + nm.n2b * nm.n2b +
                            (nm.n1a + nm.n1b) * (nm.n1a + nm.n1b);
        rep.scalars["norm2"] = nm.n2;
        rep.scalars["norm3"] = nm.n3;
        rep.scalars["norm2_cross"] = nm.n2b;
        rep.scalars["norm1_Qbar"] = nm.n1a;
        rep.scalars["norm1_cross"] = nm.n1b;
        rep.scalars["condition1_lhs"] = lhs1;
        const bool holds1 = lhs1 < 1.0;
        rep.scalars["condition1_holds"] = holds1 ? 1.0 : 0.0;

        bool holds2 = false;
        if (T0) {
            // Condition 2 uses sups over [0, T0] and the weighted norm of the
            // fundamental solution of A^T.
            // the transition-norm double loop is quadratic in the node count;
            // its grid is capped and recorded in the report
            const int steps = std::max(16, (int)std::lround(grid.n_steps * (*T0 / model.T)));
            TimeGrid g0(*T0, std::min(steps, 600));
            rep.scalars["condition2_grid_steps"] = g0.n_steps;
            const Norms nm0 = norms_on(g0);
            const double mix0 = nm0.n2 * nm0.n2 + nm0.n3 * nm0.n3;
            const double s0 =
                std::sqrt((nm0.n1a + nm0.n1b) * (nm0.n1a + nm0.n1b) + nm0.n2b * nm0.n2b);
            rep.scalars["T0"] = *T0;
            if (mix0 == 0.0) {
                rep.scalars["condition2_applicable"] = 0.0;
                rep.notes.push_back("condition 2 inapplicable: both transfer norms vanish");
            } else if (s0 >= 1.0) {
                rep.scalars["condition2_applicable"] = 1.0;
                rep.scalars["condition2_T_bound"] = 0.0;
            } else {
                FundamentalSolution phi(
                    [&](double t) { return model.A(std::min(t, model.T)).transpose(); },
                    model.n, g0);
                // |||phi|||_{0,T0}
                std::vector<MatrixXd> W(g0.n_nodes()), Qh(g0.n_nodes());
                for (int k = 0; k < g0.n_nodes(); ++k) {
                    const double t = std::min(g0.node(k), model.T);
                    W[k] = sqrt_sym(model.B(t) * model.P(t).inverse() * model.B(t).transpose());
                    Qh[k] = sqrt_sym(model.Q(t));
                }
                const MatrixXd QTh = sqrt_sym(model.Q(std::min(*T0, model.T)));
                const double h = g0.step();
                double phi0_sq = 0.0;
                const int last = g0.n_nodes() - 1;
                for (int i = 0; i <= last; ++i) {
                    double acc = mat_norm(W[i] * phi.evaluate(last, i) * QTh);
                    acc = acc * acc;
                    for (int j = i; j <= last && i < last; ++j) {
                        const double w = (j == i || j == last) ? 0.5 : 1.0;
                        const double term = mat_norm(W[i] * phi.evaluate(j, i) * Qh[j]);
                        acc += w * h * term * term;
                    }
                    phi0_sq = std::max(phi0_sq, acc);
                }
                const double phi0 = std::sqrt(phi0_sq);
                const double bound =
                    std::pow((1.0 / (phi0 * std::sqrt(mix0))) * (1.0 - s0) / (1.0 + s0), 2);
                const double T_bound = std::min(*T0, bound);
                rep.scalars["condition2_applicable"] = 1.0;
                rep.scalars["phi_norm_0_T0"] = phi0;
                rep.scalars["condition2_T_bound"] = T_bound;
                holds2 = model.T < T_bound;
            }
            rep.scalars["condition2_holds"] = holds2 ? 1.0 : 0.0;
        }
        rep.holds = holds1 || holds2;
    } catch (const std::runtime_error& e) {
        rep.applicable = false;
        rep.notes.push_back(e.what());
    }
    return rep;
}

KConstants compute_K(const EMFGModel& model, const TimeGrid& grid) {
    ReducedCoefficients rc(model);
    KConstants K;
    K.K1 = kInf;
    K.K2 = kInf;
    K.K3 = 0;
    K.K4 = 0;
    K.K5 = -kInf;
    for (int k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.node(k);
        const MatrixXd PPc = model.P(t) + rc.Pbar_cal(t);
        if (rcond(PPc) < 1e-10)
            throw std::runtime_error("compute_K: P+Pbar_cal singular at t=" + std::to_string(t));
        const MatrixXd PPc_inv = PPc.inverse();
        const MatrixXd B = model.B(t), Bb = model.Bbar(t);
        const MatrixXd Sc = rc.Sbar_cal(t), Rc = rc.Rbar_cal(t);
        K.K1 = std::min(K.K1, lambda_min(symmetrize(model.Q(t) + rc.Qbar_cal(t))));
        K.K2 = std::min(K.K2, lambda_min(symmetrize((B + Bb) * PPc_inv * B.transpose())));
        const double s3 = sigma_max(model.Abar(t) - (B + Bb) * PPc_inv * Sc);
        const double s4 = sigma_max(Rc * PPc_inv * B.transpose());
        K.K3 = std::max(K.K3, s3 * s3);
        K.K4 = std::max(K.K4, s4 * s4);
        K.K5 = std::max(K.K5, lambda_max(symmetrize(Rc * PPc_inv * Sc)));
    }
    return K;
}

ConditionReport check_global(const KConstants& k) {
    ConditionReport rep;
    rep.theorem_id = "T3.4";
    const double lhs = k.K3 + k.K4 + 2.0 * k.K2 * k.K5;
    const double rhs = 2.0 * k.K1 * k.K2;
    rep.scalars["K1"] = k.K1;
    rep.scalars["K2"] = k.K2;
    rep.scalars["K3"] = k.K3;
    rep.scalars["K4"] = k.K4;
    rep.scalars["K5"] = k.K5;
    rep.scalars["lhs"] = lhs;
    rep.scalars["rhs"] = rhs;
    rep.holds = k.K1 > 0.0 && k.K2 > 0.0 && lhs < rhs;
    const double eps_lo = (k.K1 > k.K5) ? (k.K3 + k.K4) / (2.0 * (k.K1 - k.K5)) : kInf;
    rep.scalars["eps_lo"] = eps_lo;
    rep.scalars["eps_hi"] = k.K2;
    return rep;
}

ConditionReport check_weyl(const EMFGModel& model, const TimeGrid& grid) {
    ConditionReport rep;
    rep.theorem_id = "Weyl";
    if (model.m < model.n) {
        rep.applicable = false;
        rep.notes.push_back("theorem inapplicable: requires m >= n");
        return rep;
    }
    double min_margin1 = kInf, min_margin2 = kInf, min_margin3 = kInf;
    double worst_t = 0.0, worst_margin = kInf;
    for (int k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.node(k);
        const MatrixXd B = model.B(t), Bb = model.Bbar(t);
        const MatrixXd PPb = model.P(t) + model.Pbar(t);
        if (rcond(PPb) < 1e-10)
            throw std::runtime_error("check_weyl: P+Pbar singular at t=" + std::to_string(t));
        const double sminB = sigma_min(B), smaxB = sigma_max(B);
        const double sminPP = sigma_min(PPb), smaxPP = sigma_max(PPb);
        const double smaxBb = sigma_max(Bb);
        const double smaxPb = sigma_max(model.Pbar(t));

        // (i)  sigma_max(Bbar) sigma_max(B) sigma_max(P+Pbar) < sigma_min(B)^2 sigma_min(P+Pbar)
        const double m1 = sminB * sminB * sminPP - smaxBb * smaxB * smaxPP;
        // (ii) sigma_max(S) lambda_max(Qbar) < lambda_min(Q) + lambda_min(Qbar)
        const double m2 = lambda_min(model.Q(t)) + lambda_min(model.Qbar(t)) -
                          sigma_max(model.S(t)) * lambda_max(model.Qbar(t));
        // (iii) sigma_max(R) sigma_max(Pbar) < sigma_min(P+Pbar) * min(E, 1)
        const double denom = sminB * sminB * sminPP + smaxB * smaxB * smaxPP;
        const double E = denom > 0.0 ? m1 / denom : 0.0;
        const double m3 = sminPP * std::min(E, 1.0) - sigma_max(model.R(t)) * smaxPb;

        const double margin = std::min({m1, m2, m3});
        if (margin < worst_margin) {
            worst_margin = margin;
            worst_t = t;
        }
        min_margin1 = std::min(min_margin1, m1);
        min_margin2 = std::min(min_margin2, m2);
        min_margin3 = std::min(min_margin3, m3);
    }
    rep.scalars["min_margin_Bbar"] = min_margin1;
    rep.scalars["min_margin_S"] = min_margin2;
    rep.scalars["min_margin_R"] = min_margin3;
    rep.holds = min_margin1 > 0.0 && min_margin2 > 0.0 && min_margin3 > 0.0;
    if (!rep.holds) rep.witness_t = worst_t;
    return rep;
}

ConditionReport check_mftc_conditions(const EMFTCModel& model, const TimeGrid& grid) {
    ConditionReport rep;
    rep.theorem_id = "C5.1";
    double m_state1 = kInf, m_ctrl1 = kInf, m_state2 = kInf, m_ctrl2 = kInf;
    double worst_t = 0.0, worst = kInf;
    for (int k = 0; k < grid.n_nodes(); ++k) {
        const double t = grid.node(k);
        const MatrixXd PPb = model.P(t) + model.Pbar(t);
        const MatrixXd PPt = model.P(t) + model.Ptilde(t);
        if (rcond(PPb) < 1e-10 || rcond(PPt) < 1e-10)
            throw std::runtime_error("check_mftc_conditions: singular P block at t=" +
                                     std::to_string(t));
        const MatrixXd B = model.B(t), Bb = model.Bbar(t), N = model.N(t), Nt = model.Ntilde(t);
        const MatrixXd s1 =
            symmetrize(model.Q(t) + model.Qbar(t) - N * PPb.inverse() * N.transpose());
        const MatrixXd s2 =
            symmetrize(model.Q(t) + model.Qtilde(t) - Nt * PPt.inverse() * Nt.transpose());
        const double v1 = lambda_min(s1) - psd_tol(s1);
        const double v2 = lambda_min(symmetrize(B * PPb.inverse() * B.transpose())) - model.delta;
        const double v3 = lambda_min(s2) - psd_tol(s2);
        const double v4 =
            lambda_min(symmetrize((B + Bb) * PPt.inverse() * (B + Bb).transpose())) - model.delta;
        m_state1 = std::min(m_state1, v1);
        m_ctrl1 = std::min(m_ctrl1, v2);
        m_state2 = std::min(m_state2, v3);
        m_ctrl2 = std::min(m_ctrl2, v4);
        const double margin = std::min({v1, v2, v3, v4});
        if (margin < worst) {
            worst = margin;
            worst_t = t;
        }
    }
    rep.scalars["min_margin_state_bar"] = m_state1;
    rep.scalars["min_margin_control_bar"] = m_ctrl1;
    rep.scalars["min_margin_state_tilde"] = m_state2;
    rep.scalars["min_margin_control_tilde"] = m_ctrl2;
    rep.scalars["delta"] = model.delta;
    rep.holds = m_state1 >= 0.0 && m_ctrl1 > 0.0 && m_state2 >= 0.0 && m_ctrl2 > 0.0;
    if (!rep.holds) rep.witness_t = worst_t;
    return rep;
}

std::string format_report_table(const std::vector<ConditionReport>& reports) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-10s %-8s %s\n", "theorem", "status", "detail");
    os << buf;
    os << "---------------------------------------------------------------\n";
    for (const auto& r : reports) {
        const char* status = !r.applicable ? "n/a" : (r.holds ? "holds" : "FAILS");
        std::snprintf(buf, sizeof(buf), "%-10s %-8s", r.theorem_id.c_str(), status);
        os << buf;
        if (r.witness_t) {
            std::snprintf(buf, sizeof(buf), " worst t=%.6g", *r.witness_t);
            os << buf;
        }
        os << '\n';
        for (const auto& [name, value] : r.scalars) {
            std::snprintf(buf, sizeof(buf), "    %-24s %16.8g\n", name.c_str(), value);
            os << buf;
        }
        for (const auto& n : r.notes) os << "    note: " << n << '\n';
    }
    return os.str();
}

} // namespace mfglq
