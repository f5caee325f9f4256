#include "mfglq/grid_problem.hpp"

#include <cmath>
#include <fstream>

#include "mfglq/csv.hpp"
#include "mfglq/ode.hpp"
#include "mfglq/parallel.hpp"
#include "mfglq/rng.hpp"

namespace mfglq {

namespace {
MatrixPath scalar_path(const nlohmann::json& j, const char* name) {
    if (j.is_number()) {
        MatrixXd v(1, 1);
        v(0, 0) = j.get<double>();
        return MatrixPath::constant(v);
    }
    if (j.is_object() && j.contains("times") && j.contains("values")) {
        std::vector<double> times = j.at("times").get<std::vector<double>>();
        std::vector<MatrixXd> values;
        for (double x : j.at("values").get<std::vector<double>>()) {
            MatrixXd v(1, 1);
            v(0, 0) = x;
            values.push_back(v);
        }
        return MatrixPath::sampled(std::move(times), std::move(values));
    }
    throw std::runtime_error(std::string("grid params: ") + name +
                             " must be a number or {times, values}");
}
} // namespace

void GridParams::validate() const {
    if (!(c + K1 > 0.0)) throw std::runtime_error("grid params: c + K1 must be positive");
    if (!(c + K1 + 2.0 * p0 > 0.0))
        throw std::runtime_error("grid params: c + K1 + 2 p0 must be positive");
    if (!(T > 0.0)) throw std::runtime_error("grid params: T must be positive");
}

GridParams GridParams::from_json(const nlohmann::json& j) {
    GridParams p;
    auto get = [&](const char* name, double dflt) { return j.value(name, dflt); };
    p.alpha0 = get("alpha0", 1.0);
    p.alpha1 = get("alpha1", 1.0);
    p.beta0 = get("beta0", 1.0);
    p.beta1 = get("beta1", 1.0);
    p.sigma = get("sigma", 1.0);
    p.a = get("a", 1.0);
    p.l = get("l", 1.0);
    p.c = get("c", 1.0);
    p.K0 = get("K0", 1.0);
    p.K1 = get("K1", 1.0);
    p.p0 = get("p0", 0.1);
    p.p1 = get("p1", 1.0);
    p.h0 = get("h0", 1.0);
    p.h1 = get("h1", 1.0);
    p.T = get("T", 1.0);
    p.Q00 = get("Q00", 1.0);
    p.Q10 = get("Q10", 1.0);
    MatrixXd one(1, 1);
    one(0, 0) = 1.0;
    p.gamma0 = j.contains("gamma0") ? scalar_path(j.at("gamma0"), "gamma0")
                                    : MatrixPath::constant(one);
    p.gamma1 = j.contains("gamma1") ? scalar_path(j.at("gamma1"), "gamma1")
                                    : MatrixPath::constant(one);
    p.validate();
    return p;
}

GridParams GridParams::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("grid params file not found: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

GridCoefficients solve_grid_coefficients(const GridParams& params, const TimeGrid& grid) {
    params.validate();
    GridCoefficients out;
    out.grid = grid;
    const int nodes = grid.n_nodes();
    const double mbar = params.c + params.K1 + 2.0 * params.p0;
    const double mt = params.c + params.K1;

    // Joint backward sweep; the cascade is triangular (the Riccati component
    // feeds the linear ones), so one RK4 system preserves order 4 without
    // interpolating lambda between nodes.
    auto rhs_bar = [&](double t, const VectorXd& y) -> VectorXd {
        const double lam = y(0), g0 = y(1), g1 = y(2), nu = y(3);
        VectorXd d(4);
        d(0) = lam * lam / mbar - params.a;
        d(1) = (params.alpha0 + lam / mbar) * g0 - 2.0 * lam * params.p0 / mbar;
        d(2) = (params.alpha1 + lam / mbar) * g1 - lam * (params.K1 + 2.0 * params.p0) / mbar;
        d(3) = (lam / mbar) * nu + lam * params.p1 / mbar -
               params.alpha0 * params.gamma0(t)(0, 0) * g0 -
               params.alpha1 * params.gamma1(t)(0, 0) * g1 - params.l;
        return d;
    };
    auto rhs_tilde = [&](double t, const VectorXd& y) -> VectorXd {
        (void)t;
        const double lam = y(0), g0 = y(1), g1 = y(2);
        VectorXd d(3);
        d(0) = lam * lam / mt - params.a;
        d(1) = (params.alpha0 + lam / mt) * g0;
        d(2) = (params.alpha1 + lam / mt) * g1 - lam * params.K1 / mt;
        return d;
    };

    VectorXd ybar(4), yt(3);
    ybar << params.h0, 0.0, 0.0, params.h1;
    yt << params.h0, 0.0, 0.0;
    OdePath bar = rk4_integrate(rhs_bar, ybar, grid.t_end, 0.0, grid.n_steps);
    OdePath tilde = rk4_integrate(rhs_tilde, yt, grid.t_end, 0.0, grid.n_steps);
    if (bar.blow_up || tilde.blow_up)
        throw std::runtime_error("solve_grid_coefficients: Riccati blow-up (needs a >= 0, h0 >= 0)");

    out.lambda0_bar.resize(nodes);
    out.Gamma0_bar.resize(nodes);
    out.Gamma1_bar.resize(nodes);
    out.nu_bar.resize(nodes);
    out.q3_bar.resize(nodes);
    out.lambda0.resize(nodes);
    out.Gamma0.resize(nodes);
    out.Gamma1.resize(nodes);
    out.q3.resize(nodes);
    for (int k = 0; k < nodes; ++k) {
        const VectorXd& b = bar.states[grid.n_steps - k];   // integrated T -> 0
        out.lambda0_bar[k] = b(0);
        out.Gamma0_bar[k] = b(1);
        out.Gamma1_bar[k] = b(2);
        out.nu_bar[k] = b(3);
        out.q3_bar[k] = -params.beta0 * b(1) - params.beta1 * b(2);
        const VectorXd& w = tilde.states[grid.n_steps - k];
        out.lambda0[k] = w(0);
        out.Gamma0[k] = w(1);
        out.Gamma1[k] = w(2);
        out.q3[k] = -params.sigma * w(2);
    }

    // residual of the samples against the ODEs (4th-order differences)
    const double h = grid.step();
    double res = 0.0;
    auto deriv4 = [&](const std::vector<double>& v, int k) {
        return (-v[k + 2] + 8.0 * v[k + 1] - 8.0 * v[k - 1] + v[k - 2]) / (12.0 * h);
    };
    for (int k = 2; k + 2 < nodes; ++k) {
        const double t = grid.node(k);
        VectorXd yb(4), ytl(3);
        yb << out.lambda0_bar[k], out.Gamma0_bar[k], out.Gamma1_bar[k], out.nu_bar[k];
        ytl << out.lambda0[k], out.Gamma0[k], out.Gamma1[k];
        const VectorXd db = rhs_bar(t, yb);
        const VectorXd dt_ = rhs_tilde(t, ytl);
        res = std::max(res, std::abs(deriv4(out.lambda0_bar, k) - db(0)));
        res = std::max(res, std::abs(deriv4(out.Gamma0_bar, k) - db(1)));
        res = std::max(res, std::abs(deriv4(out.Gamma1_bar, k) - db(2)));
        res = std::max(res, std::abs(deriv4(out.nu_bar, k) - db(3)));
        res = std::max(res, std::abs(deriv4(out.lambda0, k) - dt_(0)));
        res = std::max(res, std::abs(deriv4(out.Gamma0, k) - dt_(1)));
        res = std::max(res, std::abs(deriv4(out.Gamma1, k) - dt_(2)));
    }
    out.residual_sup = res;
    return out;
}

GridSimulation simulate_grid(const GridParams& params, const GridCoefficients& coeffs,
                             int n_paths, uint64_t seed, int cohort_size, int keep_paths) {
    if (cohort_size < 1) throw std::invalid_argument("simulate_grid: cohort_size must be >= 1");
    const TimeGrid& grid = coeffs.grid;
    const int nodes = grid.n_nodes();
    const double h = grid.step();
    const double mbar = params.c + params.K1 + 2.0 * params.p0;
    const double mt = params.c + params.K1;
    const int n_cohorts = (n_paths + cohort_size - 1) / cohort_size;

    GridSimulation sim;
    sim.n_paths = n_paths;
    sim.cohort_size = cohort_size;
    sim.seed = seed;
    sim.grid = grid;
    sim.Q0_bar.assign(n_cohorts, std::vector<double>(nodes));
    sim.Q1_bar.assign(n_cohorts, std::vector<double>(nodes));
    sim.S_bar.assign(n_cohorts, std::vector<double>(nodes));
    sim.v_bar.assign(n_cohorts, std::vector<double>(nodes));

    auto v_bar_of = [&](int k, double s, double q0, double q1) {
        const double phi3 = coeffs.lambda0_bar[k] * s + coeffs.Gamma0_bar[k] * q0 +
                            coeffs.Gamma1_bar[k] * q1 + coeffs.nu_bar[k];
        return -(phi3 - 2.0 * params.p0 * q0 - (2.0 * params.p0 + params.K1) * q1 + params.p1) /
               mbar;
    };

    // Deterministic part of the conditional-mean system, integrated jointly
    // with a forward re-sweep of the bar coefficients so the RK4 half-steps
    // see consistent coefficient values (keeps order 4). The noise enters as
    // a zero-start deviation below, so a noise-free run reproduces this path
    // to integrator accuracy.
    std::vector<double> q0_det(nodes), q1_det(nodes), s_det(nodes);
    {
        auto rhs = [&](double t, const VectorXd& y) -> VectorXd {
            const double lam = y(0), g0 = y(1), g1 = y(2), nu = y(3);
            const double q0 = y(4), q1 = y(5), s = y(6);
            const double gamma0 = params.gamma0(t)(0, 0), gamma1 = params.gamma1(t)(0, 0);
            VectorXd d(7);
            d(0) = lam * lam / mbar - params.a;
            d(1) = (params.alpha0 + lam / mbar) * g0 - 2.0 * lam * params.p0 / mbar;
            d(2) = (params.alpha1 + lam / mbar) * g1 - lam * (params.K1 + 2.0 * params.p0) / mbar;
            d(3) = (lam / mbar) * nu + lam * params.p1 / mbar - params.alpha0 * gamma0 * g0 -
                   params.alpha1 * gamma1 * g1 - params.l;
            d(4) = -params.alpha0 * (q0 - gamma0);
            d(5) = -params.alpha1 * (q1 - gamma1);
            d(6) = -(lam * s + g0 * q0 + g1 * q1 + nu - 2.0 * params.p0 * q0 -
                     (2.0 * params.p0 + params.K1) * q1 + params.p1) /
                   mbar;
            return d;
        };
        VectorXd y(7);
        y << coeffs.lambda0_bar[0], coeffs.Gamma0_bar[0], coeffs.Gamma1_bar[0], coeffs.nu_bar[0],
            params.Q00, params.Q10, 0.0;
        for (int k = 0;; ++k) {
            q0_det[k] = y(4);
            q1_det[k] = y(5);
            s_det[k] = y(6);
            if (k == grid.n_steps) break;
            y = rk4_step(rhs, grid.node(k), y, h);
        }
    }

    // Per-cohort common-noise deviations (zero start, Euler-Maruyama).
    parallel_for((size_t)n_cohorts, [&](size_t c) {
        Rng rng(seed, 2 * c);
        double u0 = 0.0, u1 = 0.0, sd = 0.0;
        for (int k = 0; k < nodes; ++k) {
            const double q0 = q0_det[k] + u0, q1 = q1_det[k] + u1, s = s_det[k] + sd;
            sim.Q0_bar[c][k] = q0;
            sim.Q1_bar[c][k] = q1;
            sim.S_bar[c][k] = s;
            sim.v_bar[c][k] = v_bar_of(k, s, q0, q1);
            if (k == grid.n_steps) break;
            const double db = std::sqrt(h) * rng.gaussian();
            const double dsd = -(coeffs.lambda0_bar[k] * sd +
                                 (coeffs.Gamma0_bar[k] - 2.0 * params.p0) * u0 +
                                 (coeffs.Gamma1_bar[k] - (2.0 * params.p0 + params.K1)) * u1) /
                               mbar;
            sd += dsd * h;
            u0 += -params.alpha0 * u0 * h + params.beta0 * db;
            u1 += -params.alpha1 * u1 * h + params.beta1 * db;
        }
    });

    // Per-path tilde systems; accumulate cohort sums for the conditional-mean
    // diagnostics in path order.
    std::vector<std::vector<double>> s_hat((size_t)n_paths), v_hat((size_t)n_paths);
    std::vector<std::vector<double>> q1_path;
    if (keep_paths > 0) q1_path.assign(std::min(keep_paths, n_paths), {});
    parallel_for((size_t)n_paths, [&](size_t p) {
        const int c = (int)p / cohort_size;
        Rng rng(seed, 2 * p + 1);
        double q1t = 0.0, st = 0.0;   // Q0 tilde stays at zero (no driver, zero start)
        auto& sh = s_hat[p];
        auto& vh = v_hat[p];
        sh.resize(nodes);
        vh.resize(nodes);
        const bool keep = keep_paths > 0 && (int)p < keep_paths;
        if (keep) q1_path[p].resize(nodes);
        for (int k = 0; k < nodes; ++k) {
            const double phi3t =
                coeffs.lambda0[k] * st + coeffs.Gamma1[k] * q1t;   // Gamma0 multiplies zero
            const double vt = (params.K1 * q1t - phi3t) / mt;
            sh[k] = sim.S_bar[c][k] + st;
            vh[k] = sim.v_bar[c][k] + vt;
            if (keep) q1_path[p][k] = sim.Q1_bar[c][k] + q1t;
            if (k == grid.n_steps) break;
            const double dw = std::sqrt(h) * rng.gaussian();
            q1t += -params.alpha1 * q1t * h + params.sigma * dw;
            st += vt * h;
        }
    });

    sim.S_hat_cohort_mean.assign(n_cohorts, std::vector<double>(nodes, 0.0));
    sim.S_hat_cohort_se.assign(n_cohorts, std::vector<double>(nodes, 0.0));
    sim.v_hat_cohort_mean.assign(n_cohorts, std::vector<double>(nodes, 0.0));
    sim.v_hat_cohort_se.assign(n_cohorts, std::vector<double>(nodes, 0.0));
    for (int c = 0; c < n_cohorts; ++c) {
        const int lo = c * cohort_size;
        const int hi = std::min(n_paths, lo + cohort_size);
        const int count = hi - lo;
        for (int k = 0; k < nodes; ++k) {
            double sum_s = 0, sum_s2 = 0, sum_v = 0, sum_v2 = 0;
            for (int p = lo; p < hi; ++p) {
                sum_s += s_hat[p][k];
                sum_s2 += s_hat[p][k] * s_hat[p][k];
                sum_v += v_hat[p][k];
                sum_v2 += v_hat[p][k] * v_hat[p][k];
            }
            const double ms = sum_s / count, mv = sum_v / count;
            sim.S_hat_cohort_mean[c][k] = ms;
            sim.v_hat_cohort_mean[c][k] = mv;
            if (count > 1) {
                sim.S_hat_cohort_se[c][k] =
                    std::sqrt(std::max(0.0, (sum_s2 - count * ms * ms) / (count - 1)) / count);
                sim.v_hat_cohort_se[c][k] =
                    std::sqrt(std::max(0.0, (sum_v2 - count * mv * mv) / (count - 1)) / count);
            }
        }
    }

    for (int p = 0; p < (int)q1_path.size(); ++p) {
        const int c = p / cohort_size;
        std::array<std::vector<double>, 4> rec;
        rec[0] = sim.Q0_bar[c];   // Q0 tilde is identically zero
        rec[1] = std::move(q1_path[p]);
        rec[2] = std::move(s_hat[p]);
        rec[3] = std::move(v_hat[p]);
        sim.paths.push_back(std::move(rec));
    }
    return sim;
}

void export_grid_coeffs_csv(const GridCoefficients& c, const std::string& path) {
    CsvWriter csv(path);
    csv.header({"t", "lambda0_bar", "Gamma0_bar", "Gamma1_bar", "nu_bar", "q3_bar", "lambda0",
                "Gamma0", "Gamma1", "q3"});
    for (int k = 0; k < c.grid.n_nodes(); ++k)
        csv.row({c.grid.node(k), c.lambda0_bar[k], c.Gamma0_bar[k], c.Gamma1_bar[k], c.nu_bar[k],
                 c.q3_bar[k], c.lambda0[k], c.Gamma0[k], c.Gamma1[k], c.q3[k]});
}

void export_grid_paths_csv(const GridSimulation& sim, const std::string& path) {
    CsvWriter csv(path);
    std::vector<std::string> names{"t"};
    for (size_t p = 0; p < sim.paths.size(); ++p) {
        const std::string sfx = std::to_string(p);
        names.push_back("Q0_" + sfx);
        names.push_back("Q1_" + sfx);
        names.push_back("S_" + sfx);
        names.push_back("v_" + sfx);
    }
    csv.header(names);
    for (int k = 0; k < sim.grid.n_nodes(); ++k) {
        std::vector<double> row{sim.grid.node(k)};
        for (const auto& rec : sim.paths) {
            row.push_back(rec[0][k]);
            row.push_back(rec[1][k]);
            row.push_back(rec[2][k]);
            row.push_back(rec[3][k]);
        }
        csv.row(row);
    }
}

} // namespace mfglq
