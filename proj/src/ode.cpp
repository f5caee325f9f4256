#include "mfglq/ode.hpp"

#include <cmath>

#include "mfglq/linalg.hpp"

namespace mfglq {

namespace {
bool state_ok(const VectorXd& y) {
    return y.allFinite() && y.cwiseAbs().maxCoeff() <= kBlowUpThreshold;
}
} // namespace

VectorXd rk4_step(const OdeRhs& f, double t, const VectorXd& y, double h) {
    const VectorXd k1 = f(t, y);
    const VectorXd k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    const VectorXd k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    const VectorXd k4 = f(t + h, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

OdePath rk4_integrate(const OdeRhs& f, const VectorXd& y0, double t0, double t1, int n_steps) {
    if (n_steps < 1) throw std::invalid_argument("rk4_integrate: n_steps must be >= 1");
    if (!y0.allFinite()) throw std::invalid_argument("rk4_integrate: y0 must be finite");
    OdePath path;
    path.times.reserve(n_steps + 1);
    path.states.reserve(n_steps + 1);
    const double h = (t1 - t0) / n_steps;
    double t = t0;
    VectorXd y = y0;
    path.times.push_back(t);
    path.states.push_back(y);
    for (int k = 0; k < n_steps; ++k) {
        VectorXd y_next = rk4_step(f, t, y, h);
        if (!state_ok(y_next)) {
            path.blow_up = t;   // last good time
            return path;
        }
        t = t0 + (k + 1) * (t1 - t0) / n_steps;
        y = std::move(y_next);
        path.times.push_back(t);
        path.states.push_back(y);
    }
    return path;
}

FundamentalSolution::FundamentalSolution(const Generator& generator, int dim, const TimeGrid& grid)
    : grid_(grid), dim_(dim) {
    samples_.reserve(grid.n_nodes());
    inverses_.reserve(grid.n_nodes());
    MatrixXd phi = MatrixXd::Identity(dim, dim);
    samples_.push_back(phi);
    const double h = grid.step();
    auto rhs = [&](double t, const VectorXd& y) {
        return mat_to_vec(MatrixXd(generator(t) * vec_to_mat(y, dim_, dim_)));
    };
    VectorXd y = mat_to_vec(phi);
    for (int k = 0; k < grid.n_steps; ++k) {
        y = rk4_step(rhs, grid.node(k), y, h);
        if (!y.allFinite() || y.cwiseAbs().maxCoeff() > kBlowUpThreshold)
            throw std::runtime_error("fundamental_solution: integration diverged at t=" +
                                     std::to_string(grid.node(k)));
        samples_.push_back(vec_to_mat(y, dim_, dim_));
    }
    for (const auto& s : samples_) {
        const double rc = rcond(s);
        min_rcond_ = std::min(min_rcond_, rc);
        if (rc < 1e-14)
            throw std::runtime_error("fundamental_solution: sample numerically singular");
        inverses_.push_back(s.partialPivLu().inverse());
    }
}

MatrixXd FundamentalSolution::evaluate(int i, int j) const {
    if (i == j) return MatrixXd::Identity(dim_, dim_);
    // Phi(t_i, t_j) = Phi(t_i, 0) * Phi(t_j, 0)^{-1}
    return samples_[i] * inverses_[j];
}

} // namespace mfglq
