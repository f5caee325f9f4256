#pragma once

#include <optional>

#include "mfglq/model.hpp"
#include "mfglq/report.hpp"

namespace mfglq {

struct KConstants {
    double K1 = 0, K2 = 0, K3 = 0, K4 = 0, K5 = 0;
};

/// Small-horizon condition: e^{(alpha+beta) T} < 2 with alpha, beta the
/// coefficient sups of the forward/backward blocks.
ConditionReport check_small_time(const EMFGModel& model, const TimeGrid& grid);

/// Weighted-norm conditions. Condition 1 is global in T; Condition 2 needs a
/// reference horizon T0 and certifies horizons T below an explicit bound.
/// Requires Q_t and B_t P_t^{-1} B_t^T invertible (else "inapplicable").
ConditionReport check_refined(const EMFGModel& model, const TimeGrid& grid,
                              std::optional<double> T0 = std::nullopt);

/// The five horizon-independent constants behind the global condition.
KConstants compute_K(const EMFGModel& model, const TimeGrid& grid);

/// Global condition K3 + K4 + 2 K2 K5 < 2 K1 K2 (with K1, K2 > 0); reports
/// the admissible epsilon-window ((K3+K4)/(2(K1-K5)), K2).
ConditionReport check_global(const KConstants& k);

/// Singular-value (Weyl) sufficient conditions for K1 > 0 and K2 > 0.
/// Stated for m >= n; the three inequalities are evaluated in multiplied form
/// so zero Qbar / Pbar never divide by zero.
ConditionReport check_weyl(const EMFGModel& model, const TimeGrid& grid);

/// EMFTC solvability (the two pairs of convexity conditions).
ConditionReport check_mftc_conditions(const EMFTCModel& model, const TimeGrid& grid);

/// Fixed-width table of one or more reports.
std::string format_report_table(const std::vector<ConditionReport>& reports);

} // namespace mfglq
