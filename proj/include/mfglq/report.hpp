#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace mfglq {

/// Outcome of one solvability/condition check, with every intermediate scalar
/// recorded so a failing report can be audited.
struct ConditionReport {
    std::string theorem_id;
    bool holds = false;
    bool applicable = true;                 // false: preconditions not met
    std::map<std::string, double> scalars;
    std::optional<double> witness_t;        // grid time of worst violation
    std::vector<std::string> notes;

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["theorem"] = theorem_id;
        j["holds"] = holds;
        j["applicable"] = applicable;
        j["scalars"] = scalars;
        if (witness_t) j["witness_t"] = *witness_t;
        if (!notes.empty()) j["notes"] = notes;
        return j;
    }
};

} // namespace mfglq
