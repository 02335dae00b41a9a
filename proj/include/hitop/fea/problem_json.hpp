#pragma once

#include <json.hpp>

#include "hitop/fea/problem.hpp"

namespace hitop::fea {

/// Parses a problem document (see schemas/problem.schema.json). Throws
/// ValidationError with a JSON-pointer-like field path on any violation.
DesignProblem problem_from_json(const nlohmann::json& doc);

/// Serialises with explicit element lists for the passive sets.
nlohmann::json problem_to_json(const DesignProblem& problem);

}  // namespace hitop::fea
