#pragma once

// Model files and grid strings.
//
// A model file is a JSON object with the parameters of one backend:
//   Black-Scholes      {"b": 0.1, "sigma": 0.2}
//   1-d linear factor  {"K": -1, "B1": 1, "B0": 0.5, "sigma_norm": 1, "gamma_norm": 1, "rho": 0}
//   Platen-Rebolledo   {"K": -0.5, "sigma_norm": 0.2}
//   m-d linear factor  {"K": [[...]], "B1": [[...]], "B0": [...], "sigma": [[...]], "gamma": [[...]]}
// Matrices are row-major nested arrays. An optional "model" key names the
// backend explicitly ("black_scholes", "linear_factor_1d", "platen_rebolledo",
// "linear_factor_md"); "name" and "comment" are ignored.

#include <string>
#include <vector>

#include "growthld/model_spec.hpp"
#include "json.hpp"

namespace growthld::io {

ModelSpec parse_model(const nlohmann::json& j);
ModelSpec load_model(const std::string& path);
nlohmann::ordered_json model_to_json(const ModelSpec& model);

/// "a:b:n" (n evenly spaced points from a to b inclusive), a comma-separated
/// list, or a single number.
std::vector<double> parse_grid(const std::string& text);

}  // namespace growthld::io
