#ifndef MRBEE_CONFIG_HPP
#define MRBEE_CONFIG_HPP

// JSON configuration for simulations and theory predictions.
//
// Population block, either explicit moments
//   {"theta": [...], "m": 1000, "n": [n0, n1, ...] or scalar,
//    "Psi_bb": [[...]], "Sigma_uu": [[...]], "sigma_uv": [...], "sigma_vv": x}
// or heritability targets
//   {"theta": [...], "m": ..., "n": ...,
//    "heritability": {"exposure": 0.3 or [...], "outcome": 0.15,
//                     "psi_diag": 1, "genetic_ar1": 0, "noise_ar1": 0.5}}
// plus "overlap": "full" | "none" | {"outcome_fraction": f} | matrix.
// Index 0 of n and of the overlap matrix is the outcome.

#include <filesystem>
#include <string>

#include "mrbee/simulator.hpp"
#include "mrbee/theory.hpp"

namespace mrbee {

PopulationSpec parse_population_spec(const std::string& json_text);
SimConfig parse_sim_config(const std::string& json_text);

std::string read_text_file(const std::filesystem::path& path);

Method parse_method(const std::string& text);
SimMode parse_sim_mode(const std::string& text);

}  // namespace mrbee

#endif  // MRBEE_CONFIG_HPP
