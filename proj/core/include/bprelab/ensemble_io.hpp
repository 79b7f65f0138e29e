#pragma once

#include <string>

#include "bprelab/environment.hpp"

namespace bprelab {

// Ensemble file schema (all probabilities and real parameters are decimal
// strings so files round-trip without parser drift):
// {
//   "p": 2,
//   "atoms": [
//     {
//       "weight": "0.5",
//       "rows": [
//         {"kind": "table",
//          "atoms": [{"counts": [2, 0], "prob": "0.55"}, ...]},
//         {"kind": "zero_inflated_geometric",
//          "params": {"q0": "0.3", "means": ["1.2", "0.5"], "cap": 64}}
//       ]
//     }, ...
//   ]
// }

EnvironmentEnsemble load_ensemble(const std::string& path);
EnvironmentEnsemble parse_ensemble(const std::string& json_text);
std::string emit_ensemble(const EnvironmentEnsemble& ens);
void save_ensemble(const EnvironmentEnsemble& ens, const std::string& path);

// Shortest decimal string that round-trips the exact double value.
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace bprelab
