#pragma once

// JSON model files and content hashes.
//
// Model file layout:
//   {
//     "name": "shift",
//     "state":  [{"name": "x", "kind": "real", "lower": 0, "upper": 4}],
//     "inputs": [{"name": "u", "kind": "boolean"}],
//     "aux":    [],
//     "next":   [{"name": "x'", "lower": -1, "upper": 5}],
//     "goal_var": "x",
//     "constraints": [
//       {"terms": {"x'": 1, "x": -1, "u": -2}, "sense": "==", "rhs": -1},
//       {"terms": {"x": 1}, "sense": "<=", "rhs": 3, "guard": "u", "negated": true}
//     ]
//   }
// "sense" is one of "<=", ">=", "=="; "next" entries are real and may omit
// "kind".

#include <cstdint>
#include <string>
#include <string_view>

#include "qsynth/dtlhs.hpp"

namespace qsynth {

/// Throws Error(Model) on malformed documents or invalid models.
Dtlhs model_from_json(const std::string& text);
/// Throws Error(Io) when the file cannot be read.
Dtlhs load_model(const std::string& path);

/// Canonical JSON: constraints in normalized `<=` form, keys sorted.
std::string model_to_json(const Dtlhs& h);

std::uint64_t fnv1a(std::string_view data);
/// 16 hex digits.
std::string hex_hash(std::uint64_t h);
/// Hash of the canonical JSON form.
std::string model_hash(const Dtlhs& h);

}  // namespace qsynth
