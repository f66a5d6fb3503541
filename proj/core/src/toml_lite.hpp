#pragma once

// Internal: a small TOML subset, parsed into JSON. Covers what experiment
// configs need: top-level key/value pairs, [tables], [[arrays of tables]]
// (dotted headers allowed), strings, integers, floats, booleans, and flat
// arrays. Not a general TOML implementation.

#include <string>

#include <nlohmann/json.hpp>

namespace prbcast::detail {

/// Throws ParseError with a line number on anything outside the subset.
nlohmann::json parse_toml_lite(const std::string& text);

}  // namespace prbcast::detail
