#pragma once

// A small TOML subset: [table] and [a.b] headers, key = value pairs with
// bare or quoted keys, basic strings, integers, floats, booleans and
// (possibly nested, possibly multi-line) arrays. Comments start with '#'.

#include <string>

#include <json.hpp>

namespace assoc::cli {

// Throws ConfigError with a line number on malformed input.
nlohmann::json parse_toml(const std::string& text);

}  // namespace assoc::cli
