#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "defocus/blind_deblur.hpp"

namespace defocus {

/// Sets one SolverConfig field from its textual value. Throws Error on an
/// unknown key or a value that does not parse as the field's type.
void apply_setting(SolverConfig& cfg, std::string_view key, std::string_view value);

/// "key = value" lines, '#' starts a comment. Settings apply on top of base.
SolverConfig parse_config(const std::string& text, SolverConfig base = {});
SolverConfig load_config(const std::filesystem::path& path, SolverConfig base = {});

/// Every accepted key, in declaration order.
const std::vector<std::string>& config_keys();

}  // namespace defocus
