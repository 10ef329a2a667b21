#pragma once

#include <string_view>

namespace hallucheck {

// Serialized stderr diagnostics. Never pass secrets here.
void log_warning(std::string_view message);
void log_info(std::string_view message);
// Silences log_info (warnings still print).
void set_quiet(bool quiet);

}  // namespace hallucheck
