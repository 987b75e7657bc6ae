#pragma once

#include <string>

namespace flood {

// 17 significant digits: enough for a bitwise f64 round-trip.
std::string format_real(double v);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace flood
