#include "flood/io.hpp"

#include <cstdio>
#include <fstream>

#include "flood/errors.hpp"

namespace flood {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  out << content;
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

}  // namespace flood
