#include "kbforge/numfmt.hpp"

#include <cmath>
#include <cstdio>

namespace kbforge {

namespace {

std::string trimmed_fixed(double v, bool keep_one_digit) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s(buf);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') {
    if (keep_one_digit) {
      s.push_back('0');
    } else {
      s.pop_back();
    }
  }
  if (s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

}  // namespace

std::string format_kb_number(double v) {
  if (v != 0.0 && std::fabs(v) < 0.005) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    return buf;
  }
  return trimmed_fixed(v, true);
}

std::string format_plain_number(double v) {
  if (v != 0.0 && std::fabs(v) < 0.005) return format_kb_number(v);
  return trimmed_fixed(v, false);
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

}  // namespace kbforge
