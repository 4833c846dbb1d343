#pragma once

#include <string>

namespace kbforge {

/// Knowledge-base number style: at most two fractional digits, trailing zeros
/// trimmed but one kept ("42.0", "992.72", "1569352.1"). Magnitudes below 0.005
/// switch to two-digit scientific form ("4.39e-06"). No thousands separators.
std::string format_kb_number(double v);

/// Like format_kb_number but integral values print without a fractional part
/// ("450").
std::string format_plain_number(double v);

/// Fraction as a percentage with two decimals: 0.978 -> "97.80%".
std::string format_percent(double fraction);

}  // namespace kbforge
