#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qtgp::cli {

// 0 ok, 1 computational error, 2 usage error
int run(int argc, char** argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 12 significant digits, locale independent; non-finite -> "nan"/"inf"/"-inf"
std::string format_number(double x);

// "v" or "min:max:steps" (inclusive, steps = point count)
std::vector<double> parse_grid(const std::string& spec);

}  // namespace qtgp::cli
