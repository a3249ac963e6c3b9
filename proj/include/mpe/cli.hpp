#pragma once

#include <iostream>

namespace mpe {

inline constexpr const char* kToolVersion = "0.3.0";

// Entry point of the mpels tool. Exit codes: 0 ok, 1 usage/config error,
// 2 data, model or weight error.
int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

}  // namespace mpe
