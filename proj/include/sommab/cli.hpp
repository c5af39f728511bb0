#pragma once

#include <iosfwd>
#include <string_view>

namespace sommab::cli {

inline constexpr std::string_view kVersion = "0.1.0";

/// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInvalidInput = 2;
inline constexpr int kRuntimeFailure = 3;

/// Entry point of the `sommab` tool. Reports go to `out`, errors to `err`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sommab::cli
