#pragma once

// Command-line surface. Exit codes are a stable contract:
//   0  success
//   1  validation failure (config, dataset, prompt file, run directory)
//   2  backend failure (transport errors, rejections, failed batches)
//   3  interrupted with a resumable run directory persisted

#include <string>
#include <vector>

namespace distill {

int run_cli(int argc, const char* const* argv);

// Convenience overload for in-process tests.
int run_cli(const std::vector<std::string>& args);

} // namespace distill
