#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace lpr::selftest {

struct Options {
  std::filesystem::path out_dir = "selftest-out";
  std::uint64_t seed = 20240601;
};

struct Report {
  std::string log;  // also written to out_dir/selftest.log
  std::vector<std::pair<std::string, bool>> checks;
  std::vector<std::filesystem::path> artifacts;  // relative to out_dir

  bool passed() const;
};

/// Runs fixtures -> targets -> decode -> fusion -> rectify -> head contract ->
/// oracle logits -> beam search -> rules -> evaluation -> losses, writing every
/// intermediate artifact. Output depends only on the seed.
Report run(const Options& options);

}  // namespace lpr::selftest
