#pragma once

// Command-line front end. Every subcommand that writes images also writes a run
// manifest (key=value text) holding the full argument vector and a hash of each
// output, so `bowslab replay <manifest>` can rerun and verify it.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bowslab/oracle_service.hpp"
#include "bowslab/optattack.hpp"

namespace bowslab::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,      // unexpected internal error
  kUsage = 2,        // bad flags or unknown subcommand/method
  kIo = 3,           // file could not be read or written
  kInvalid = 4,      // malformed file, bad parameter, dimension mismatch
  kCalibration = 5,  // embedding strength search failed
  kNetwork = 6,      // server unreachable or protocol failure
  kBudget = 7,       // submission budget exhausted on a single-shot request
  kMismatch = 8,     // replay produced different output bytes
};

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main_entry(int argc, char** argv);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string fnv1a64_hex(const std::filesystem::path& file);

enum class ContestStrategy { Optimal, Wua };

struct ContestRunOptions {
  ContestStrategy strategy = ContestStrategy::Optimal;
  double psnr_floor_db = 30.0;
  double k_estimate = 1.0;
  PlanSource plan = PlanSource::Stationary;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // empty: nothing written
};

struct ContestImageResult {
  std::string image_id;
  bool broken = false;
  double psnr_db = 0.0;
  int submissions = 0;
};

struct ContestRunSummary {
  std::vector<ContestImageResult> images;
  bool budget_exhausted = false;
  std::string scoreboard_json;
};

// Attacks the three contest images through the remote detector, splitting the
// remaining budget evenly across the images still to be attacked.
ContestRunSummary run_contest(OracleClient& client, const ContestRunOptions& options, std::ostream& log);

}  // namespace bowslab::cli
