#pragma once

// Local replica of the contest detector: three watermarked images, a yes/no answer
// per submission, a finite budget, and an append-only JSON-lines log that is the
// only persistent state.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "bowslab/error.hpp"
#include "bowslab/fixtures.hpp"
#include "bowslab/pixmap.hpp"
#include "bowslab/ssw.hpp"

namespace httplib {
class Server;
}

namespace bowslab {

constexpr std::size_t kContestSize = kContestImages.size();

class BudgetExhausted : public Error {
 public:
  BudgetExhausted() : Error("submission budget exhausted") {}
};

class RateLimited : public Error {
 public:
  explicit RateLimited(std::chrono::milliseconds retry_after)
      : Error("rate limited"), retry_after_(retry_after) {}
  std::chrono::milliseconds retry_after() const noexcept { return retry_after_; }

 private:
  std::chrono::milliseconds retry_after_;
};

class AuthError : public Error {
 public:
  using Error::Error;
};

struct ContestConfig {
  std::int64_t budget = 100;
  std::uint64_t seed = 0;
  std::int64_t min_interval_ms = 0;
  int image_size = 512;
  double target_psnr_db = kDefaultTargetPsnr;
  std::filesystem::path log_path;  // empty: no persistence
};

struct ScoreSummary {
  std::array<double, kContestSize> best{};  // 0 for images never broken
  double arithmetic_mean = 0.0;
  double mse_domain_mean = 0.0;  // PSNR of the mean MSE
};

// Both scoring variants over per-image best PSNRs.
ScoreSummary score(const std::array<double, kContestSize>& best);

struct SubmitOutcome {
  bool detected = true;
  std::int64_t remaining = 0;
};

int contest_image_index(std::string_view image_id);

// Key used by a contest started from `seed`.
WatermarkKey contest_key(std::uint64_t seed);

class Contest {
 public:
  // Starts fresh, or, when config.log_path names an existing log, resumes from it.
  explicit Contest(ContestConfig config);

  SubmitOutcome submit(std::string_view image_id, const Pixmap& img);
  ScoreSummary scoreboard() const;
  void admin_reset(std::int64_t budget, std::uint64_t seed);

  Pixmap watermarked(std::string_view image_id) const;
  std::int64_t remaining() const;
  std::uint64_t seed() const;
  std::int64_t min_interval_ms() const noexcept { return config_.min_interval_ms; }
  std::uint64_t detections_performed() const noexcept { return detections_.load(); }
  std::uint64_t submissions_logged() const;

 private:
  struct State {
    std::uint64_t seed = 0;
    std::int64_t budget = 0;
    std::array<double, kContestSize> best{};
    std::uint64_t submissions = 0;
  };

  void start(std::int64_t budget, std::uint64_t seed, bool write_log);
  void replay_log();
  void append(const std::string& line);

  ContestConfig config_;
  mutable std::mutex mutex_;
  State state_;
  WatermarkKey key_;
  std::array<Pixmap, kContestSize> images_;
  std::optional<std::chrono::steady_clock::time_point> last_request_;
  std::ofstream log_;
  std::atomic<std::uint64_t> detections_{0};
};

// Rebuilds (seed, budget remaining, bests) from a log without touching the images.
struct ReplayedState {
  std::uint64_t seed = 0;
  std::int64_t remaining = 0;
  std::array<double, kContestSize> best{};
  std::uint64_t submissions = 0;
  std::uint64_t archives = 0;
};
ReplayedState replay_contest_log(const std::filesystem::path& path);

// HTTP front end. Status codes:
//   200 ok; 400 malformed body; 401 bad or missing admin token; 403 budget exhausted;
//   404 unknown image id; 422 wrong image dimensions; 429 rate limited (Retry-After, seconds);
//   503 admin endpoint disabled (no token configured).
class OracleServer {
 public:
  // admin_token empty disables /admin/reset.
  OracleServer(Contest& contest, std::string admin_token);
  ~OracleServer();
  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  // Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();

 private:
  Contest& contest_;
  std::string admin_token_;
  std::unique_ptr<httplib::Server> server_;
};

// Environment variable holding the admin bearer token.
constexpr const char* kAdminTokenEnv = "BOWSLAB_ADMIN_TOKEN";

struct RemoteSubmit {
  int status = 0;
  bool detected = true;
  std::int64_t remaining = 0;
  std::int64_t retry_after_ms = 0;
  std::string error;
};

class OracleClient {
 public:
  // url like "http://127.0.0.1:8080".
  explicit OracleClient(const std::string& url);
  ~OracleClient();

  RemoteSubmit submit(std::string_view image_id, const Pixmap& img);
  Pixmap image(std::string_view image_id);
  // Raw JSON text of GET /scoreboard.
  std::string scoreboard_json();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class NetworkError : public Error {
 public:
  using Error::Error;
};

}  // namespace bowslab
