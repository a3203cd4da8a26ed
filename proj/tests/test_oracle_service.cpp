#include <doctest.h>

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "bowslab/oracle_service.hpp"
#include "bowslab/wua.hpp"
#include "test_support.hpp"

using namespace bowslab;
using json = nlohmann::json;

namespace {

ContestConfig small_config(std::int64_t budget, std::uint64_t seed = 1) {
  ContestConfig c;
  c.budget = budget;
  c.seed = seed;
  c.image_size = 128;
  return c;
}

// A strong WUA setting that breaks the 128x128 contest images.
Pixmap broken_copy(const Pixmap& w) {
  WuaParams p;
  p.zero_threshold = 2;
  p.window = 256;
  p.seed = 3;
  return wua_attack(w, p);
}

struct RunningServer {
  RunningServer(Contest& c, const std::string& token) : server(c, token) {
    port = server.bind("127.0.0.1", 0);
    thread = std::thread([this] { server.run(); });
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }

  OracleServer server;
  int port = 0;
  std::thread thread;
};

}  // namespace

TEST_CASE("score: both averaging variants") {
  const ScoreSummary s = score({34.95, 34.04, 37.35});
  CHECK(s.arithmetic_mean == doctest::Approx(35.4467).epsilon(1e-6));
  CHECK(s.mse_domain_mean <= s.arithmetic_mean);
  CHECK(s.mse_domain_mean == doctest::Approx(35.2364).epsilon(1e-5));
  // Reference means 35.24 and 30.59 round from the MSE-domain variant only.
  CHECK(std::round(s.mse_domain_mean * 100) / 100 == 35.24);
  CHECK(std::round(s.arithmetic_mean * 100) / 100 != 35.24);
  const ScoreSummary wua = score({30.39, 31.21, 30.22});
  CHECK(std::round(wua.mse_domain_mean * 100) / 100 == 30.59);
  CHECK(std::round(wua.arithmetic_mean * 100) / 100 == 30.61);

  const ScoreSummary none = score({0, 0, 0});
  CHECK(none.arithmetic_mean == 0.0);
  const ScoreSummary one = score({31.0, 0, 0});
  CHECK(one.arithmetic_mean == doctest::Approx(31.0 / 3));
}

TEST_CASE("submit: untouched image is detected and costs one unit") {
  Contest c(small_config(5));
  const SubmitOutcome o = c.submit("strawberry", c.watermarked("strawberry"));
  CHECK(o.detected);
  CHECK(o.remaining == 4);
  CHECK(c.detections_performed() == 1);
  CHECK(c.scoreboard().arithmetic_mean == 0.0);
}

TEST_CASE("submit: errors") {
  Contest c(small_config(0));
  CHECK_THROWS_AS(c.submit("church", c.watermarked("church")), BudgetExhausted);
  CHECK(c.detections_performed() == 0);
  CHECK_THROWS_AS(c.submit("mona-lisa", Pixmap(128, 128)), ValidationError);
  CHECK_THROWS_AS(c.submit("church", Pixmap(64, 64)), DimensionError);
  CHECK_THROWS_AS(Contest(small_config(-1)), ValidationError);
}

TEST_CASE("submit: an undetected attack updates the best score, bests only improve") {
  Contest c(small_config(10));
  const Pixmap w = c.watermarked("woodpath");
  const Pixmap a = broken_copy(w);
  const SubmitOutcome o = c.submit("woodpath", a);
  CHECK_FALSE(o.detected);
  const double q = psnr(w, a).psnr_db;
  CHECK(c.scoreboard().best[1] == q);
  CHECK(c.scoreboard().arithmetic_mean == doctest::Approx(q / 3));

  WuaParams worse;
  worse.zero_threshold = 2;
  worse.window = 256;
  worse.seed = 3;
  worse.noise_sigma = 6.0;
  const Pixmap b = wua_attack(w, worse);
  REQUIRE(psnr(w, b).psnr_db < q);
  c.submit("woodpath", b);
  CHECK(c.scoreboard().best[1] == q);
}

TEST_CASE("admin reset is deterministic and archives old scores") {
  testing::TempDir dir("oracle");
  ContestConfig cfg = small_config(100, 42);
  cfg.log_path = dir / "log.jsonl";
  Contest c(cfg);
  const Pixmap before = c.watermarked("church");
  c.submit("church", broken_copy(before));
  c.admin_reset(100, 42);
  CHECK(c.watermarked("church") == before);
  CHECK(c.remaining() == 100);
  CHECK(c.scoreboard().arithmetic_mean == 0.0);
  CHECK_THROWS_AS(c.admin_reset(-1, 1), ValidationError);
  CHECK(contest_key(42) == contest_key(42));

  std::ifstream in(cfg.log_path);
  std::string line;
  std::vector<json> events;
  while (std::getline(in, line)) events.push_back(json::parse(line));
  REQUIRE(events.size() == 4);
  CHECK(events[0]["event"] == "reset");
  CHECK(events[1]["event"] == "submit");
  CHECK(events[2]["event"] == "archive");
  CHECK(events[2]["best"][2].get<double>() > 0.0);
  CHECK(events[3]["event"] == "reset");
}

TEST_CASE("log replay restores budget and bests exactly") {
  testing::TempDir dir("replay");
  ContestConfig cfg = small_config(9, 7);
  cfg.log_path = dir / "log.jsonl";
  ScoreSummary s;
  std::int64_t remaining = 0;
  {
    Contest c(cfg);
    c.submit("strawberry", c.watermarked("strawberry"));
    c.submit("church", broken_copy(c.watermarked("church")));
    c.submit("woodpath", broken_copy(c.watermarked("woodpath")));
    s = c.scoreboard();
    remaining = c.remaining();
  }
  const ReplayedState r = replay_contest_log(cfg.log_path);
  CHECK(r.remaining == remaining);
  CHECK(r.best == s.best);
  CHECK(r.seed == 7);

  cfg.budget = 1000;  // ignored: the log wins
  Contest resumed(cfg);
  CHECK(resumed.remaining() == remaining);
  CHECK(resumed.scoreboard().best == s.best);
  CHECK(resumed.seed() == 7);

  std::ofstream(dir / "bad.jsonl") << "{\"event\":\"submit\"}\n";
  CHECK_THROWS_AS(replay_contest_log(dir / "bad.jsonl"), FormatError);
}

TEST_CASE("rate limiting and response padding") {
  ContestConfig cfg = small_config(10);
  cfg.min_interval_ms = 300;
  Contest c(cfg);
  const Pixmap w = c.watermarked("church");

  std::chrono::steady_clock::duration first_elapsed{};
  std::thread first([&] {
    const auto t0 = std::chrono::steady_clock::now();
    c.submit("church", w);
    first_elapsed = std::chrono::steady_clock::now() - t0;
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  bool refused = false;
  try {
    c.submit("church", w);
  } catch (const RateLimited& e) {
    refused = true;
    CHECK(e.retry_after() > std::chrono::milliseconds(0));
    CHECK(e.retry_after() <= std::chrono::milliseconds(300));
  }
  first.join();
  CHECK(refused);
  CHECK(first_elapsed >= std::chrono::milliseconds(300));
  CHECK(c.remaining() == 9);
  CHECK(c.detections_performed() == 1);

  // A sequential client is paced by the padding and never refused.
  c.submit("church", w);
  CHECK(c.remaining() == 8);
}

TEST_CASE("HTTP endpoints and status codes") {
  Contest c(small_config(3));
  RunningServer srv(c, "s3cret");
  httplib::Client http(srv.url());
  OracleClient client(srv.url());

  const Pixmap w = client.image("strawberry");
  CHECK(w == c.watermarked("strawberry"));
  CHECK(http.Get("/images/nope")->status == 404);

  RemoteSubmit r = client.submit("strawberry", w);
  CHECK(r.status == 200);
  CHECK(r.detected);
  CHECK(r.remaining == 2);

  const Pixmap a = broken_copy(w);
  const auto a_bytes = write_pgm(a);
  auto raw = http.Post("/submit/strawberry", std::string(a_bytes.begin(), a_bytes.end()), "image/x-portable-graymap");
  REQUIRE(raw);
  CHECK(raw->status == 200);
  CHECK(raw->body == R"({"detected":false,"remaining":1})");

  CHECK(http.Post("/submit/strawberry", "not a pgm", "text/plain")->status == 400);
  CHECK(client.submit("unknown", w).status == 404);
  CHECK(client.submit("church", Pixmap(64, 64)).status == 422);
  CHECK(client.submit("church", w).status == 200);
  r = client.submit("church", w);
  CHECK(r.status == 403);
  CHECK(r.error == "budget_exhausted");

  const json board = json::parse(client.scoreboard_json());
  CHECK(board["remaining"] == 0);
  CHECK(board["images"]["strawberry"].get<double>() == doctest::Approx(psnr(w, a).psnr_db));
  CHECK(board["images"]["church"].get<double>() == 0.0);
  CHECK(board.contains("mean_arithmetic"));
  CHECK(board.contains("mean_mse_domain"));

  CHECK(http.Post("/admin/reset", R"({"budget":5,"seed":2})", "application/json")->status == 401);
  httplib::Headers bad{{"Authorization", "Bearer wrong"}};
  CHECK(http.Post("/admin/reset", bad, R"({"budget":5,"seed":2})", "application/json")->status == 401);
  httplib::Headers good{{"Authorization", "Bearer s3cret"}};
  CHECK(http.Post("/admin/reset", good, R"({"budget":-5,"seed":2})", "application/json")->status == 400);
  CHECK(http.Post("/admin/reset", good, "{}", "application/json")->status == 400);
  auto ok = http.Post("/admin/reset", good, R"({"budget":5,"seed":2})", "application/json");
  CHECK(ok->status == 200);
  CHECK(c.remaining() == 5);
  CHECK(c.seed() == 2);
}

TEST_CASE("HTTP admin endpoint is disabled without a token") {
  Contest c(small_config(1));
  RunningServer srv(c, "");
  httplib::Client http(srv.url());
  httplib::Headers h{{"Authorization", "Bearer "}};
  CHECK(http.Post("/admin/reset", h, R"({"budget":5,"seed":2})", "application/json")->status == 503);
}

TEST_CASE("HTTP rate limit answers 429 with Retry-After") {
  ContestConfig cfg = small_config(5);
  cfg.min_interval_ms = 1500;
  Contest c(cfg);
  RunningServer srv(c, "");
  const Pixmap w = c.watermarked("church");
  std::thread first([&] { OracleClient(srv.url()).submit("church", w); });
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  httplib::Client http(srv.url());
  const auto bytes = write_pgm(w);
  auto res = http.Post("/submit/church", std::string(bytes.begin(), bytes.end()), "image/x-portable-graymap");
  first.join();
  REQUIRE(res);
  CHECK(res->status == 429);
  CHECK(res->get_header_value("Retry-After") == "2");
  CHECK(c.remaining() == 4);
}

TEST_CASE("concurrent submissions spend the budget exactly") {
  Contest c(small_config(5));
  RunningServer srv(c, "");
  const Pixmap w = c.watermarked("woodpath");
  std::vector<int> status(12, 0);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < status.size(); ++i)
    threads.emplace_back([&, i] { status[i] = OracleClient(srv.url()).submit("woodpath", w).status; });
  for (auto& t : threads) t.join();
  CHECK(std::count(status.begin(), status.end(), 200) == 5);
  CHECK(std::count(status.begin(), status.end(), 403) == 7);
  CHECK(c.detections_performed() == 5);
  CHECK(c.remaining() == 0);
}
