#include "bowslab/oracle_service.hpp"

#include <httplib.h>

#include <cmath>
#include <json.hpp>
#include <thread>

#include "bowslab/rng.hpp"

namespace bowslab {

using json = nlohmann::json;

ScoreSummary score(const std::array<double, kContestSize>& best) {
  ScoreSummary s;
  s.best = best;
  double psnr_sum = 0.0;
  double mse_sum = 0.0;
  for (double b : best) {
    psnr_sum += b;
    mse_sum += mse_from_psnr(b);
  }
  s.arithmetic_mean = psnr_sum / kContestSize;
  s.mse_domain_mean = psnr_from_mse(mse_sum / kContestSize);
  return s;
}

int contest_image_index(std::string_view image_id) {
  for (std::size_t i = 0; i < kContestSize; ++i)
    if (kContestImages[i] == image_id) return static_cast<int>(i);
  return -1;
}

WatermarkKey contest_key(std::uint64_t seed) { return WatermarkKey{derive_seed(seed, "contest.key"), 64, true}; }

namespace {

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

double json_psnr(const json& v) { return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>(); }

}  // namespace

Contest::Contest(ContestConfig config) : config_(std::move(config)) {
  if (config_.budget < 0) throw ValidationError("budget must be non-negative");
  if (config_.min_interval_ms < 0) throw ValidationError("min_interval_ms must be non-negative");
  const bool resume = !config_.log_path.empty() && std::filesystem::exists(config_.log_path) &&
                      std::filesystem::file_size(config_.log_path) > 0;
  if (!config_.log_path.empty()) {
    log_.open(config_.log_path, std::ios::app);
    if (!log_) throw IoError("cannot open log " + config_.log_path.string());
  }
  if (resume)
    replay_log();
  else
    start(config_.budget, config_.seed, true);
}

void Contest::start(std::int64_t budget, std::uint64_t seed, bool write_log) {
  state_ = State{seed, budget, {}, 0};
  key_ = contest_key(seed);
  for (std::size_t i = 0; i < kContestSize; ++i)
    images_[i] = embed_at_psnr(contest_original(kContestImages[i], config_.image_size), key_, config_.target_psnr_db)
                     .image;
  if (write_log) append(json{{"event", "reset"}, {"seed", seed}, {"budget", budget}, {"t", now_ms()}}.dump());
}

void Contest::replay_log() {
  const ReplayedState r = replay_contest_log(config_.log_path);
  start(r.remaining, r.seed, false);
  state_.best = r.best;
  state_.submissions = r.submissions;
}

void Contest::append(const std::string& line) {
  if (!log_.is_open()) return;
  log_ << line << '\n';
  log_.flush();
}

SubmitOutcome Contest::submit(std::string_view image_id, const Pixmap& img) {
  const auto started = std::chrono::steady_clock::now();
  const int index = contest_image_index(image_id);
  if (index < 0) throw ValidationError("unknown image id '" + std::string(image_id) + "'");
  const auto interval = std::chrono::milliseconds(config_.min_interval_ms);
  WatermarkKey key;
  Pixmap reference;
  {
    std::lock_guard lock(mutex_);
    const Pixmap& current = images_[static_cast<std::size_t>(index)];
    if (img.width() != current.width() || img.height() != current.height())
      throw DimensionError("submission must be " + std::to_string(current.width()) + "x" +
                           std::to_string(current.height()));
    if (interval.count() > 0 && last_request_) {
      const auto elapsed = started - *last_request_;
      if (elapsed < interval)
        throw RateLimited(std::chrono::ceil<std::chrono::milliseconds>(interval - elapsed));
    }
    if (state_.budget <= 0) throw BudgetExhausted();
    --state_.budget;
    last_request_ = started;
    key = key_;
    reference = current;
  }

  const bool detected = detect(img, key);
  ++detections_;
  const double quality = psnr(reference, img).psnr_db;

  SubmitOutcome out;
  out.detected = detected;
  {
    std::lock_guard lock(mutex_);
    ++state_.submissions;
    auto& best = state_.best[static_cast<std::size_t>(index)];
    if (!detected && quality > best) best = quality;
    out.remaining = state_.budget;
    append(json{{"event", "submit"},
                {"image", std::string(image_id)},
                {"detected", detected},
                {"psnr", quality},
                {"remaining", state_.budget},
                {"t", now_ms()}}
               .dump());
  }
  if (interval.count() > 0) std::this_thread::sleep_until(started + interval);
  return out;
}

ScoreSummary Contest::scoreboard() const {
  std::lock_guard lock(mutex_);
  return score(state_.best);
}

void Contest::admin_reset(std::int64_t budget, std::uint64_t seed) {
  if (budget < 0) throw ValidationError("budget must be non-negative");
  std::lock_guard lock(mutex_);
  append(json{{"event", "archive"},
              {"seed", state_.seed},
              {"remaining", state_.budget},
              {"submissions", state_.submissions},
              {"best", state_.best},
              {"t", now_ms()}}
             .dump());
  start(budget, seed, true);
  last_request_.reset();
}

Pixmap Contest::watermarked(std::string_view image_id) const {
  const int index = contest_image_index(image_id);
  if (index < 0) throw ValidationError("unknown image id '" + std::string(image_id) + "'");
  std::lock_guard lock(mutex_);
  return images_[static_cast<std::size_t>(index)];
}

std::int64_t Contest::remaining() const {
  std::lock_guard lock(mutex_);
  return state_.budget;
}

std::uint64_t Contest::seed() const {
  std::lock_guard lock(mutex_);
  return state_.seed;
}

std::uint64_t Contest::submissions_logged() const {
  std::lock_guard lock(mutex_);
  return state_.submissions;
}

ReplayedState replay_contest_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read log " + path.string());
  ReplayedState r;
  bool started = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
      const std::string event = rec.at("event");
      if (event == "reset") {
        r.seed = rec.at("seed").get<std::uint64_t>();
        r.remaining = rec.at("budget").get<std::int64_t>();
        r.best = {};
        r.submissions = 0;
        started = true;
      } else if (event == "submit") {
        if (!started) throw FormatError(FormatError::Kind::BadRecord, "submit before reset");
        const int index = contest_image_index(rec.at("image").get<std::string>());
        if (index < 0) throw FormatError(FormatError::Kind::BadRecord, "unknown image");
        --r.remaining;
        ++r.submissions;
        const double q = json_psnr(rec.at("psnr"));
        auto& best = r.best[static_cast<std::size_t>(index)];
        if (!rec.at("detected").get<bool>() && q > best) best = q;
      } else if (event == "archive") {
        ++r.archives;
      } else {
        throw FormatError(FormatError::Kind::BadRecord, "unknown event '" + event + "'");
      }
    } catch (const json::exception& e) {
      throw FormatError(FormatError::Kind::BadRecord,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!started) throw FormatError(FormatError::Kind::BadRecord, path.string() + ": no reset record");
  return r;
}

// ---------------------------------------------------------------------------
// HTTP server

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply(res, status, json{{"error", code}, {"message", message}});
}

json scoreboard_json(const Contest& contest) {
  const ScoreSummary s = contest.scoreboard();
  json images = json::object();
  for (std::size_t i = 0; i < kContestSize; ++i) images[std::string(kContestImages[i])] = s.best[i];
  return json{{"images", images},
              {"mean_arithmetic", s.arithmetic_mean},
              {"mean_mse_domain", s.mse_domain_mean},
              {"remaining", contest.remaining()},
              {"submissions", contest.submissions_logged()}};
}

}  // namespace

OracleServer::OracleServer(Contest& contest, std::string admin_token)
    : contest_(contest), admin_token_(std::move(admin_token)), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Post("/submit/:id", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    if (contest_image_index(id) < 0) return reply_error(res, 404, "unknown_image", "no image named " + id);
    Pixmap img;
    try {
      const auto* p = reinterpret_cast<const std::uint8_t*>(req.body.data());
      img = read_pgm(std::span<const std::uint8_t>(p, req.body.size()));
    } catch (const FormatError& e) {
      return reply_error(res, 400, "malformed_pgm", e.what());
    }
    try {
      const SubmitOutcome out = contest_.submit(id, img);
      reply(res, 200, json{{"detected", out.detected}, {"remaining", out.remaining}});
    } catch (const DimensionError& e) {
      reply_error(res, 422, "wrong_dimensions", e.what());
    } catch (const BudgetExhausted& e) {
      reply_error(res, 403, "budget_exhausted", e.what());
    } catch (const RateLimited& e) {
      const auto ms = e.retry_after().count();
      res.set_header("Retry-After", std::to_string((ms + 999) / 1000));
      reply(res, 429, json{{"error", "rate_limited"}, {"message", e.what()}, {"retry_after_ms", ms}});
    }
  });

  srv.Get("/scoreboard", [this](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, scoreboard_json(contest_));
  });

  srv.Get("/images/:id", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.path_params.at("id");
    if (contest_image_index(id) < 0) return reply_error(res, 404, "unknown_image", "no image named " + id);
    const auto bytes = write_pgm(contest_.watermarked(id));
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/x-portable-graymap");
  });

  srv.Post("/admin/reset", [this](const httplib::Request& req, httplib::Response& res) {
    if (admin_token_.empty()) return reply_error(res, 503, "admin_disabled", "no admin token configured");
    if (req.get_header_value("Authorization") != "Bearer " + admin_token_)
      return reply_error(res, 401, "unauthorized", "bad or missing bearer token");
    json body;
    try {
      body = json::parse(req.body);
      const auto budget = body.at("budget").get<std::int64_t>();
      const auto seed = body.at("seed").get<std::uint64_t>();
      contest_.admin_reset(budget, seed);
    } catch (const json::exception& e) {
      return reply_error(res, 400, "bad_request", e.what());
    } catch (const ValidationError& e) {
      return reply_error(res, 400, "bad_request", e.what());
    }
    reply(res, 200, scoreboard_json(contest_));
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      reply_error(res, 500, "internal", e.what());
    }
  });
}

OracleServer::~OracleServer() { stop(); }

int OracleServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw NetworkError("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw NetworkError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void OracleServer::run() { server_->listen_after_bind(); }

void OracleServer::stop() {
  if (server_) server_->stop();
}

// ---------------------------------------------------------------------------
// HTTP client

struct OracleClient::Impl {
  explicit Impl(const std::string& url) : client(url) {
    client.set_read_timeout(120, 0);
    client.set_connection_timeout(10, 0);
  }
  httplib::Client client;
};

OracleClient::OracleClient(const std::string& url) : impl_(std::make_unique<Impl>(url)) {
  if (!impl_->client.is_valid()) throw NetworkError("invalid server url '" + url + "'");
}

OracleClient::~OracleClient() = default;

RemoteSubmit OracleClient::submit(std::string_view image_id, const Pixmap& img) {
  const auto bytes = write_pgm(img);
  auto res = impl_->client.Post("/submit/" + std::string(image_id), std::string(bytes.begin(), bytes.end()),
                                "image/x-portable-graymap");
  if (!res) throw NetworkError("submit failed: " + httplib::to_string(res.error()));
  RemoteSubmit out;
  out.status = res->status;
  const json body = json::parse(res->body, nullptr, false);
  if (res->status == 200 && body.is_object()) {
    out.detected = body.value("detected", true);
    out.remaining = body.value("remaining", std::int64_t{0});
  } else if (body.is_object()) {
    out.error = body.value("error", std::string("unknown"));
    out.retry_after_ms = body.value("retry_after_ms", std::int64_t{0});
  }
  return out;
}

Pixmap OracleClient::image(std::string_view image_id) {
  auto res = impl_->client.Get("/images/" + std::string(image_id));
  if (!res) throw NetworkError("image fetch failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw NetworkError("image fetch returned status " + std::to_string(res->status));
  const auto* p = reinterpret_cast<const std::uint8_t*>(res->body.data());
  return read_pgm(std::span<const std::uint8_t>(p, res->body.size()));
}

std::string OracleClient::scoreboard_json() {
  auto res = impl_->client.Get("/scoreboard");
  if (!res) throw NetworkError("scoreboard fetch failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw NetworkError("scoreboard returned status " + std::to_string(res->status));
  return res->body;
}

}  // namespace bowslab
