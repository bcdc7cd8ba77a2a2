#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "rrl/evaluation.hpp"
#include "rrl/policy_net.hpp"
#include "rrl/replay.hpp"

namespace rrl {

inline constexpr int kServiceSchemaVersion = 1;

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON document
};

/// Persisted user decisions for one scenario; one JSON line per record in
/// `<data_dir>/decisions/<scenario_id>.jsonl`.
struct DecisionLogRecord {
  std::string scenario_id;
  std::string user_id;
  std::vector<bool> decisions;  // per frame, true = enter
  std::string submitted_at;     // ISO 8601 UTC
};

/// Reads every record of a decisions file. Throws ParseError on a bad line.
std::vector<DecisionLogRecord> read_decision_log(const std::filesystem::path& path);

/// Request handlers behind the decision capture endpoints. Scenarios are the
/// replay logs `<data_dir>/scenarios/<id>.jsonl`.
///
///   GET  /api/scenarios                       -> {schema_version, scenarios:[{id, frame_count, frame_period}]}
///   GET  /api/scenarios/{id}                  -> {schema_version, id, entry, frame_period, frame_count,
///                                                 layout, frames:[replay records]}
///   POST /api/scenarios/{id}/decisions        <- {user_id, decisions:["enter"|"wait", ...]}
///                                             -> {schema_version, scenario_id, user_id, frame_count, submitted_at}
///   GET  /api/scenarios/{id}/comparison?aggr= -> {schema_version, scenario_id, aggressiveness, frame_count,
///                                                 user_count, net:[...], profiles:[{name, timeline, match, overlap}]}
///
/// Errors are `{schema_version, error}` with status 400 (validation), 404
/// (unknown scenario) or 409 (comparison without a checkpoint).
class DecisionService {
 public:
  explicit DecisionService(std::filesystem::path data_dir, std::optional<Checkpoint> checkpoint = std::nullopt);

  [[nodiscard]] HttpResponse list_scenarios() const;
  [[nodiscard]] HttpResponse get_scenario(const std::string& id) const;
  HttpResponse post_decisions(const std::string& id, const std::string& body);
  [[nodiscard]] HttpResponse comparison(const std::string& id, const std::optional<std::string>& aggr) const;

  [[nodiscard]] const std::filesystem::path& data_dir() const { return data_dir_; }

  /// Serves the endpoints until the process is stopped. Throws
  /// std::runtime_error when the port cannot be bound.
  void serve(const std::string& host, int port);

 private:
  [[nodiscard]] std::optional<std::filesystem::path> scenario_path(const std::string& id) const;
  [[nodiscard]] std::filesystem::path decisions_path(const std::string& id) const;

  std::filesystem::path data_dir_;
  std::optional<Checkpoint> checkpoint_;
  std::optional<PolicyNetwork> net_;
  std::vector<double> params_;
  mutable std::mutex append_mu_;
};

/// The `RRL_DATA_DIR` environment variable when set, otherwise `flag_value`.
std::filesystem::path resolve_data_dir(const std::filesystem::path& flag_value);

}  // namespace rrl
