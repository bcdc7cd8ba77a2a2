#include "rrl/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "rrl/error.hpp"

namespace rrl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

HttpResponse respond(int status, json body) {
  body["schema_version"] = kServiceSchemaVersion;
  return {status, body.dump()};
}

HttpResponse error(int status, const std::string& message) { return respond(status, {{"error", message}}); }

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  return true;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json timeline_json(const DecisionTimeline& t) {
  json a = json::array();
  for (bool e : t.enter) a.push_back(e ? "enter" : "wait");
  return a;
}

std::vector<bool> parse_decisions(const json& a) {
  if (!a.is_array()) throw ParseError("decisions must be an array");
  std::vector<bool> out;
  out.reserve(a.size());
  for (const auto& d : a) {
    if (d == "enter") {
      out.push_back(true);
    } else if (d == "wait") {
      out.push_back(false);
    } else {
      throw ParseError("decisions entries must be \"enter\" or \"wait\"");
    }
  }
  return out;
}

json record_json(const DecisionLogRecord& r) {
  json d = json::array();
  for (bool e : r.decisions) d.push_back(e ? "enter" : "wait");
  return {{"schema_version", kServiceSchemaVersion},
          {"scenario_id", r.scenario_id},
          {"user_id", r.user_id},
          {"decisions", std::move(d)},
          {"submitted_at", r.submitted_at}};
}

json frame_json(const ReplayRecord& r) {
  json vehicles = json::array();
  for (const auto& v : r.vehicles)
    vehicles.push_back({{"id", v.id},
                        {"role", to_string(v.role)},
                        {"x", v.x},
                        {"y", v.y},
                        {"heading", v.heading},
                        {"speed", v.speed},
                        {"length", v.length},
                        {"width", v.width}});
  return {{"t", r.t}, {"vehicles", std::move(vehicles)}};
}

}  // namespace

std::vector<DecisionLogRecord> read_decision_log(const fs::path& path) {
  std::vector<DecisionLogRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("scenario_id").get<std::string>(), j.at("user_id").get<std::string>(),
                     parse_decisions(j.at("decisions")), j.value("submitted_at", std::string{})});
    } catch (const json::exception&) {
      throw ParseError("decision log " + path.string() + " line " + std::to_string(n) + ": malformed record");
    }
  }
  return out;
}

DecisionService::DecisionService(fs::path data_dir, std::optional<Checkpoint> checkpoint)
    : data_dir_(std::move(data_dir)), checkpoint_(std::move(checkpoint)) {
  if (checkpoint_) {
    net_.emplace(checkpoint_->config);
    params_ = to_double(checkpoint_->params);
  }
}

std::optional<fs::path> DecisionService::scenario_path(const std::string& id) const {
  if (!valid_id(id)) return std::nullopt;
  fs::path p = data_dir_ / "scenarios" / (id + ".jsonl");
  if (!fs::is_regular_file(p)) return std::nullopt;
  return p;
}

fs::path DecisionService::decisions_path(const std::string& id) const {
  return data_dir_ / "decisions" / (id + ".jsonl");
}

HttpResponse DecisionService::list_scenarios() const {
  json list = json::array();
  const fs::path dir = data_dir_ / "scenarios";
  std::vector<fs::path> files;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".jsonl" && valid_id(e.path().stem().string()))
        files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      const ScenarioLog log = read_scenario_file(f);
      list.push_back({{"id", f.stem().string()},
                      {"frame_count", log.frame_count()},
                      {"frame_period", log.frame_period}});
    } catch (const std::exception&) {
      // Unreadable logs are not offered.
    }
  }
  return respond(200, {{"scenarios", std::move(list)}});
}

HttpResponse DecisionService::get_scenario(const std::string& id) const {
  const auto path = scenario_path(id);
  if (!path) return error(404, "unknown scenario '" + id + "'");
  ScenarioLog log;
  try {
    log = read_scenario_file(*path);
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
  json frames = json::array();
  for (const auto& r : log.records) frames.push_back(frame_json(r));
  return respond(200, {{"id", id},
                       {"entry", log.entry},
                       {"frame_period", log.frame_period},
                       {"frame_count", log.frame_count()},
                       {"layout", layout_to_json(*log.layout)},
                       {"stop_line",
                        {{"a", {log.layout->stop_line(log.entry).a.x, log.layout->stop_line(log.entry).a.y}},
                         {"b", {log.layout->stop_line(log.entry).b.x, log.layout->stop_line(log.entry).b.y}}}},
                       {"frames", std::move(frames)}});
}

HttpResponse DecisionService::post_decisions(const std::string& id, const std::string& body) {
  const auto path = scenario_path(id);
  if (!path) return error(404, "unknown scenario '" + id + "'");
  std::size_t frame_count = 0;
  try {
    frame_count = read_scenario_file(*path).frame_count();
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
  DecisionLogRecord rec;
  rec.scenario_id = id;
  try {
    const json j = json::parse(body);
    if (!j.is_object()) return error(400, "body must be an object");
    if (!j.contains("user_id") || !j.at("user_id").is_string() || j.at("user_id").get<std::string>().empty())
      return error(400, "user_id must be a non-empty string");
    if (!j.contains("decisions")) return error(400, "missing decisions");
    rec.user_id = j.at("user_id").get<std::string>();
    rec.decisions = parse_decisions(j.at("decisions"));
  } catch (const json::exception&) {
    return error(400, "body is not valid JSON");
  } catch (const ParseError& e) {
    return error(400, e.what());
  }
  if (rec.decisions.size() != frame_count)
    return error(400, "decisions has " + std::to_string(rec.decisions.size()) + " entries but the scenario has " +
                          std::to_string(frame_count) + " frames");
  rec.submitted_at = utc_now();
  {
    std::lock_guard lock(append_mu_);
    fs::create_directories(decisions_path(id).parent_path());
    std::ofstream out(decisions_path(id), std::ios::app);
    if (!out) return error(500, "cannot append decision log");
    out << record_json(rec).dump() << '\n';
    out.flush();
    if (!out) return error(500, "cannot append decision log");
  }
  return respond(201, {{"scenario_id", id},
                       {"user_id", rec.user_id},
                       {"frame_count", frame_count},
                       {"submitted_at", rec.submitted_at}});
}

HttpResponse DecisionService::comparison(const std::string& id, const std::optional<std::string>& aggr_text) const {
  const auto path = scenario_path(id);
  if (!path) return error(404, "unknown scenario '" + id + "'");
  double aggr = 0.5;
  if (aggr_text) {
    std::size_t used = 0;
    try {
      aggr = std::stod(*aggr_text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != aggr_text->size() || !std::isfinite(aggr))
      return error(400, "aggr must be a finite number");
  }
  if (!net_) return error(409, "no checkpoint configured for comparisons");
  ScenarioLog log;
  std::vector<DecisionLogRecord> records;
  try {
    log = read_scenario_file(*path);
    std::lock_guard lock(append_mu_);
    records = read_decision_log(decisions_path(id));
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
  std::vector<DecisionTimeline> users;
  for (const auto& r : records)
    if (r.decisions.size() == log.frame_count()) users.push_back({r.decisions, "user " + r.user_id});
  const DecisionTimeline net = replay_decisions(*net_, params_, log, aggr);
  json profiles = json::array();
  if (!users.empty()) {
    const auto counters = decision_counters(users);
    for (const auto& p : standard_profiles(static_cast<int>(users.size()))) {
      const DecisionTimeline prof = profile_from_counters(counters, p);
      json overlap = json::array();
      for (auto o : overlap_bands(net, prof)) overlap.push_back(to_string(o));
      profiles.push_back({{"name", p.name()},
                          {"timeline", timeline_json(prof)},
                          {"match", match_percentage(net, prof)},
                          {"overlap", std::move(overlap)}});
    }
  }
  return respond(200, {{"scenario_id", id},
                       {"aggressiveness", aggr},
                       {"frame_count", log.frame_count()},
                       {"user_count", users.size()},
                       {"net", timeline_json(net)},
                       {"profiles", std::move(profiles)}});
}

void DecisionService::serve(const std::string& host, int port) {
  httplib::Server server;
  auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  server.Get("/api/scenarios", [&](const httplib::Request&, httplib::Response& res) { send(res, list_scenarios()); });
  server.Get(R"(/api/scenarios/([^/]+))", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, get_scenario(req.matches[1]));
  });
  server.Post(R"(/api/scenarios/([^/]+)/decisions)", [&](const httplib::Request& req, httplib::Response& res) {
    send(res, post_decisions(req.matches[1], req.body));
  });
  server.Get(R"(/api/scenarios/([^/]+)/comparison)", [&](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> aggr;
    if (req.has_param("aggr")) aggr = req.get_param_value("aggr");
    send(res, comparison(req.matches[1], aggr));
  });
  if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
}

fs::path resolve_data_dir(const fs::path& flag_value) {
  if (const char* env = std::getenv("RRL_DATA_DIR"); env && *env) return env;
  return flag_value;
}

}  // namespace rrl
