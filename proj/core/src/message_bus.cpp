#include "hysectwin/message_bus.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <thread>

#include "hysectwin/error.hpp"

namespace hst {

const char* channel_name(Channel c) {
  return c == Channel::live ? "live" : "twin";
}

std::string Topic::str() const {
  std::string s = channel_name(channel);
  s += '/';
  s += thing_id;
  if (state_suffix) s += "/state";
  return s;
}

Topic Topic::make(Channel c, std::string thing_id, bool state) {
  return Topic{c, std::move(thing_id), state};
}

namespace {

std::vector<std::string> split_levels(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find('/', start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

Topic parse_topic(const std::string& s) {
  auto levels = split_levels(s);
  if (levels.size() < 2 || levels.size() > 3) {
    throw Error("parse_topic: expected <channel>/<thing_id>[/state], got '" +
                s + "'");
  }
  Topic t;
  if (levels[0] == "live" || levels[0] == "cps") {
    t.channel = Channel::live;  // cps aliases the active channel
  } else if (levels[0] == "twin") {
    t.channel = Channel::twin;
  } else {
    throw Error("parse_topic: unknown channel '" + levels[0] + "'");
  }
  if (levels[1].empty()) throw Error("parse_topic: empty thing_id in '" + s + "'");
  for (char c : levels[1]) {
    if (c == '+' || c == '#' || c == '/') {
      throw Error("parse_topic: reserved character '" + std::string(1, c) +
                  "' in thing_id '" + levels[1] + "'");
    }
  }
  t.thing_id = levels[1];
  if (levels.size() == 3) {
    if (levels[2] != "state") {
      throw Error("parse_topic: unexpected suffix '" + levels[2] + "'");
    }
    t.state_suffix = true;
  }
  return t;
}

TopicFilter TopicFilter::parse(const std::string& pattern) {
  if (pattern.empty()) throw Error("TopicFilter: empty pattern");
  auto levels = split_levels(pattern);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& lv = levels[i];
    if (lv.find('#') != std::string::npos) {
      if (lv != "#" || i + 1 != levels.size()) {
        throw Error("TopicFilter: '#' must be the final level: '" + pattern +
                    "'");
      }
    }
    if (lv.find('+') != std::string::npos && lv != "+") {
      throw Error("TopicFilter: '+' must occupy a whole level: '" + pattern +
                  "'");
    }
  }
  return TopicFilter{pattern};
}

bool TopicFilter::matches(const std::string& topic) const {
  auto f = split_levels(pattern);
  auto t = split_levels(topic);
  std::size_t i = 0;
  for (; i < f.size(); ++i) {
    if (f[i] == "#") return true;  // trailing multi-level
    if (i >= t.size()) return false;
    if (f[i] == "+") continue;
    if (f[i] != t[i]) return false;
  }
  return i == t.size();
}

nlohmann::json ObservationBody::to_json() const {
  nlohmann::json attrs = nlohmann::json::object();
  for (const auto& [k, v] : attributes) attrs[k] = v.to_json();
  nlohmann::json feats = nlohmann::json::object();
  for (const auto& [k, v] : features) feats[k] = v.to_json();
  return nlohmann::json{{"attributes", attrs}, {"features", feats}};
}

ObservationBody ObservationBody::from_json(const nlohmann::json& j) {
  ObservationBody body;
  if (j.contains("attributes")) {
    for (auto it = j["attributes"].begin(); it != j["attributes"].end(); ++it) {
      body.attributes[it.key()] = Value::from_json(it.value());
    }
  }
  if (j.contains("features")) {
    for (auto it = j["features"].begin(); it != j["features"].end(); ++it) {
      body.features[it.key()] = Value::from_json(it.value());
    }
  }
  return body;
}

DeviceObservation Envelope::to_observation() const {
  return DeviceObservation{thing_id, payload.attributes, payload.features,
                           ts_ms};
}

nlohmann::json Envelope::to_record_json() const {
  nlohmann::json j{{"topic", topic.str()},
                   {"seq", seq},
                   {"ts_ms", ts_ms},
                   {"payload", payload.to_json()}};
  if (campaign) j["campaign"] = *campaign;
  return j;
}

Envelope Envelope::from_record_json(const nlohmann::json& j) {
  Envelope env;
  env.topic = parse_topic(j.at("topic").get<std::string>());
  env.thing_id = env.topic.thing_id;
  env.seq = j.at("seq").get<std::uint64_t>();
  env.ts_ms = j.at("ts_ms").get<std::int64_t>();
  env.payload = ObservationBody::from_json(j.at("payload"));
  if (j.contains("campaign")) env.campaign = j["campaign"].get<std::string>();
  return env;
}

bool Subscription::try_pop(Envelope& out) {
  std::lock_guard lk(mu_);
  if (q_.empty()) return false;
  out = std::move(q_.front());
  q_.pop_front();
  return true;
}

bool Subscription::pop_wait(Envelope& out, int timeout_ms) {
  std::unique_lock lk(mu_);
  cv_.wait_for(lk, std::chrono::milliseconds(timeout_ms),
               [&] { return !q_.empty() || cancelled_; });
  if (q_.empty()) return false;
  out = std::move(q_.front());
  q_.pop_front();
  return true;
}

std::size_t Subscription::pending() const {
  std::lock_guard lk(mu_);
  return q_.size();
}

void Subscription::cancel() {
  cancelled_ = true;
  cv_.notify_all();
}

void Subscription::push(const Envelope& env) {
  {
    std::lock_guard lk(mu_);
    q_.push_back(env);
  }
  cv_.notify_one();
}

Bus::Bus() : origin_(std::chrono::steady_clock::now()) {}

double Bus::wall_now_ms() const {
  auto d = std::chrono::steady_clock::now() - origin_;
  return std::chrono::duration<double, std::milli>(d).count();
}

DeliveryReceipt Bus::publish(Envelope env) {
  if (shutdown_) throw Error("Bus: publish rejected after shutdown");
  env.pub_wall_ms = wall_now_ms();
  const std::string topic = env.topic.str();
  DeliveryReceipt receipt;
  std::lock_guard lk(mu_);
  for (auto& sub : subs_) {
    if (sub->cancelled()) continue;
    if (sub->filter_.matches(topic)) {
      sub->push(env);
      ++receipt.delivered_to;
    }
  }
  ++published_;
  delivered_ += static_cast<std::uint64_t>(receipt.delivered_to);
  return receipt;
}

std::shared_ptr<Subscription> Bus::subscribe(const TopicFilter& filter) {
  TopicFilter::parse(filter.pattern);  // validate
  auto sub = std::make_shared<Subscription>();
  sub->filter_ = filter;
  std::lock_guard lk(mu_);
  subs_.erase(std::remove_if(subs_.begin(), subs_.end(),
                             [](const auto& s) { return s->cancelled(); }),
              subs_.end());
  subs_.push_back(sub);
  return sub;
}

void Bus::shutdown() {
  shutdown_ = true;
  std::lock_guard lk(mu_);
  for (auto& sub : subs_) sub->cancel();
}

Recorder::Recorder(Bus& bus, const TopicFilter& filter,
                   const std::string& path) {
  sub_ = bus.subscribe(filter);
  f_ = std::fopen(path.c_str(), "w");
  if (!f_) throw Error("Recorder: cannot open '" + path + "'");
}

Recorder::~Recorder() { close(); }

std::uint64_t Recorder::drain() {
  if (!f_) return 0;
  Envelope env;
  std::uint64_t n = 0;
  while (sub_->try_pop(env)) {
    std::string line = env.to_record_json().dump();
    line += '\n';
    std::fwrite(line.data(), 1, line.size(), f_);
    ++count_;
    ++n;
  }
  return n;
}

void Recorder::close() {
  if (f_) {
    drain();
    std::fclose(f_);
    f_ = nullptr;
  }
  if (sub_) sub_->cancel();
}

std::uint64_t replay(Bus& bus, const std::string& path,
                     const ReplayOptions& opts) {
  if (opts.speed < 0) throw Error("replay: speed must be >= 0");
  std::ifstream in(path);
  if (!in) throw Error("replay: cannot open '" + path + "'");
  std::string line;
  std::uint64_t count = 0;
  std::uint64_t line_no = 0;
  std::int64_t first_ts = 0;
  std::int64_t prev_ts = 0;
  bool have_first = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Envelope env;
    try {
      env = Envelope::from_record_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw Error("replay: corrupt record at line " + std::to_string(line_no) +
                  ": " + e.what());
    }
    if (!have_first) {
      first_ts = env.ts_ms;
      prev_ts = env.ts_ms;
      have_first = true;
    }
    if (opts.speed > 0 && env.ts_ms > prev_ts) {
      auto gap = std::chrono::duration<double, std::milli>(
          static_cast<double>(env.ts_ms - prev_ts) / opts.speed);
      std::this_thread::sleep_for(gap);
    }
    prev_ts = env.ts_ms;
    if (!opts.preserve_ts) env.ts_ms = opts.now_ms + (env.ts_ms - first_ts);
    bus.publish(std::move(env));
    ++count;
  }
  return count;
}

TcpIngest::TcpIngest(Bus& bus, std::uint16_t port) : bus_(bus) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error("TcpIngest: socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
      0) {
    ::close(listen_fd_);
    throw Error("TcpIngest: bind() failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  if (::listen(listen_fd_, 8) < 0) {
    ::close(listen_fd_);
    throw Error("TcpIngest: listen() failed");
  }
  running_ = true;
  thread_ = std::thread([this] { accept_loop(); });
}

TcpIngest::~TcpIngest() { stop(); }

void TcpIngest::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (thread_.joinable()) thread_.join();
}

void TcpIngest::accept_loop() {
  while (running_) {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    std::string buf;
    char chunk[4096];
    ssize_t n;
    while ((n = ::read(fd, chunk, sizeof(chunk))) > 0) {
      buf.append(chunk, static_cast<std::size_t>(n));
      std::size_t pos;
      while ((pos = buf.find('\n')) != std::string::npos) {
        std::string line = buf.substr(0, pos);
        buf.erase(0, pos + 1);
        if (line.empty()) continue;
        try {
          bus_.publish(Envelope::from_record_json(nlohmann::json::parse(line)));
          ++ingested_;
        } catch (const std::exception&) {
          // malformed external line: dropped, connection stays open
        }
      }
    }
    ::close(fd);
  }
}

}  // namespace hst
