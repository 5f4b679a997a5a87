#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hysectwin/semantic_model.hpp"
#include "hysectwin/value.hpp"

namespace hst {

enum class Channel { live, twin };

const char* channel_name(Channel c);

/// Topic string form: `<channel>/<thing_id>[/state]`. `cps` parses as an
/// alias of `live` and is canonicalized to `live` in all outputs.
struct Topic {
  Channel channel = Channel::live;
  std::string thing_id;
  bool state_suffix = false;

  std::string str() const;
  static Topic make(Channel c, std::string thing_id, bool state = true);
};

/// Parses a topic string; throws naming the offending part on an unknown
/// channel, empty thing id, or reserved characters.
Topic parse_topic(const std::string& s);

/// MQTT 3.1.1 wildcard filter: `+` matches one level, `#` (final level
/// only) matches the rest.
struct TopicFilter {
  std::string pattern;

  static TopicFilter parse(const std::string& pattern);  // validates syntax
  bool matches(const std::string& topic) const;
  bool matches(const Topic& t) const { return matches(t.str()); }
};

/// Envelope payload: the observation body (attributes + features).
struct ObservationBody {
  std::map<std::string, Value> attributes;
  std::map<std::string, Value> features;

  nlohmann::json to_json() const;
  static ObservationBody from_json(const nlohmann::json& j);
};

struct Envelope {
  Topic topic;
  std::string thing_id;  // equals topic.thing_id
  std::uint64_t seq = 0;
  std::int64_t ts_ms = 0;  // source timestamp, set at creation, never rewritten
  ObservationBody payload;
  std::optional<std::string> campaign;

  // Transport stamp on the harness monotonic timeline (ms since run
  // origin); set by the bus at publish, not serialized.
  double pub_wall_ms = 0.0;

  DeviceObservation to_observation() const;
  nlohmann::json to_record_json() const;
  static Envelope from_record_json(const nlohmann::json& j);
};

struct DeliveryReceipt {
  int delivered_to = 0;
};

/// One subscriber's delivery queue. Single consumer.
class Subscription {
 public:
  bool try_pop(Envelope& out);
  /// Blocks up to timeout; false on timeout or cancellation with an
  /// empty queue.
  bool pop_wait(Envelope& out, int timeout_ms);
  std::size_t pending() const;
  void cancel();
  bool cancelled() const { return cancelled_; }

 private:
  friend class Bus;
  void push(const Envelope& env);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Envelope> q_;
  std::atomic<bool> cancelled_{false};
  TopicFilter filter_;
};

/// In-process pub/sub with MQTT topic semantics. QoS-0: at-most-once,
/// no retained messages, per-topic FIFO per publisher. Safe for
/// concurrent publishers.
class Bus {
 public:
  Bus();

  DeliveryReceipt publish(Envelope env);  // throws after shutdown
  std::shared_ptr<Subscription> subscribe(const TopicFilter& filter);
  void shutdown();
  bool is_shutdown() const { return shutdown_; }

  std::uint64_t published_total() const { return published_; }
  std::uint64_t delivered_total() const { return delivered_; }

  /// Milliseconds since bus creation on the monotonic clock.
  double wall_now_ms() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;
  std::atomic<bool> shutdown_{false};
  std::atomic<std::uint64_t> published_{0};
  std::atomic<std::uint64_t> delivered_{0};
  std::chrono::steady_clock::time_point origin_;
};

/// Taps matching envelopes into a line-delimited JSON record file.
/// drain() must be called periodically (or once at end) to flush the
/// subscription queue to disk.
class Recorder {
 public:
  Recorder(Bus& bus, const TopicFilter& filter, const std::string& path);
  ~Recorder();

  std::uint64_t drain();  // writes queued envelopes; returns new count
  void close();
  std::uint64_t count() const { return count_; }

 private:
  std::shared_ptr<Subscription> sub_;
  FILE* f_ = nullptr;
  std::uint64_t count_ = 0;
};

struct ReplayOptions {
  double speed = 0.0;       // 0 = as fast as possible; 1.0 = original pacing
  bool preserve_ts = true;  // false: shift all ts_ms by a constant to `now`
  std::int64_t now_ms = 0;  // target origin when preserve_ts is false
};

/// Republishes a record file; returns the number of envelopes published.
/// A corrupt line aborts with its line number.
std::uint64_t replay(Bus& bus, const std::string& path,
                     const ReplayOptions& opts = {});

/// Optional TCP listener: accepts connections on 127.0.0.1 and publishes
/// each received record line to the bus. Line format is identical to the
/// record file.
class TcpIngest {
 public:
  TcpIngest(Bus& bus, std::uint16_t port);  // port 0 picks an ephemeral port
  ~TcpIngest();

  std::uint16_t port() const { return port_; }
  std::uint64_t ingested() const { return ingested_; }
  void stop();

 private:
  void accept_loop();

  Bus& bus_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::uint64_t> ingested_{0};
  std::thread thread_;
};

}  // namespace hst
