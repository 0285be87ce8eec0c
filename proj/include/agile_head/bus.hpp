#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace agile_head::bus {

inline constexpr std::uint16_t kDefaultPort = 7447;
inline constexpr std::size_t kMaxTopicBytes = 64;
inline constexpr std::size_t kMaxFrameBytes = 64u << 20;
inline constexpr std::size_t kDefaultQueueCapacity = 16;

/// Reserved control topics a client sends to the broker. Ordinary traffic may
/// not use the "__bus/" prefix.
inline constexpr std::string_view kSubscribeTopic = "__bus/subscribe";
inline constexpr std::string_view kUnsubscribeTopic = "__bus/unsubscribe";
inline constexpr std::string_view kAdvertiseTopic = "__bus/advertise";

struct Message {
    std::string topic;
    std::uint64_t seq = 0;
    std::int64_t stamp_us = 0;
    nlohmann::ordered_json payload = nlohmann::ordered_json::object();

    bool operator==(const Message&) const = default;
};

/// Non-empty, at most 64 bytes, characters [a-z0-9_/].
bool valid_topic(std::string_view topic);
bool is_control_topic(std::string_view topic);

/// 4-byte big-endian length N followed by N bytes of minified JSON with keys
/// in the order topic, seq, stamp_us, payload.
/// Throws ErrorCode::TopicInvalid for a bad topic.
std::string encode(const Message& m);

/// Decodes exactly one complete frame. Throws ErrorCode::MalformedFrame on a
/// short or over-long buffer, bad JSON or missing fields, and
/// ErrorCode::TopicInvalid on a bad topic.
Message decode(std::span<const std::uint8_t> frame);
Message decode(std::string_view frame);

/// Incremental splitter for a byte stream of frames.
class FrameReader {
public:
    void feed(std::span<const std::uint8_t> bytes);

    /// Next complete frame including its length prefix, if buffered.
    /// Throws ErrorCode::MalformedFrame on an oversize length.
    std::optional<std::string> next_frame();

    std::size_t buffered() const { return buf_.size() - pos_; }

private:
    std::string buf_;
    std::size_t pos_ = 0;
};

/// Parses "host:port"; a bare host uses the default port.
std::pair<std::string, std::uint16_t> parse_address(std::string_view addr);

/// Address from AGILE_HEAD_BROKER when set, else `fallback`.
std::string broker_address_from_env(std::string_view fallback);

/// Bounded latest-wins FIFO: pushing onto a full queue drops the oldest entry.
template <typename T>
class LatestWinsQueue {
public:
    explicit LatestWinsQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

    /// Returns false when an older element had to be dropped.
    bool push(T value)
    {
        bool kept_all = true;
        {
            std::lock_guard lock(mu_);
            if (items_.size() >= capacity_) {
                items_.pop_front();
                ++dropped_;
                kept_all = false;
            }
            items_.push_back(std::move(value));
        }
        cv_.notify_one();
        return kept_all;
    }

    /// Blocks until an element is available or the queue is closed and drained.
    std::optional<T> pop()
    {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) {
            return std::nullopt;
        }
        T v = std::move(items_.front());
        items_.pop_front();
        return v;
    }

    /// Like pop() but gives up after `timeout`.
    template <typename Rep, typename Period>
    std::optional<T> pop_for(std::chrono::duration<Rep, Period> timeout)
    {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, timeout, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) {
            return std::nullopt;
        }
        T v = std::move(items_.front());
        items_.pop_front();
        return v;
    }

    std::optional<T> try_pop()
    {
        std::lock_guard lock(mu_);
        if (items_.empty()) {
            return std::nullopt;
        }
        T v = std::move(items_.front());
        items_.pop_front();
        return v;
    }

    void close()
    {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    std::size_t size() const
    {
        std::lock_guard lock(mu_);
        return items_.size();
    }

    std::size_t dropped() const
    {
        std::lock_guard lock(mu_);
        return dropped_;
    }

    std::size_t capacity() const { return capacity_; }

private:
    std::size_t capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<T> items_;
    std::size_t dropped_ = 0;
    bool closed_ = false;
};

struct BrokerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = kDefaultPort;  // 0 picks an ephemeral port
    std::size_t outbound_capacity = 4096;  // frames queued per connection
};

/// Topic router. Each connection gets a reader and a writer thread; frames are
/// forwarded byte-for-byte, so per-connection order is preserved end to end.
class Broker {
public:
    explicit Broker(BrokerOptions opts = {});
    ~Broker();

    Broker(const Broker&) = delete;
    Broker& operator=(const Broker&) = delete;

    /// Binds and starts accepting. Throws ErrorCode::BindError.
    void start();
    void stop();

    std::uint16_t port() const { return port_; }
    std::size_t connection_count() const;
    std::size_t subscriber_count(const std::string& topic) const;
    std::uint64_t routed() const { return routed_.load(); }

private:
    struct Connection;

    void accept_loop();
    void reader_loop(const std::shared_ptr<Connection>& conn);
    void writer_loop(const std::shared_ptr<Connection>& conn);
    void route(const std::string& topic, const std::shared_ptr<const std::string>& frame);
    void drop_connection(const std::shared_ptr<Connection>& conn);
    void reap_finished();

    BrokerOptions opts_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;

    mutable std::mutex mu_;
    std::list<std::shared_ptr<Connection>> connections_;
    std::map<std::string, std::set<Connection*>> routes_;
    std::atomic<std::uint64_t> routed_{0};
};

/// Node-side connection. publish() and subscribe() may be called from
/// different threads; each subscription runs its handler on its own thread,
/// one message at a time.
class Client {
public:
    using Handler = std::function<void(const Message&)>;

    /// Throws ErrorCode::Disconnected when the broker is unreachable.
    Client(const std::string& host, std::uint16_t port);
    explicit Client(std::string_view address);
    ~Client();

    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void advertise(const std::string& topic);

    /// Assigns the next per-topic sequence number (starting at 1) and sends.
    /// Returns the sequence number used.
    std::uint64_t publish(const std::string& topic, nlohmann::ordered_json payload,
                          std::int64_t stamp_us);

    /// Sends a fully formed message unchanged.
    void publish_raw(const Message& m);

    void subscribe(const std::string& topic, Handler handler,
                   std::size_t capacity = kDefaultQueueCapacity);

    bool connected() const { return connected_.load(); }

    /// Blocks until the broker connection drops or close() is called.
    void wait_disconnected();

    /// Stops delivery and closes the socket. Pending queued messages are
    /// still handed to their handlers before the subscription threads exit.
    void close();

    std::uint64_t received(const std::string& topic) const;
    std::size_t dropped(const std::string& topic) const;

private:
    struct Subscription {
        std::string topic;
        Handler handler;
        LatestWinsQueue<Message> queue;
        std::atomic<std::uint64_t> received{0};
        std::thread worker;

        Subscription(std::string t, Handler h, std::size_t cap)
            : topic(std::move(t)), handler(std::move(h)), queue(cap) {}
    };

    void send_frame(const std::string& frame);
    void reader_loop();
    void mark_disconnected();

    int fd_ = -1;
    std::atomic<bool> connected_{false};
    std::atomic<bool> closing_{false};
    std::mutex send_mu_;
    std::mutex seq_mu_;
    std::map<std::string, std::uint64_t> next_seq_;

    mutable std::mutex subs_mu_;
    std::map<std::string, std::unique_ptr<Subscription>> subs_;

    std::mutex state_mu_;
    std::condition_variable state_cv_;
    std::thread reader_;
};

}  // namespace agile_head::bus
