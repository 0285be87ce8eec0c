#include "agile_head/bus.hpp"

#include "agile_head/error.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

namespace agile_head::bus {

namespace {

constexpr std::string_view kControlPrefix = "__bus/";

std::uint32_t read_be32(const std::uint8_t* p)
{
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
           std::uint32_t{p[3]};
}

void append_be32(std::string& out, std::uint32_t v)
{
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

bool send_all(int fd, const char* data, std::size_t len)
{
    while (len > 0) {
        const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            return false;
        }
        data += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

void set_nodelay(int fd)
{
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

std::string control_target(const Message& m)
{
    if (!m.payload.is_object() || !m.payload.contains("topic") || !m.payload["topic"].is_string()) {
        throw Error(ErrorCode::MalformedFrame, "control message without topic");
    }
    auto topic = m.payload["topic"].get<std::string>();
    if (!valid_topic(topic) || is_control_topic(topic)) {
        throw Error(ErrorCode::TopicInvalid, "bad topic '" + topic + "'");
    }
    return topic;
}

}  // namespace

bool valid_topic(std::string_view topic)
{
    if (topic.empty() || topic.size() > kMaxTopicBytes) {
        return false;
    }
    for (char c : topic) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '/';
        if (!ok) {
            return false;
        }
    }
    return true;
}

bool is_control_topic(std::string_view topic)
{
    return topic.substr(0, kControlPrefix.size()) == kControlPrefix;
}

std::string encode(const Message& m)
{
    if (!valid_topic(m.topic)) {
        throw Error(ErrorCode::TopicInvalid, "bad topic '" + m.topic + "'");
    }
    nlohmann::ordered_json j;
    j["topic"] = m.topic;
    j["seq"] = m.seq;
    j["stamp_us"] = m.stamp_us;
    j["payload"] = m.payload;
    const std::string body = j.dump();
    if (body.size() > kMaxFrameBytes) {
        throw Error(ErrorCode::MalformedFrame, "message exceeds maximum frame size");
    }
    std::string out;
    out.reserve(4 + body.size());
    append_be32(out, static_cast<std::uint32_t>(body.size()));
    out += body;
    return out;
}

Message decode(std::span<const std::uint8_t> frame)
{
    if (frame.size() < 4) {
        throw Error(ErrorCode::MalformedFrame, "frame shorter than its length prefix");
    }
    const std::uint32_t len = read_be32(frame.data());
    if (len > kMaxFrameBytes) {
        throw Error(ErrorCode::MalformedFrame, "declared length exceeds maximum");
    }
    if (frame.size() - 4 < len) {
        throw Error(ErrorCode::MalformedFrame, "incomplete frame: declared " + std::to_string(len) +
                                                   " bytes, have " + std::to_string(frame.size() - 4));
    }
    if (frame.size() - 4 > len) {
        throw Error(ErrorCode::MalformedFrame, "trailing bytes after frame");
    }

    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(frame.begin() + 4, frame.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedFrame, e.what());
    }
    if (!j.is_object()) {
        throw Error(ErrorCode::MalformedFrame, "frame body is not a JSON object");
    }
    Message m;
    try {
        const auto& topic = j.at("topic");
        const auto& seq = j.at("seq");
        const auto& stamp = j.at("stamp_us");
        if (!topic.is_string() || !seq.is_number_unsigned() || !stamp.is_number_integer()) {
            throw Error(ErrorCode::MalformedFrame, "envelope field has the wrong type");
        }
        m.topic = topic.get<std::string>();
        m.seq = seq.get<std::uint64_t>();
        m.stamp_us = stamp.get<std::int64_t>();
        m.payload = j.at("payload");
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedFrame, e.what());
    }
    if (!valid_topic(m.topic)) {
        throw Error(ErrorCode::TopicInvalid, "bad topic '" + m.topic + "'");
    }
    return m;
}

Message decode(std::string_view frame)
{
    return decode(std::span(reinterpret_cast<const std::uint8_t*>(frame.data()), frame.size()));
}

void FrameReader::feed(std::span<const std::uint8_t> bytes)
{
    if (pos_ > 0 && pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    }
    buf_.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::optional<std::string> FrameReader::next_frame()
{
    if (buffered() < 4) {
        return std::nullopt;
    }
    const std::uint32_t len = read_be32(reinterpret_cast<const std::uint8_t*>(buf_.data() + pos_));
    if (len > kMaxFrameBytes) {
        throw Error(ErrorCode::MalformedFrame, "declared length exceeds maximum");
    }
    if (buffered() < 4 + std::size_t{len}) {
        return std::nullopt;
    }
    std::string frame = buf_.substr(pos_, 4 + std::size_t{len});
    pos_ += 4 + std::size_t{len};
    if (pos_ > (1u << 20) && pos_ * 2 > buf_.size()) {
        buf_.erase(0, pos_);
        pos_ = 0;
    }
    return frame;
}

std::pair<std::string, std::uint16_t> parse_address(std::string_view addr)
{
    const auto colon = addr.rfind(':');
    if (colon == std::string_view::npos) {
        return {std::string(addr.empty() ? "127.0.0.1" : addr), kDefaultPort};
    }
    const std::string port_str(addr.substr(colon + 1));
    char* end = nullptr;
    const long port = std::strtol(port_str.c_str(), &end, 10);
    if (port_str.empty() || *end != '\0' || port < 0 || port > 65535) {
        throw Error(ErrorCode::ConfigError, "bad broker address '" + std::string(addr) + "'");
    }
    std::string host(addr.substr(0, colon));
    if (host.empty()) {
        host = "127.0.0.1";
    }
    return {host, static_cast<std::uint16_t>(port)};
}

std::string broker_address_from_env(std::string_view fallback)
{
    if (const char* env = std::getenv("AGILE_HEAD_BROKER"); env != nullptr && *env != '\0') {
        return env;
    }
    return std::string(fallback);
}

// ---------------------------------------------------------------------------
// Broker

struct Broker::Connection {
    int fd = -1;
    std::thread reader;
    std::thread writer;
    LatestWinsQueue<std::shared_ptr<const std::string>> outbound;
    std::set<std::string> subscriptions;
    std::set<std::string> advertised;
    std::atomic<int> live_threads{2};

    explicit Connection(int f, std::size_t cap) : fd(f), outbound(cap) {}
};

Broker::Broker(BrokerOptions opts) : opts_(std::move(opts)) {}

Broker::~Broker()
{
    stop();
}

void Broker::start()
{
    if (running_) {
        return;
    }
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(opts_.port);
    if (::getaddrinfo(opts_.host.c_str(), port_str.c_str(), &hints, &res) != 0 || res == nullptr) {
        throw Error(ErrorCode::BindError, "cannot resolve " + opts_.host);
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        throw Error(ErrorCode::BindError, std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 64) != 0) {
        const std::string why = std::strerror(errno);
        ::freeaddrinfo(res);
        ::close(fd);
        throw Error(ErrorCode::BindError, opts_.host + ":" + port_str + ": " + why);
    }
    ::freeaddrinfo(res);

    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    listen_fd_ = fd;
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
}

void Broker::stop()
{
    if (!running_.exchange(false)) {
        return;
    }
    if (accept_thread_.joinable()) {
        accept_thread_.join();
    }
    ::close(listen_fd_);
    listen_fd_ = -1;

    std::list<std::shared_ptr<Connection>> conns;
    {
        std::lock_guard lock(mu_);
        conns = connections_;
    }
    for (auto& c : conns) {
        ::shutdown(c->fd, SHUT_RDWR);
        c->outbound.close();
    }
    for (auto& c : conns) {
        if (c->reader.joinable()) {
            c->reader.join();
        }
        if (c->writer.joinable()) {
            c->writer.join();
        }
        ::close(c->fd);
    }
    std::lock_guard lock(mu_);
    connections_.clear();
    routes_.clear();
}

std::size_t Broker::connection_count() const
{
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& c : connections_) {
        n += c->live_threads.load() == 2 ? 1 : 0;
    }
    return n;
}

std::size_t Broker::subscriber_count(const std::string& topic) const
{
    std::lock_guard lock(mu_);
    const auto it = routes_.find(topic);
    return it == routes_.end() ? 0 : it->second.size();
}

void Broker::accept_loop()
{
    while (running_) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, 100);
        reap_finished();
        if (ready <= 0 || !(pfd.revents & POLLIN)) {
            continue;
        }
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            continue;
        }
        set_nodelay(fd);
        auto conn = std::make_shared<Connection>(fd, opts_.outbound_capacity);
        {
            std::lock_guard lock(mu_);
            connections_.push_back(conn);
        }
        conn->reader = std::thread([this, conn] { reader_loop(conn); });
        conn->writer = std::thread([this, conn] { writer_loop(conn); });
    }
}

void Broker::reap_finished()
{
    std::list<std::shared_ptr<Connection>> done;
    {
        std::lock_guard lock(mu_);
        for (auto it = connections_.begin(); it != connections_.end();) {
            if ((*it)->live_threads.load() == 0) {
                done.push_back(*it);
                it = connections_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& c : done) {
        c->reader.join();
        c->writer.join();
        ::close(c->fd);
    }
}

void Broker::reader_loop(const std::shared_ptr<Connection>& conn)
{
    FrameReader reader;
    std::vector<std::uint8_t> buf(64 * 1024);
    try {
        while (running_) {
            const ssize_t n = ::recv(conn->fd, buf.data(), buf.size(), 0);
            if (n < 0 && errno == EINTR) {
                continue;
            }
            if (n <= 0) {
                break;
            }
            reader.feed(std::span(buf.data(), static_cast<std::size_t>(n)));
            while (auto frame = reader.next_frame()) {
                Message m = decode(*frame);
                if (m.topic == kSubscribeTopic) {
                    const std::string topic = control_target(m);
                    std::lock_guard lock(mu_);
                    conn->subscriptions.insert(topic);
                    routes_[topic].insert(conn.get());
                } else if (m.topic == kUnsubscribeTopic) {
                    const std::string topic = control_target(m);
                    std::lock_guard lock(mu_);
                    conn->subscriptions.erase(topic);
                    routes_[topic].erase(conn.get());
                } else if (m.topic == kAdvertiseTopic) {
                    const std::string topic = control_target(m);
                    std::lock_guard lock(mu_);
                    conn->advertised.insert(topic);
                } else if (is_control_topic(m.topic)) {
                    throw Error(ErrorCode::TopicInvalid, "unknown control topic " + m.topic);
                } else {
                    route(m.topic, std::make_shared<const std::string>(std::move(*frame)));
                }
            }
        }
    } catch (const Error&) {
        // Protocol violation: only this connection is closed.
    }
    drop_connection(conn);
    conn->live_threads.fetch_sub(1);
}

void Broker::writer_loop(const std::shared_ptr<Connection>& conn)
{
    while (auto frame = conn->outbound.pop()) {
        if (!send_all(conn->fd, (*frame)->data(), (*frame)->size())) {
            break;
        }
    }
    ::shutdown(conn->fd, SHUT_RDWR);
    conn->live_threads.fetch_sub(1);
}

void Broker::route(const std::string& topic, const std::shared_ptr<const std::string>& frame)
{
    std::lock_guard lock(mu_);
    const auto it = routes_.find(topic);
    if (it == routes_.end()) {
        return;
    }
    for (Connection* c : it->second) {
        c->outbound.push(frame);
    }
    routed_.fetch_add(1);
}

void Broker::drop_connection(const std::shared_ptr<Connection>& conn)
{
    {
        std::lock_guard lock(mu_);
        for (const auto& topic : conn->subscriptions) {
            routes_[topic].erase(conn.get());
        }
        conn->subscriptions.clear();
    }
    conn->outbound.close();
    ::shutdown(conn->fd, SHUT_RDWR);
}

// ---------------------------------------------------------------------------
// Client

Client::Client(const std::string& host, std::uint16_t port)
{
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port);
    if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) != 0 || res == nullptr) {
        throw Error(ErrorCode::Disconnected, "cannot resolve broker " + host);
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0 || ::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
        const std::string why = std::strerror(errno);
        ::freeaddrinfo(res);
        if (fd >= 0) {
            ::close(fd);
        }
        throw Error(ErrorCode::Disconnected, "cannot reach broker " + host + ":" + port_str + ": " + why);
    }
    ::freeaddrinfo(res);
    set_nodelay(fd);
    fd_ = fd;
    connected_ = true;
    reader_ = std::thread([this] { reader_loop(); });
}

Client::Client(std::string_view address)
    : Client(parse_address(address).first, parse_address(address).second)
{
}

Client::~Client()
{
    close();
}

void Client::send_frame(const std::string& frame)
{
    std::lock_guard lock(send_mu_);
    if (!connected_ || !send_all(fd_, frame.data(), frame.size())) {
        throw Error(ErrorCode::Disconnected, "broker connection lost");
    }
}

void Client::advertise(const std::string& topic)
{
    if (!valid_topic(topic) || is_control_topic(topic)) {
        throw Error(ErrorCode::TopicInvalid, "bad topic '" + topic + "'");
    }
    Message m{std::string(kAdvertiseTopic), 0, 0, {{"topic", topic}}};
    send_frame(encode(m));
}

std::uint64_t Client::publish(const std::string& topic, nlohmann::ordered_json payload,
                              std::int64_t stamp_us)
{
    if (!valid_topic(topic) || is_control_topic(topic)) {
        throw Error(ErrorCode::TopicInvalid, "bad topic '" + topic + "'");
    }
    // Sequence assignment and send happen under one lock so seq order matches
    // wire order for concurrent publishers on the same topic.
    std::lock_guard lock(seq_mu_);
    const std::uint64_t seq = ++next_seq_[topic];
    send_frame(encode(Message{topic, seq, stamp_us, std::move(payload)}));
    return seq;
}

void Client::publish_raw(const Message& m)
{
    if (is_control_topic(m.topic)) {
        throw Error(ErrorCode::TopicInvalid, "bad topic '" + m.topic + "'");
    }
    send_frame(encode(m));
}

void Client::subscribe(const std::string& topic, Handler handler, std::size_t capacity)
{
    if (!valid_topic(topic) || is_control_topic(topic)) {
        throw Error(ErrorCode::TopicInvalid, "bad topic '" + topic + "'");
    }
    Subscription* sub = nullptr;
    {
        std::lock_guard lock(subs_mu_);
        if (subs_.count(topic) != 0) {
            throw Error(ErrorCode::DomainError, "already subscribed to " + topic);
        }
        auto owned = std::make_unique<Subscription>(topic, std::move(handler), capacity);
        sub = owned.get();
        subs_.emplace(topic, std::move(owned));
    }
    sub->worker = std::thread([sub] {
        while (auto m = sub->queue.pop()) {
            sub->handler(*m);
        }
    });
    send_frame(encode(Message{std::string(kSubscribeTopic), 0, 0, {{"topic", topic}}}));
}

void Client::reader_loop()
{
    FrameReader reader;
    std::vector<std::uint8_t> buf(64 * 1024);
    try {
        for (;;) {
            const ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
            if (n < 0 && errno == EINTR) {
                continue;
            }
            if (n <= 0) {
                break;
            }
            reader.feed(std::span(buf.data(), static_cast<std::size_t>(n)));
            while (auto frame = reader.next_frame()) {
                Message m = decode(*frame);
                std::lock_guard lock(subs_mu_);
                const auto it = subs_.find(m.topic);
                if (it != subs_.end()) {
                    it->second->received.fetch_add(1);
                    it->second->queue.push(std::move(m));
                }
            }
        }
    } catch (const Error&) {
        // A corrupt stream from the broker ends the session.
    }
    mark_disconnected();
}

void Client::mark_disconnected()
{
    {
        std::lock_guard lock(state_mu_);
        connected_ = false;
    }
    state_cv_.notify_all();
    std::lock_guard lock(subs_mu_);
    for (auto& [topic, sub] : subs_) {
        sub->queue.close();
    }
}

void Client::wait_disconnected()
{
    std::unique_lock lock(state_mu_);
    state_cv_.wait(lock, [&] { return !connected_.load(); });
}

void Client::close()
{
    if (closing_.exchange(true)) {
        return;
    }
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
    }
    if (reader_.joinable()) {
        reader_.join();
    }
    {
        std::lock_guard lock(subs_mu_);
        for (auto& [topic, sub] : subs_) {
            sub->queue.close();
        }
    }
    for (auto& [topic, sub] : subs_) {
        if (sub->worker.joinable() && sub->worker.get_id() != std::this_thread::get_id()) {
            sub->worker.join();
        } else if (sub->worker.joinable()) {
            sub->worker.detach();
        }
    }
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::uint64_t Client::received(const std::string& topic) const
{
    std::lock_guard lock(subs_mu_);
    const auto it = subs_.find(topic);
    return it == subs_.end() ? 0 : it->second->received.load();
}

std::size_t Client::dropped(const std::string& topic) const
{
    std::lock_guard lock(subs_mu_);
    const auto it = subs_.find(topic);
    return it == subs_.end() ? 0 : it->second->queue.dropped();
}

}  // namespace agile_head::bus
