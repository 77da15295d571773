// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/distrib.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <thread>

#include "taskscope/export.hpp"

namespace taskscope {

namespace {

// Synthetic profiler identities (timers that are not tasks) live in the top
// half of the guid space so they never collide with scheduler guids.
constexpr Guid kSyntheticGuidBit = Guid(1) << 63;

constexpr std::uint8_t kParcelExpectsReply = 1;
constexpr std::uint8_t kParcelIsReply = 2;

}  // namespace

std::vector<std::uint8_t> encode_parcel(const Parcel& p) {
    ByteWriter w;
    w.str(p.action_name);
    w.i32(p.source);
    w.i32(p.target);
    w.u64(p.parcel_id);
    std::uint8_t flags = 0;
    if (p.expects_reply) flags |= kParcelExpectsReply;
    if (p.is_reply) flags |= kParcelIsReply;
    w.u8(flags);
    w.blob(p.payload);
    return w.take();
}

Parcel decode_parcel(const std::uint8_t* data, std::size_t size) {
    ByteReader r(data, size);
    Parcel p;
    p.action_name = r.str("parcel action");
    p.source = r.i32("parcel source");
    p.target = r.i32("parcel target");
    p.parcel_id = r.u64("parcel id");
    const std::size_t flags_at = r.pos();
    const std::uint8_t flags = r.u8("parcel flags");
    if (flags & ~(kParcelExpectsReply | kParcelIsReply))
        throw CodecError("invalid parcel flags " + std::to_string(flags), flags_at);
    p.expects_reply = flags & kParcelExpectsReply;
    p.is_reply = flags & kParcelIsReply;
    p.payload = r.blob("parcel payload");
    if (r.remaining() != 0) throw CodecError("trailing bytes after parcel", r.pos());
    return p;
}

std::vector<std::uint8_t> encode_frame(const WireFrame& frame) {
    const std::uint32_t length = static_cast<std::uint32_t>(1 + frame.body.size());
    std::vector<std::uint8_t> out;
    out.reserve(4 + length);
    out.push_back(static_cast<std::uint8_t>(length >> 24));
    out.push_back(static_cast<std::uint8_t>(length >> 16));
    out.push_back(static_cast<std::uint8_t>(length >> 8));
    out.push_back(static_cast<std::uint8_t>(length));
    out.push_back(static_cast<std::uint8_t>(frame.kind));
    out.insert(out.end(), frame.body.begin(), frame.body.end());
    return out;
}

std::optional<WireFrame> try_decode_frame(const std::uint8_t* buffer, std::size_t size,
                                          std::size_t* consumed) {
    if (size < 4) return std::nullopt;
    const std::uint32_t length = (std::uint32_t(buffer[0]) << 24) | (std::uint32_t(buffer[1]) << 16) |
                                 (std::uint32_t(buffer[2]) << 8) | std::uint32_t(buffer[3]);
    if (length == 0) throw CodecError("empty frame", 0);
    if (size - 4 < length) return std::nullopt;
    const std::uint8_t kind = buffer[4];
    if (kind < 1 || kind > 3) throw CodecError("unknown frame kind " + std::to_string(kind), 4);
    WireFrame frame;
    frame.kind = static_cast<FrameKind>(kind);
    frame.body.assign(buffer + 5, buffer + 4 + length);
    if (consumed) *consumed = 4 + static_cast<std::size_t>(length);
    return frame;
}

// --- In-process transport ----------------------------------------------------

// Delivery is a direct call on the sender's thread: reliable and trivially
// FIFO per (source, target). The wire format is exercised by the TCP path.
class InprocTransport final : public Transport {
  public:
    explicit InprocTransport(World& world) : world_(world) {}

    void send_parcel(const Parcel& p) override {
        if (closed_.load()) return;
        world_.locality(p.target).deliver_parcel(p);
    }

    void send_snapshot(LocalityId target, const Snapshot& s) override {
        if (closed_.load()) return;
        world_.locality(target).deliver_snapshot(s);
    }

    void send_control(LocalityId target, ControlOp op, LocalityId source,
                      std::uint64_t epoch) override {
        if (closed_.load()) return;
        world_.locality(target).deliver_control(op, source, epoch);
    }

    void shutdown() override { closed_.store(true); }

  private:
    World& world_;
    std::atomic<bool> closed_{false};
};

// --- TCP transport -----------------------------------------------------------

namespace {

bool write_all(int fd, const std::uint8_t* data, std::size_t size) {
    std::size_t done = 0;
    while (done < size) {
        const ssize_t n = ::send(fd, data + done, size - done, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        done += static_cast<std::size_t>(n);
    }
    return true;
}

bool read_exact(int fd, std::uint8_t* data, std::size_t size) {
    std::size_t done = 0;
    while (done < size) {
        const ssize_t n = ::recv(fd, data + done, size - done, 0);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            return false;
        }
        done += static_cast<std::size_t>(n);
    }
    return true;
}

}  // namespace

// Full loopback mesh: one duplex socket per locality pair, one reader thread
// per socket end. Frames are length-prefixed; each socket write is serialized
// by a per-transport mutex, so frames never interleave.
class TcpTransport final : public Transport {
  public:
    TcpTransport(Locality& self, std::map<LocalityId, int> fds, std::uint32_t retries)
        : self_(self), fds_(std::move(fds)), retries_(retries) {}

    ~TcpTransport() override { shutdown(); }

    void start() {
        for (const auto& [peer, fd] : fds_)
            readers_.emplace_back([this, fd] { reader_main(fd); });
    }

    void send_parcel(const Parcel& p) override {
        send_frame(p.target, {FrameKind::parcel, encode_parcel(p)});
    }

    void send_snapshot(LocalityId target, const Snapshot& s) override {
        send_frame(target, {FrameKind::snapshot, encode_snapshot(s)});
    }

    void send_control(LocalityId target, ControlOp op, LocalityId source,
                      std::uint64_t epoch) override {
        ByteWriter w;
        w.u8(static_cast<std::uint8_t>(op));
        w.i32(source);
        w.u64(epoch);
        send_frame(target, {FrameKind::control, w.take()});
    }

    void shutdown() override {
        if (stopping_.exchange(true)) return;
        for (const auto& [peer, fd] : fds_) ::shutdown(fd, SHUT_RDWR);
        for (std::thread& t : readers_)
            if (t.joinable()) t.join();
        for (const auto& [peer, fd] : fds_) ::close(fd);
    }

  private:
    void send_frame(LocalityId target, const WireFrame& frame) {
        if (target == self_.rank()) {  // no socket to self; loop back directly
            dispatch(frame);
            return;
        }
        const auto it = fds_.find(target);
        if (it == fds_.end())
            throw std::out_of_range("no connection to rank " + std::to_string(target));
        const std::vector<std::uint8_t> bytes = encode_frame(frame);
        std::lock_guard<std::mutex> lk(send_mutex_);
        for (std::uint32_t attempt = 0;; ++attempt) {
            if (write_all(it->second, bytes.data(), bytes.size())) return;
            if (attempt >= retries_)
                throw std::runtime_error("send to rank " + std::to_string(target) +
                                         " failed: " + std::strerror(errno));
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
    }

    void reader_main(int fd) {
        while (true) {
            std::uint8_t header[4];
            if (!read_exact(fd, header, 4)) return;
            const std::uint32_t length = (std::uint32_t(header[0]) << 24) |
                                         (std::uint32_t(header[1]) << 16) |
                                         (std::uint32_t(header[2]) << 8) | std::uint32_t(header[3]);
            std::vector<std::uint8_t> payload(length);
            if (length == 0 || !read_exact(fd, payload.data(), length)) return;
            std::vector<std::uint8_t> framed;
            framed.reserve(4 + length);
            framed.insert(framed.end(), header, header + 4);
            framed.insert(framed.end(), payload.begin(), payload.end());
            try {
                std::size_t consumed = 0;
                const auto frame = try_decode_frame(framed.data(), framed.size(), &consumed);
                if (frame) dispatch(*frame);
            } catch (const std::exception& e) {
                if (!stopping_.load())
                    std::fprintf(stderr, "taskscope: dropping bad frame: %s\n", e.what());
            }
        }
    }

    void dispatch(const WireFrame& frame) {
        switch (frame.kind) {
        case FrameKind::parcel:
            self_.deliver_parcel(decode_parcel(frame.body.data(), frame.body.size()));
            break;
        case FrameKind::snapshot:
            self_.deliver_snapshot(decode_snapshot(frame.body));
            break;
        case FrameKind::control: {
            ByteReader r(frame.body.data(), frame.body.size());
            const auto op = static_cast<ControlOp>(r.u8("control op"));
            const LocalityId source = r.i32("control source");
            const std::uint64_t epoch = r.u64("control epoch");
            if (op != ControlOp::hello) self_.deliver_control(op, source, epoch);
            break;
        }
        }
    }

    Locality& self_;
    std::map<LocalityId, int> fds_;
    std::uint32_t retries_;
    std::mutex send_mutex_;
    std::atomic<bool> stopping_{false};
    std::vector<std::thread> readers_;
};

// --- Locality ----------------------------------------------------------------

namespace {

DeviceConfig device_config_for_rank(DeviceConfig cfg, LocalityId rank) {
    cfg.device_id = rank;
    return cfg;
}

}  // namespace

Locality::Locality(World& world, LocalityId rank, LocalityId world_size,
                   const LocalityConfig& config)
    : world_(world),
      rank_(rank),
      world_size_(world_size),
      collective_timeout_ms_(config.collective_timeout_ms),
      profiler_(config.profiler, rank),
      scheduler_(config.scheduler, config.profiler.attach_hooks ? &profiler_ : nullptr, rank),
      device_(device_config_for_rank(config.device, rank),
              config.profiler.attach_hooks ? &profiler_ : nullptr) {}

Locality::~Locality() {
    if (transport_) transport_->shutdown();
    device_.shutdown();
    scheduler_.stop();
}

void Locality::attach_transport(std::unique_ptr<Transport> transport) {
    transport_ = std::move(transport);
}

void Locality::register_action(std::string name, ActionHandler handler) {
    std::lock_guard<std::mutex> lk(actions_mutex_);
    actions_[std::move(name)] = std::move(handler);
}

ActionHandler Locality::find_action(const std::string& name) const {
    std::lock_guard<std::mutex> lk(actions_mutex_);
    const auto it = actions_.find(name);
    return it == actions_.end() ? nullptr : it->second;
}

CompletionToken Locality::remote_action(LocalityId target, const std::string& action,
                                        std::vector<std::uint8_t> payload) {
    if (target < 0 || target >= world_size_)
        throw std::out_of_range("unknown target locality " + std::to_string(target));
    auto [promise, token] = make_promise();
    Parcel p;
    p.action_name = action;
    p.source = rank_;
    p.target = target;
    p.payload = std::move(payload);
    p.parcel_id = next_parcel_id_.fetch_add(1);
    p.expects_reply = true;
    {
        std::lock_guard<std::mutex> lk(replies_mutex_);
        pending_replies_.emplace(p.parcel_id, promise);
    }
    send_parcel(std::move(p));
    return token;
}

void Locality::remote_apply(LocalityId target, const std::string& action,
                            std::vector<std::uint8_t> payload) {
    if (target < 0 || target >= world_size_)
        throw std::out_of_range("unknown target locality " + std::to_string(target));
    Parcel p;
    p.action_name = action;
    p.source = rank_;
    p.target = target;
    p.payload = std::move(payload);
    p.parcel_id = next_parcel_id_.fetch_add(1);
    send_parcel(std::move(p));
}

void Locality::send_parcel(Parcel p) {
    {
        std::lock_guard<std::mutex> lk(stats_mutex_);
        if (!p.is_reply) ++stats_.parcels_sent[p.action_name];
        stats_.bytes_sent += p.payload.size();
    }
    transport_->send_parcel(p);
}

Task Locality::run_action(ActionHandler handler, Parcel p) {
    if (!handler)
        throw std::runtime_error("no action registered for '" + p.action_name + "' on rank " +
                                 std::to_string(rank_));
    std::vector<std::uint8_t> reply = handler(*this, p.payload);
    if (p.expects_reply) {
        Parcel r;
        r.action_name = p.action_name;
        r.source = rank_;
        r.target = p.source;
        r.payload = std::move(reply);
        r.parcel_id = p.parcel_id;
        r.is_reply = true;
        send_parcel(std::move(r));
    }
    co_return;
}

void Locality::deliver_parcel(Parcel p) {
    if (p.is_reply) {
        PromiseHandle promise;
        {
            std::lock_guard<std::mutex> lk(replies_mutex_);
            const auto it = pending_replies_.find(p.parcel_id);
            if (it == pending_replies_.end()) return;  // stale reply
            promise = it->second;
            pending_replies_.erase(it);
        }
        promise.set_value(std::any(std::move(p.payload)));
        return;
    }

    {
        std::lock_guard<std::mutex> lk(stats_mutex_);
        ++stats_.parcels_received[p.action_name];
    }

    // Receipt-to-spawn latency, surfaced as the "schedule_parcel" task.
    const Guid timer_guid = kSyntheticGuidBit | next_synthetic_guid_.fetch_add(1);
    profiler_.on_task_create({timer_guid, "schedule_parcel", kRootGuid, rank_});
    profiler_.on_task_start(timer_guid);
    ActionHandler handler = find_action(p.action_name);
    const std::string name = p.action_name;
    try {
        scheduler_.spawn(name, kRootGuid, run_action(std::move(handler), std::move(p)));
    } catch (const SchedulerStopped&) {
        // Shutting down; the parcel is dropped with the rest of the run.
    }
    profiler_.on_task_stop(timer_guid);
}

void Locality::deliver_snapshot(Snapshot s) {
    std::lock_guard<std::mutex> lk(collective_mutex_);
    gathered_[s.rank] = std::move(s);
    collective_cv_.notify_all();
}

void Locality::deliver_control(ControlOp op, LocalityId source, std::uint64_t epoch) {
    std::lock_guard<std::mutex> lk(collective_mutex_);
    switch (op) {
    case ControlOp::barrier_enter:
        barrier_entries_[epoch].insert(source);
        break;
    case ControlOp::barrier_release:
        barrier_released_ = std::max(barrier_released_, epoch);
        break;
    case ControlOp::hello:
        break;
    }
    collective_cv_.notify_all();
}

Snapshot Locality::local_snapshot() { return profiler_.snapshot(); }

Locality::Reduced Locality::reduce_profiles(LocalityId root) {
    if (root < 0 || root >= world_size_)
        throw std::out_of_range("unknown root locality " + std::to_string(root));
    Snapshot mine = local_snapshot();
    if (rank_ != root) {
        transport_->send_snapshot(root, mine);
        return {};
    }

    Reduced out;
    {
        std::unique_lock<std::mutex> lk(collective_mutex_);
        gathered_[rank_] = std::move(mine);
        const auto deadline =
            std::chrono::steady_clock::now() + std::chrono::milliseconds(collective_timeout_ms_);
        if (!collective_cv_.wait_until(lk, deadline, [&] {
                return static_cast<LocalityId>(gathered_.size()) == world_size_;
            })) {
            std::string absent;
            for (LocalityId r = 0; r < world_size_; ++r)
                if (!gathered_.count(r)) absent += (absent.empty() ? "" : ", ") + std::to_string(r);
            throw std::runtime_error("profile reduction timed out waiting for ranks " + absent);
        }
        out.per_rank.reserve(gathered_.size());
        for (auto& [r, snap] : gathered_) out.per_rank.push_back(std::move(snap));
        gathered_.clear();
    }
    for (const Snapshot& s : out.per_rank) out.merged = merge_profiles(out.merged, s);
    return out;
}

void Locality::barrier() {
    if (Scheduler::current_worker_id() >= 0)
        throw std::logic_error("barrier may not be called from a worker");

    std::uint64_t epoch = 0;
    {
        std::lock_guard<std::mutex> lk(collective_mutex_);
        epoch = ++barrier_epoch_;
    }
    if (world_size_ == 1) return;

    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(collective_timeout_ms_);
    if (rank_ == 0) {
        std::unique_lock<std::mutex> lk(collective_mutex_);
        barrier_entries_[epoch].insert(0);
        collective_cv_.notify_all();
        if (!collective_cv_.wait_until(lk, deadline, [&] {
                return static_cast<LocalityId>(barrier_entries_[epoch].size()) == world_size_;
            })) {
            std::string absent;
            for (LocalityId r = 0; r < world_size_; ++r)
                if (!barrier_entries_[epoch].count(r))
                    absent += (absent.empty() ? "" : ", ") + std::to_string(r);
            throw std::runtime_error("barrier epoch " + std::to_string(epoch) +
                                     " timed out waiting for ranks " + absent);
        }
        barrier_entries_.erase(epoch);
        barrier_released_ = std::max(barrier_released_, epoch);
        lk.unlock();
        for (LocalityId r = 1; r < world_size_; ++r)
            transport_->send_control(r, ControlOp::barrier_release, rank_, epoch);
    } else {
        transport_->send_control(0, ControlOp::barrier_enter, rank_, epoch);
        std::unique_lock<std::mutex> lk(collective_mutex_);
        if (!collective_cv_.wait_until(lk, deadline, [&] { return barrier_released_ >= epoch; }))
            throw std::runtime_error("barrier epoch " + std::to_string(epoch) +
                                     " timed out on rank " + std::to_string(rank_));
    }
}

MessageStats Locality::message_stats() const {
    std::lock_guard<std::mutex> lk(stats_mutex_);
    return stats_;
}

// --- World -------------------------------------------------------------------

std::unique_ptr<World> World::create_inproc(LocalityId size, const LocalityConfig& config) {
    if (size <= 0) throw std::invalid_argument("world size must be positive");
    std::unique_ptr<World> world(new World());
    for (LocalityId r = 0; r < size; ++r)
        world->localities_.emplace_back(new Locality(*world, r, size, config));
    for (auto& locality : world->localities_)
        locality->attach_transport(std::make_unique<InprocTransport>(*world));
    return world;
}

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

int make_listener(std::uint16_t* port_out) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) throw_errno("bind");
    if (::listen(fd, 64) < 0) throw_errno("listen");
    socklen_t len = sizeof addr;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0)
        throw_errno("getsockname");
    *port_out = ntohs(addr.sin_port);
    return fd;
}

int connect_loopback(std::uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw_errno("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) throw_errno("connect");
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

// The in-band identity exchanged right after connect.
void send_hello(int fd, LocalityId source) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(ControlOp::hello));
    w.i32(source);
    w.u64(0);
    const std::vector<std::uint8_t> bytes = encode_frame({FrameKind::control, w.take()});
    if (!write_all(fd, bytes.data(), bytes.size())) throw_errno("hello send");
}

LocalityId read_hello(int fd) {
    std::uint8_t header[4];
    if (!read_exact(fd, header, 4)) throw std::runtime_error("hello read failed");
    const std::uint32_t length = (std::uint32_t(header[0]) << 24) | (std::uint32_t(header[1]) << 16) |
                                 (std::uint32_t(header[2]) << 8) | std::uint32_t(header[3]);
    std::vector<std::uint8_t> payload(length);
    if (length == 0 || !read_exact(fd, payload.data(), length))
        throw std::runtime_error("hello read failed");
    if (payload[0] != static_cast<std::uint8_t>(FrameKind::control))
        throw std::runtime_error("unexpected first frame kind");
    ByteReader r(payload.data() + 1, payload.size() - 1);
    const auto op = static_cast<ControlOp>(r.u8("hello op"));
    if (op != ControlOp::hello) throw std::runtime_error("peer did not say hello");
    return r.i32("hello source");
}

}  // namespace

std::unique_ptr<World> World::create_tcp(LocalityId size, const LocalityConfig& config) {
    if (size <= 0) throw std::invalid_argument("world size must be positive");
    std::unique_ptr<World> world(new World());
    for (LocalityId r = 0; r < size; ++r)
        world->localities_.emplace_back(new Locality(*world, r, size, config));

    std::vector<int> listeners(size);
    std::vector<std::uint16_t> ports(size);
    for (LocalityId r = 0; r < size; ++r) listeners[r] = make_listener(&ports[r]);

    // Higher ranks dial lower ranks; the listen backlog holds every dial, so
    // the connect and accept phases can run sequentially.
    std::vector<std::map<LocalityId, int>> fds(size);
    for (LocalityId j = 0; j < size; ++j) {
        for (LocalityId i = 0; i < j; ++i) {
            const int fd = connect_loopback(ports[i]);
            send_hello(fd, j);
            fds[j][i] = fd;
        }
    }
    for (LocalityId i = 0; i < size; ++i) {
        for (LocalityId expected = i + 1; expected < size; ++expected) {
            const int fd = ::accept(listeners[i], nullptr, nullptr);
            if (fd < 0) throw_errno("accept");
            const int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            fds[i][read_hello(fd)] = fd;
        }
        ::close(listeners[i]);
    }

    for (LocalityId r = 0; r < size; ++r) {
        auto transport = std::make_unique<TcpTransport>(*world->localities_[r], std::move(fds[r]),
                                                        config.send_retries);
        TcpTransport* raw = transport.get();
        world->localities_[r]->attach_transport(std::move(transport));
        raw->start();
    }
    return world;
}

World::~World() {
    // Quiesce transports first so no delivery races locality teardown.
    for (auto& locality : localities_)
        if (locality->transport_) locality->transport_->shutdown();
}

Locality& World::locality(LocalityId rank) const {
    if (rank < 0 || rank >= size()) throw std::out_of_range("no locality with rank " + std::to_string(rank));
    return *localities_[static_cast<std::size_t>(rank)];
}

void World::run_all_until_idle() {
    while (true) {
        std::uint64_t spawned_before = 0;
        for (const auto& locality : localities_) spawned_before += locality->scheduler_.tasks_spawned();
        for (const auto& locality : localities_) locality->scheduler_.run_until_idle();
        std::uint64_t sent = 0;
        std::uint64_t received = 0;
        std::uint64_t spawned_after = 0;
        for (const auto& locality : localities_) {
            const MessageStats stats = locality->message_stats();
            sent += stats.total_sent();
            received += stats.total_received();
            spawned_after += locality->scheduler_.tasks_spawned();
        }
        if (sent == received && spawned_after == spawned_before) return;
        if (sent != received) std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
}

}  // namespace taskscope
