// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taskscope/bytes.hpp"
#include "taskscope/device.hpp"
#include "taskscope/profiler.hpp"
#include "taskscope/scheduler.hpp"
#include "taskscope/snapshot.hpp"

namespace taskscope {

using LocalityId = std::int32_t;

// One routed message. `parcel_id` is unique per source locality; replies
// reuse the id of the request they answer.
struct Parcel {
    std::string action_name;
    LocalityId source = 0;
    LocalityId target = 0;
    std::vector<std::uint8_t> payload;
    std::uint64_t parcel_id = 0;
    bool expects_reply = false;
    bool is_reply = false;

    bool operator==(const Parcel&) const = default;
};

std::vector<std::uint8_t> encode_parcel(const Parcel& p);
Parcel decode_parcel(const std::uint8_t* data, std::size_t size);

// Request-parcel traffic per action name (replies count toward bytes only).
struct MessageStats {
    std::map<std::string, std::uint64_t> parcels_sent;
    std::map<std::string, std::uint64_t> parcels_received;
    std::uint64_t bytes_sent = 0;

    std::uint64_t total_sent() const {
        std::uint64_t n = 0;
        for (const auto& [name, count] : parcels_sent) n += count;
        return n;
    }
    std::uint64_t total_received() const {
        std::uint64_t n = 0;
        for (const auto& [name, count] : parcels_received) n += count;
        return n;
    }
};

// Wire framing (TCP): 4-byte big-endian frame length, then a kind byte,
// then the little-endian body codec for that kind.
enum class FrameKind : std::uint8_t { parcel = 1, snapshot = 2, control = 3 };

enum class ControlOp : std::uint8_t { hello = 0, barrier_enter = 1, barrier_release = 2 };

struct WireFrame {
    FrameKind kind = FrameKind::parcel;
    std::vector<std::uint8_t> body;

    bool operator==(const WireFrame&) const = default;
};

std::vector<std::uint8_t> encode_frame(const WireFrame& frame);
// Decodes one frame from the front of `buffer` if fully received; advances
// *consumed past it. Returns nullopt when more bytes are needed.
std::optional<WireFrame> try_decode_frame(const std::uint8_t* buffer, std::size_t size,
                                          std::size_t* consumed);

class Locality;
class World;

// Runs on a worker of the target locality; returns the reply payload.
using ActionHandler =
    std::function<std::vector<std::uint8_t>(Locality&, const std::vector<std::uint8_t>&)>;

struct LocalityConfig {
    SchedulerConfig scheduler;
    ProfilerConfig profiler;
    DeviceConfig device;  // device_id is overridden with the rank
    std::uint64_t collective_timeout_ms = 30000;
    std::uint32_t send_retries = 3;
};

// Delivery backend. Implementations route to the target locality's
// deliver_* entry points; delivery is reliable and per-(source, target)
// FIFO.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual void send_parcel(const Parcel& p) = 0;
    virtual void send_snapshot(LocalityId target, const Snapshot& s) = 0;
    virtual void send_control(LocalityId target, ControlOp op, LocalityId source,
                              std::uint64_t epoch) = 0;
    virtual void shutdown() = 0;
};

// One rank of a world: a scheduler, its profiler, a simulated device, and a
// transport endpoint. Created through World, never directly.
class Locality {
  public:
    Locality(const Locality&) = delete;
    Locality& operator=(const Locality&) = delete;
    ~Locality();

    LocalityId rank() const { return rank_; }
    LocalityId world_size() const { return world_size_; }
    Scheduler& scheduler() { return scheduler_; }
    Profiler& profiler() { return profiler_; }
    SimDevice& device() { return device_; }

    // Handlers must be registered on the target before traffic starts.
    void register_action(std::string name, ActionHandler handler);

    // Ships `payload` to `target`, where a task named `action` runs under the
    // implicit root, prefixed by a "schedule_parcel" timer covering
    // receipt-to-spawn latency. The token fulfills with the reply payload
    // (std::vector<std::uint8_t>). Self-sends traverse the parcel path too.
    CompletionToken remote_action(LocalityId target, const std::string& action,
                                  std::vector<std::uint8_t> payload);

    // One-way variant: no reply, nothing to await.
    void remote_apply(LocalityId target, const std::string& action,
                      std::vector<std::uint8_t> payload);

    // Profiler snapshot stamped with this rank.
    Snapshot local_snapshot();

    struct Reduced {
        Snapshot merged;
        RunProfile per_rank;  // rank order, one per locality
    };

    // Collective. Non-root ranks ship their snapshot to `root` and return an
    // empty result immediately; the root blocks until every rank's snapshot
    // arrived (throwing after the collective timeout, listing absent ranks)
    // and returns the fold plus the retained per-rank snapshots.
    Reduced reduce_profiles(LocalityId root);

    // Collective; blocks the calling host thread until every locality of the
    // world has entered this barrier epoch. Not callable from a worker.
    void barrier();

    MessageStats message_stats() const;

  private:
    friend class World;
    friend class InprocTransport;
    friend class TcpTransport;

    Locality(World& world, LocalityId rank, LocalityId world_size, const LocalityConfig& config);

    void attach_transport(std::unique_ptr<Transport> transport);
    void send_parcel(Parcel p);
    ActionHandler find_action(const std::string& name) const;
    Task run_action(ActionHandler handler, Parcel p);

    // Transport-side entry points; safe from any thread.
    void deliver_parcel(Parcel p);
    void deliver_snapshot(Snapshot s);
    void deliver_control(ControlOp op, LocalityId source, std::uint64_t epoch);

    World& world_;
    LocalityId rank_;
    LocalityId world_size_;
    std::uint64_t collective_timeout_ms_;

    Profiler profiler_;
    Scheduler scheduler_;
    SimDevice device_;
    std::unique_ptr<Transport> transport_;

    mutable std::mutex actions_mutex_;
    std::map<std::string, ActionHandler> actions_;

    std::atomic<std::uint64_t> next_parcel_id_{1};
    std::atomic<std::uint64_t> next_synthetic_guid_{1};

    mutable std::mutex stats_mutex_;
    MessageStats stats_;

    std::mutex replies_mutex_;
    std::map<std::uint64_t, PromiseHandle> pending_replies_;

    std::mutex collective_mutex_;
    std::condition_variable collective_cv_;
    std::map<LocalityId, Snapshot> gathered_;
    std::uint64_t barrier_epoch_ = 0;         // epochs this rank entered
    std::uint64_t barrier_released_ = 0;      // epochs released by rank 0
    std::map<std::uint64_t, std::set<LocalityId>> barrier_entries_;  // rank 0 only
};

// A fixed-size set of localities living in this process, wired either by
// direct in-process dispatch or by a real TCP mesh over loopback.
class World {
  public:
    static std::unique_ptr<World> create_inproc(LocalityId size, const LocalityConfig& config = {});
    static std::unique_ptr<World> create_tcp(LocalityId size, const LocalityConfig& config = {});
    ~World();

    World(const World&) = delete;
    World& operator=(const World&) = delete;

    LocalityId size() const { return static_cast<LocalityId>(localities_.size()); }
    Locality& locality(LocalityId rank) const;

    // Waits for quiescence on every locality, lowest rank first.
    void run_all_until_idle();

  private:
    World() = default;

    std::vector<std::unique_ptr<Locality>> localities_;
};

}  // namespace taskscope
