// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/workload.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "taskscope/clock.hpp"
#include "taskscope/sampling.hpp"

namespace taskscope {

namespace {

// Fixed cost of the once-per-run regrid stand-in tasks.
constexpr std::chrono::microseconds kRegridTaskCost{100};

[[noreturn]] void config_error(int line, const std::string& message) {
    throw std::runtime_error("workload config line " + std::to_string(line) + ": " + message);
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& text, int line, const std::string& key) {
    T value{};
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        config_error(line, "bad value '" + text + "' for key '" + key + "'");
    return value;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

const char* to_string(CommMode mode) {
    switch (mode) {
        case CommMode::remote_action: return "remote_action";
        case CommMode::direct_local: return "direct_local";
    }
    return "?";
}

CommMode parse_comm_mode(const std::string& text) {
    if (text == "remote_action") return CommMode::remote_action;
    if (text == "direct_local") return CommMode::direct_local;
    throw std::invalid_argument("unknown comm mode '" + text + "'");
}

int SubGrid::neighbor_count() const {
    int n = 0;
    for (const std::int64_t id : neighbor_ids)
        if (id != kNoNeighbor) ++n;
    return n;
}

SubGrid& Mesh::grid(std::uint64_t id) {
    if (id >= grids.size()) throw std::out_of_range("no sub-grid " + std::to_string(id));
    return grids[id];
}

const SubGrid& Mesh::grid(std::uint64_t id) const {
    if (id >= grids.size()) throw std::out_of_range("no sub-grid " + std::to_string(id));
    return grids[id];
}

std::uint64_t Mesh::total_cells() const {
    std::uint64_t n = 0;
    for (const SubGrid& g : grids) n += g.cell_count();
    return n;
}

std::vector<std::uint64_t> Mesh::leaf_ids() const {
    std::vector<std::uint64_t> out;
    for (const SubGrid& g : grids)
        if (!g.has_children) out.push_back(g.grid_id);
    return out;
}

std::vector<std::uint64_t> Mesh::owned_by(LocalityId rank) const {
    std::vector<std::uint64_t> out;
    for (const SubGrid& g : grids)
        if (g.owner == rank) out.push_back(g.grid_id);
    return out;
}

std::uint64_t Mesh::neighbor_pairs() const {
    std::uint64_t directed = 0;
    for (const SubGrid& g : grids) directed += static_cast<std::uint64_t>(g.neighbor_count());
    return directed / 2;
}

std::uint64_t Mesh::local_neighbor_pairs() const {
    std::uint64_t directed = 0;
    for (const SubGrid& g : grids)
        for (const std::int64_t n : g.neighbor_ids)
            if (n != kNoNeighbor && grids[static_cast<std::uint64_t>(n)].owner == g.owner)
                ++directed;
    return directed / 2;
}

void Mesh::finalize() {
    for (SubGrid& g : grids) {
        if (g.cells.empty()) {
            g.cells.resize(g.cell_count());
            fill_cells(g, 0);
        }
        for (int face = 0; face < kFaceCount; ++face)
            if (g.neighbor_ids[face] != kNoNeighbor)
                g.ghost[face].resize(g.face_cell_count(), 0.0);
    }
    validate();
}

void Mesh::validate() const {
    if (levels < 1) throw std::invalid_argument("mesh levels must be positive");
    if (world_size < 1) throw std::invalid_argument("mesh world_size must be positive");
    for (std::uint64_t i = 0; i < grids.size(); ++i) {
        const SubGrid& g = grids[i];
        const std::string where = "sub-grid " + std::to_string(i) + ": ";
        if (g.grid_id != i) throw std::invalid_argument(where + "grid_id must equal its index");
        if (g.cells_per_edge < 1) throw std::invalid_argument(where + "cells_per_edge must be positive");
        if (g.cells.size() != g.cell_count())
            throw std::invalid_argument(where + "cells must hold cells_per_edge^3 values");
        if (g.owner < 0 || g.owner >= world_size)
            throw std::invalid_argument(where + "owner outside the world");
        for (int face = 0; face < kFaceCount; ++face) {
            const std::int64_t n = g.neighbor_ids[face];
            if (n == kNoNeighbor) continue;
            if (n < 0 || static_cast<std::uint64_t>(n) >= grids.size())
                throw std::invalid_argument(where + "neighbor id out of range");
            if (static_cast<std::uint64_t>(n) == i)
                throw std::invalid_argument(where + "sub-grid linked to itself");
            const SubGrid& nb = grids[static_cast<std::uint64_t>(n)];
            if (nb.level != g.level)
                throw std::invalid_argument(where + "face neighbors must share a level");
            if (nb.neighbor_ids[face ^ 1] != static_cast<std::int64_t>(i))
                throw std::invalid_argument(where + "neighbor link is not symmetric");
            if (g.ghost[face].size() != g.face_cell_count())
                throw std::invalid_argument(where + "ghost layer not sized for its face");
        }
    }
}

namespace {

struct NodeKey {
    int level = 0;
    int x = 0;
    int y = 0;
    int z = 0;

    auto operator<=>(const NodeKey&) const = default;
};

NodeKey face_neighbor(const NodeKey& k, int face) {
    NodeKey q = k;
    const int delta = (face & 1) ? 1 : -1;
    switch (face / 2) {
        case 0: q.x += delta; break;
        case 1: q.y += delta; break;
        default: q.z += delta; break;
    }
    return q;
}

bool in_bounds(const NodeKey& k) {
    const int extent = 1 << k.level;
    return k.x >= 0 && k.x < extent && k.y >= 0 && k.y < extent && k.z >= 0 && k.z < extent;
}

// Grows the refinement structure: seeded coin flips decide organic
// refinement, force_exists patches in whatever 2:1 face balance demands.
struct TreeBuilder {
    int levels;
    std::uint64_t seed;
    std::set<NodeKey> exists;
    std::set<NodeKey> refined;

    bool want_refined(const NodeKey& k) const {
        if (k.level + 1 >= levels) return false;
        if (k.level == 0) return true;
        const std::uint64_t packed = (static_cast<std::uint64_t>(k.level) << 48) ^
                                     (static_cast<std::uint64_t>(k.x) << 32) ^
                                     (static_cast<std::uint64_t>(k.y) << 16) ^
                                     static_cast<std::uint64_t>(k.z);
        return (mix64(seed, packed) & 1) != 0;
    }

    void refine(const NodeKey& k) {
        if (!refined.insert(k).second) return;
        for (int dz = 0; dz < 2; ++dz)
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                    const NodeKey child{k.level + 1, 2 * k.x + dx, 2 * k.y + dy, 2 * k.z + dz};
                    exists.insert(child);
                    if (want_refined(child)) refine(child);
                }
    }

    void force_exists(const NodeKey& k) {
        if (exists.contains(k)) return;
        const NodeKey parent{k.level - 1, k.x / 2, k.y / 2, k.z / 2};
        force_exists(parent);
        refine(parent);
    }

    void build() {
        const NodeKey root{0, 0, 0, 0};
        exists.insert(root);
        if (want_refined(root)) refine(root);
        bool changed = true;
        while (changed) {
            changed = false;
            const std::vector<NodeKey> snapshot(refined.begin(), refined.end());
            for (const NodeKey& k : snapshot)
                for (int face = 0; face < kFaceCount; ++face) {
                    const NodeKey q = face_neighbor(k, face);
                    if (!in_bounds(q) || exists.contains(q)) continue;
                    force_exists(q);
                    changed = true;
                }
        }
    }
};

std::uint64_t morton3(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
    std::uint64_t out = 0;
    for (int b = 0; b < 21; ++b) {
        out |= static_cast<std::uint64_t>((x >> b) & 1u) << (3 * b);
        out |= static_cast<std::uint64_t>((y >> b) & 1u) << (3 * b + 1);
        out |= static_cast<std::uint64_t>((z >> b) & 1u) << (3 * b + 2);
    }
    return out;
}

}  // namespace

Mesh build_mesh(int levels, int world_size, std::uint64_t seed, int cells_per_edge) {
    if (levels < 1) throw std::invalid_argument("levels must be positive");
    if (world_size < 1) throw std::invalid_argument("world_size must be positive");
    if (cells_per_edge < 1) throw std::invalid_argument("cells_per_edge must be positive");

    TreeBuilder tree{levels, seed, {}, {}};
    tree.build();

    Mesh mesh;
    mesh.levels = levels;
    mesh.world_size = world_size;
    mesh.seed = seed;

    std::map<NodeKey, std::uint64_t> ids;
    for (const NodeKey& k : tree.exists) {
        const std::uint64_t id = mesh.grids.size();
        ids.emplace(k, id);
        SubGrid g;
        g.grid_id = id;
        g.level = k.level;
        g.pos = {k.x, k.y, k.z};
        g.cells_per_edge = cells_per_edge;
        g.has_children = tree.refined.contains(k);
        mesh.grids.push_back(std::move(g));
    }
    for (const auto& [k, id] : ids) {
        for (int face = 0; face < kFaceCount; ++face) {
            const NodeKey q = face_neighbor(k, face);
            if (!in_bounds(q)) continue;
            const auto it = ids.find(q);
            if (it != ids.end()) mesh.grids[id].neighbor_ids[face] = static_cast<std::int64_t>(it->second);
        }
    }

    // Deal contiguous chunks along the Morton curve, coarse level first on
    // ties so a parent stays with its first child.
    std::vector<std::uint64_t> order(mesh.grids.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::uint64_t a, std::uint64_t b) {
        const SubGrid& ga = mesh.grids[a];
        const SubGrid& gb = mesh.grids[b];
        const int sa = levels - 1 - ga.level;
        const int sb = levels - 1 - gb.level;
        const std::uint64_t ma = morton3(static_cast<std::uint32_t>(ga.pos[0]) << sa,
                                         static_cast<std::uint32_t>(ga.pos[1]) << sa,
                                         static_cast<std::uint32_t>(ga.pos[2]) << sa);
        const std::uint64_t mb = morton3(static_cast<std::uint32_t>(gb.pos[0]) << sb,
                                         static_cast<std::uint32_t>(gb.pos[1]) << sb,
                                         static_cast<std::uint32_t>(gb.pos[2]) << sb);
        if (ma != mb) return ma < mb;
        return ga.level < gb.level;
    });
    const std::uint64_t total = mesh.grids.size();
    const std::uint64_t base = total / static_cast<std::uint64_t>(world_size);
    const std::uint64_t extra = total % static_cast<std::uint64_t>(world_size);
    std::uint64_t cursor = 0;
    for (LocalityId rank = 0; rank < world_size; ++rank) {
        const std::uint64_t count = base + (static_cast<std::uint64_t>(rank) < extra ? 1 : 0);
        for (std::uint64_t j = 0; j < count; ++j) mesh.grids[order[cursor++]].owner = rank;
    }

    mesh.finalize();
    return mesh;
}

double cell_value(std::uint64_t grid_id, std::uint64_t step, std::uint64_t index) {
    const std::uint64_t h = mix64(mix64(grid_id, step), index);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

void fill_cells(SubGrid& g, std::uint64_t step) {
    const std::uint64_t count = g.cell_count();
    g.cells.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) g.cells[i] = cell_value(g.grid_id, step, i);
}

std::uint64_t face_cell_index(int edge, int face, std::uint64_t j) {
    const std::uint64_t e = static_cast<std::uint64_t>(edge);
    const std::uint64_t plane = (face & 1) ? e - 1 : 0;
    const std::uint64_t u = j % e;
    const std::uint64_t v = j / e;
    std::uint64_t x = 0;
    std::uint64_t y = 0;
    std::uint64_t z = 0;
    switch (face / 2) {
        case 0: x = plane, y = u, z = v; break;
        case 1: x = u, y = plane, z = v; break;
        default: x = u, y = v, z = plane; break;
    }
    return x + e * (y + e * z);
}

void StepConfig::validate() const {
    if (hydro_iterations_per_step == 0)
        throw std::invalid_argument("hydro_iterations_per_step must be positive");
    if (gravity_iterations_per_step == 0)
        throw std::invalid_argument("gravity_iterations_per_step must be positive");
    if (kernel_min_ns > kernel_max_ns)
        throw std::invalid_argument("kernel duration range is inverted");
}

const char* gravity_kernel_name(const Mesh& mesh, const SubGrid& g) {
    if (g.level == 0) return kKernelMultipoleRoot;
    if (g.has_children) return kKernelMultipole;
    for (const std::int64_t n : g.neighbor_ids)
        if (n != kNoNeighbor && mesh.grid(static_cast<std::uint64_t>(n)).has_children)
            return kKernelP2M;
    return kKernelP2P;
}

std::uint64_t kernel_duration_ns(const StepConfig& config, const std::string& kernel,
                                 std::uint64_t grid_id) {
    const std::uint64_t draw = mix64(mix64(config.seed, fnv1a(kernel)), grid_id);
    const std::uint64_t span = config.kernel_max_ns - config.kernel_min_ns;
    if (span == std::numeric_limits<std::uint64_t>::max()) return draw;
    return config.kernel_min_ns + draw % (span + 1);
}

WorkloadConfig parse_workload_config(std::istream& in) {
    WorkloadConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text.front() == '#') continue;
        const auto eq = text.find('=');
        if (eq == std::string::npos) config_error(line_no, "expected key=value");
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty()) config_error(line_no, "empty key");
        if (key == "levels") {
            cfg.levels = parse_number<int>(value, line_no, key);
        } else if (key == "N") {
            cfg.cells_per_edge = parse_number<int>(value, line_no, key);
        } else if (key == "steps") {
            cfg.step.num_steps = parse_number<std::uint64_t>(value, line_no, key);
        } else if (key == "hydro_iterations") {
            cfg.step.hydro_iterations_per_step = parse_number<std::uint32_t>(value, line_no, key);
        } else if (key == "gravity_iterations") {
            cfg.step.gravity_iterations_per_step = parse_number<std::uint32_t>(value, line_no, key);
        } else if (key == "comm_mode") {
            try {
                cfg.step.comm_mode = parse_comm_mode(value);
            } catch (const std::invalid_argument& e) {
                config_error(line_no, e.what());
            }
        } else if (key == "seed") {
            cfg.step.seed = parse_number<std::uint64_t>(value, line_no, key);
        } else if (key == "kernel_min_ns") {
            cfg.step.kernel_min_ns = parse_number<std::uint64_t>(value, line_no, key);
        } else if (key == "kernel_max_ns") {
            cfg.step.kernel_max_ns = parse_number<std::uint64_t>(value, line_no, key);
        } else if (key == "streams") {
            cfg.stream_count = parse_number<std::uint32_t>(value, line_no, key);
        } else {
            config_error(line_no, "unknown key '" + key + "'");
        }
    }
    if (cfg.levels < 1) throw std::runtime_error("workload config: levels must be positive");
    if (cfg.cells_per_edge < 1) throw std::runtime_error("workload config: N must be positive");
    if (cfg.stream_count == 0) throw std::runtime_error("workload config: streams must be positive");
    try {
        cfg.step.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("workload config: ") + e.what());
    }
    return cfg;
}

WorkloadConfig read_workload_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open workload config " + path);
    return parse_workload_config(in);
}

WorkloadSession::WorkloadSession(Mesh& mesh, World& world, StepConfig config)
    : mesh_(mesh),
      world_(world),
      config_(config),
      streams_issued_(static_cast<std::size_t>(world.size()), 0) {
    config_.validate();
    mesh_.validate();
    if (mesh_.world_size > world_.size())
        throw std::invalid_argument("mesh spans more localities than the world has");
    for (LocalityId rank = 0; rank < world_.size(); ++rank)
        world_.locality(rank).register_action(
            kActionSetHydroBoundary, [this](Locality&, const std::vector<std::uint8_t>& payload) {
                return handle_boundary(payload);
            });
}

WorkloadSession::~WorkloadSession() {
    for (LocalityId rank = 0; rank < world_.size(); ++rank)
        world_.locality(rank).register_action(
            kActionSetHydroBoundary,
            [](Locality&, const std::vector<std::uint8_t>&) -> std::vector<std::uint8_t> {
                throw std::runtime_error("ghost parcel arrived after its workload session ended");
            });
}

PromiseHandle WorkloadSession::arrival_slot(std::uint64_t grid, int face, std::uint64_t round) {
    std::lock_guard<std::mutex> lk(slots_mutex_);
    return arrivals_[{grid, face, round}];
}

PromiseHandle WorkloadSession::publish_slot(std::uint64_t grid, std::uint64_t step) {
    std::lock_guard<std::mutex> lk(slots_mutex_);
    return published_[{grid, step}];
}

void WorkloadSession::prune_rounds(std::uint64_t max_round, std::uint64_t max_publish_step) {
    std::lock_guard<std::mutex> lk(slots_mutex_);
    std::erase_if(arrivals_, [&](const auto& kv) { return std::get<2>(kv.first) <= max_round; });
    std::erase_if(published_, [&](const auto& kv) { return kv.first.second < max_publish_step; });
}

std::uint32_t WorkloadSession::next_stream(LocalityId owner) {
    const std::uint32_t count = world_.locality(owner).device().config().stream_count;
    std::lock_guard<std::mutex> lk(streams_mutex_);
    return streams_issued_[static_cast<std::size_t>(owner)]++ % count;
}

void WorkloadSession::send_boundary(const SubGrid& g, int face, std::uint64_t round) {
    const SubGrid& nb = mesh_.grid(static_cast<std::uint64_t>(g.neighbor_ids[face]));
    ByteWriter w;
    w.u64(round);
    w.u64(nb.grid_id);
    w.u32(static_cast<std::uint32_t>(face ^ 1));  // the face the neighbor receives on
    w.u64(g.grid_id);
    const std::uint64_t count = g.face_cell_count();
    w.u32(static_cast<std::uint32_t>(count));
    for (std::uint64_t j = 0; j < count; ++j)
        w.f64(g.cells[face_cell_index(g.cells_per_edge, face, j)]);
    world_.locality(g.owner).remote_apply(nb.owner, kActionSetHydroBoundary, w.take());
}

std::vector<std::uint8_t> WorkloadSession::handle_boundary(
    const std::vector<std::uint8_t>& payload) {
    ByteReader r(payload.data(), payload.size());
    const std::uint64_t round = r.u64("ghost round");
    const std::uint64_t dst = r.u64("ghost target grid");
    const std::uint32_t face = r.u32("ghost face");
    const std::uint64_t src = r.u64("ghost source grid");
    const std::uint32_t count = r.u32("ghost cell count");
    if (face >= kFaceCount) throw std::runtime_error("ghost parcel names an impossible face");
    const SubGrid& g = mesh_.grid(dst);
    if (g.neighbor_ids[face] != static_cast<std::int64_t>(src) || count != g.face_cell_count())
        throw std::runtime_error("ghost parcel does not match the mesh");
    std::vector<double> layer(count);
    for (std::uint32_t j = 0; j < count; ++j) layer[j] = r.f64("ghost cell");
    arrival_slot(dst, static_cast<int>(face), round).set_value(std::any(std::move(layer)));
    return {};
}

Task WorkloadSession::collect_body(std::uint64_t grid_id, CommMode mode, std::uint64_t round) {
    SubGrid& g = mesh_.grid(grid_id);
    const std::uint64_t step = round / config_.hydro_iterations_per_step;
    for (int face = 0; face < kFaceCount; ++face) {
        const std::int64_t n = g.neighbor_ids[face];
        if (n == kNoNeighbor) continue;
        const SubGrid& nb = mesh_.grid(static_cast<std::uint64_t>(n));
        if (mode == CommMode::remote_action || nb.owner != g.owner) send_boundary(g, face, round);
    }
    for (int face = 0; face < kFaceCount; ++face) {
        const std::int64_t n = g.neighbor_ids[face];
        if (n == kNoNeighbor) continue;
        const SubGrid& nb = mesh_.grid(static_cast<std::uint64_t>(n));
        if (mode == CommMode::direct_local && nb.owner == g.owner) {
            co_await publish_slot(nb.grid_id, step).token();
            const std::uint64_t count = g.face_cell_count();
            for (std::uint64_t j = 0; j < count; ++j)
                g.ghost[face][j] = nb.cells[face_cell_index(g.cells_per_edge, face ^ 1, j)];
        } else {
            std::any layer = co_await arrival_slot(grid_id, face, round).token();
            g.ghost[face] = std::any_cast<std::vector<double>>(std::move(layer));
        }
    }
}

Task WorkloadSession::fluxes_body(std::uint64_t grid_id) {
    const SubGrid& g = mesh_.grid(grid_id);
    SimDevice& device = world_.locality(g.owner).device();
    const Guid guid = Scheduler::current_identity().guid;
    co_await device.launch_kernel(kKernelReconstruct, next_stream(g.owner),
                                  kernel_duration_ns(config_, kKernelReconstruct, grid_id), guid);
    co_await device.launch_kernel(kKernelFlux, next_stream(g.owner),
                                  kernel_duration_ns(config_, kKernelFlux, grid_id), guid);
}

Task WorkloadSession::execute_step_body(std::uint64_t grid_id, std::uint64_t step) {
    SubGrid& g = mesh_.grid(grid_id);
    fill_cells(g, step);
    publish_slot(grid_id, step).try_set_value();
    Locality& loc = world_.locality(g.owner);
    for (std::uint32_t h = 0; h < config_.hydro_iterations_per_step; ++h) {
        const std::uint64_t round = step * config_.hydro_iterations_per_step + h;
        co_await loc.scheduler().spawn(kTaskCollectHydroBoundaries,
                                       collect_body(grid_id, config_.comm_mode, round));
        co_await loc.scheduler().spawn(kTaskComputeFluxes, fluxes_body(grid_id));
    }
    const char* gravity = gravity_kernel_name(mesh_, g);
    const std::uint64_t duration = kernel_duration_ns(config_, gravity, grid_id);
    const Guid guid = Scheduler::current_identity().guid;
    for (std::uint32_t i = 0; i < config_.gravity_iterations_per_step; ++i)
        co_await loc.device().launch_kernel(gravity, next_stream(g.owner), duration, guid);
}

void WorkloadSession::exchange_ghost_cells(CommMode mode, std::uint64_t step) {
    for (SubGrid& g : mesh_.grids) fill_cells(g, step);
    for (SubGrid& g : mesh_.grids) publish_slot(g.grid_id, step).try_set_value();
    const std::uint64_t round = step * config_.hydro_iterations_per_step;
    for (const SubGrid& g : mesh_.grids)
        world_.locality(g.owner).scheduler().spawn(kTaskCollectHydroBoundaries,
                                                   collect_body(g.grid_id, mode, round));
    world_.run_all_until_idle();
    prune_rounds(round, step);
}

std::uint64_t WorkloadSession::run_step(std::uint64_t step_index) {
    const std::uint64_t t0 = now_ns();
    for (const SubGrid& g : mesh_.grids)
        world_.locality(g.owner).scheduler().spawn(kTaskExecuteStep,
                                                   execute_step_body(g.grid_id, step_index));
    world_.run_all_until_idle();
    const std::uint64_t last_round =
        (step_index + 1) * config_.hydro_iterations_per_step - 1;
    prune_rounds(last_round, step_index + 1);
    return now_ns() - t0;
}

ScalingPoint WorkloadSession::run_benchmark() {
    if (config_.num_steps == 0)
        throw std::invalid_argument("num_steps must be positive for a benchmark run");
    Scheduler& root = world_.locality(0).scheduler();
    const std::uint64_t t0 = now_ns();
    for (const char* name : {kTaskCheckForRefinement, kTaskRegridGather, kTaskRegridScatter})
        root.spawn_fn(name, [] { std::this_thread::sleep_for(kRegridTaskCost); });
    for (std::uint64_t step = 0; step < config_.num_steps; ++step) run_step(step);
    const double seconds = static_cast<double>(now_ns() - t0) * 1e-9;

    ScalingPoint point;
    point.n = world_.size();
    point.total_time_s = seconds;
    point.cells_per_second =
        static_cast<double>(mesh_.total_cells()) * static_cast<double>(config_.num_steps) / seconds;
    point.speedup = 1.0;
    return point;
}

void exchange_ghost_cells(Mesh& mesh, World& world, CommMode mode, std::uint64_t step) {
    WorkloadSession session(mesh, world, StepConfig{});
    session.exchange_ghost_cells(mode, step);
}

}  // namespace taskscope
