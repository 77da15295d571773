// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "taskscope/distrib.hpp"

namespace taskscope {

// How ghost layers travel between sub-grids that live on the same locality:
// always through parcels, or by direct neighbor-memory reads guarded by
// promise/future pairs (cross-locality pairs use parcels either way).
enum class CommMode { remote_action, direct_local };

const char* to_string(CommMode mode);
CommMode parse_comm_mode(const std::string& text);

// Face order -x,+x,-y,+y,-z,+z; the opposite face is `face ^ 1`.
inline constexpr int kFaceCount = 6;
inline constexpr std::int64_t kNoNeighbor = -1;

// CPU task names.
inline constexpr const char* kTaskExecuteStep = "execute_step";
inline constexpr const char* kTaskCollectHydroBoundaries = "collect_hydro_boundaries";
inline constexpr const char* kTaskComputeFluxes = "compute_fluxes";
inline constexpr const char* kTaskCheckForRefinement = "check_for_refinement";
inline constexpr const char* kTaskRegridGather = "regrid_gather";
inline constexpr const char* kTaskRegridScatter = "regrid_scatter";
// Ghost parcels run under this action name on the receiving locality.
inline constexpr const char* kActionSetHydroBoundary = "set_hydro_boundary";

// Device kernel names.
inline constexpr const char* kKernelReconstruct = "reconstruct_kernel";
inline constexpr const char* kKernelFlux = "flux_kernel";
inline constexpr const char* kKernelMultipole = "multipole_kernel";
inline constexpr const char* kKernelP2P = "p2p_kernel";
inline constexpr const char* kKernelP2M = "p2m_kernel";
inline constexpr const char* kKernelMultipoleRoot = "multipole_root_kernel";

// One Cartesian sub-grid of the octree. `cells` holds cells_per_edge³ values
// (x fastest); `ghost[f]` holds the neighbor's boundary layer across face f
// once an exchange ran.
struct SubGrid {
    std::uint64_t grid_id = 0;
    int level = 0;
    std::array<int, 3> pos{0, 0, 0};  // within the 2^level × 2^level × 2^level level grid
    int cells_per_edge = 8;
    std::vector<double> cells;
    LocalityId owner = 0;
    std::array<std::int64_t, kFaceCount> neighbor_ids{kNoNeighbor, kNoNeighbor, kNoNeighbor,
                                                      kNoNeighbor, kNoNeighbor, kNoNeighbor};
    std::array<std::vector<double>, kFaceCount> ghost;
    bool has_children = false;

    std::uint64_t cell_count() const {
        return static_cast<std::uint64_t>(cells_per_edge) * cells_per_edge * cells_per_edge;
    }
    std::uint64_t face_cell_count() const {
        return static_cast<std::uint64_t>(cells_per_edge) * cells_per_edge;
    }
    int neighbor_count() const;
};

// A distributed octree of sub-grids. grid_id doubles as the index into
// `grids`; build_mesh produces this shape and hand-built meshes must too.
struct Mesh {
    int levels = 1;
    int world_size = 1;
    std::uint64_t seed = 0;
    std::vector<SubGrid> grids;

    SubGrid& grid(std::uint64_t id);
    const SubGrid& grid(std::uint64_t id) const;
    std::uint64_t total_cells() const;
    std::vector<std::uint64_t> leaf_ids() const;
    std::vector<std::uint64_t> owned_by(LocalityId rank) const;

    // Undirected neighbor pairs, total and locality-local.
    std::uint64_t neighbor_pairs() const;
    std::uint64_t local_neighbor_pairs() const;

    // Sizes cells (initial step-0 state) and ghost layers, then validates.
    void finalize();
    // Throws std::invalid_argument on dense-id, shape, symmetry or owner
    // violations.
    void validate() const;
};

// Deterministic octree: the root always refines when levels allow, deeper
// sub-grids refine on a seeded coin flip, and extra refinement keeps face
// neighbors within one level of each other. Sub-grids are dealt to
// localities in contiguous chunks along the Morton curve.
Mesh build_mesh(int levels, int world_size, std::uint64_t seed, int cells_per_edge = 8);

// Stand-in physics: the value of cell `index` of `grid_id` after `step`.
// Ghost equivalence between comm modes rests on this being pure.
double cell_value(std::uint64_t grid_id, std::uint64_t step, std::uint64_t index);
void fill_cells(SubGrid& g, std::uint64_t step);

// Linear cell index of face cell j (j < edge²) on `face` of an edge³ grid.
// Face cells enumerate their two free axes minor-first (x before y before z).
std::uint64_t face_cell_index(int edge, int face, std::uint64_t j);

struct StepConfig {
    std::uint64_t num_steps = 40;
    std::uint32_t hydro_iterations_per_step = 3;
    std::uint32_t gravity_iterations_per_step = 6;
    std::uint64_t kernel_min_ns = 100'000;
    std::uint64_t kernel_max_ns = 2'000'000;
    CommMode comm_mode = CommMode::remote_action;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument if iterations are zero or the kernel
    // duration range is inverted.
    void validate() const;
};

// Gravity kernel for one sub-grid: the root gets the multipole-root kernel,
// refined sub-grids the multipole kernel, leaves next to a refined neighbor
// the p2m kernel, all other leaves p2p.
const char* gravity_kernel_name(const Mesh& mesh, const SubGrid& g);

// Drawn once per (kernel name, sub-grid) and reused across steps so
// per-name means are stable.
std::uint64_t kernel_duration_ns(const StepConfig& config, const std::string& kernel,
                                 std::uint64_t grid_id);

// One locality-count measurement of the benchmark.
struct ScalingPoint {
    int n = 1;
    double total_time_s = 0.0;
    double cells_per_second = 0.0;
    double speedup = 1.0;

    bool operator==(const ScalingPoint&) const = default;
};

// Full benchmark description as read from a key=value config file.
struct WorkloadConfig {
    int levels = 2;
    int cells_per_edge = 8;
    std::uint32_t stream_count = 128;
    StepConfig step;
};

// Accepted keys: levels, N, steps, hydro_iterations, gravity_iterations,
// comm_mode, seed, kernel_min_ns, kernel_max_ns, streams. '#' starts a
// comment line. Unknown keys and malformed values fail with the line number.
WorkloadConfig parse_workload_config(std::istream& in);
WorkloadConfig read_workload_config(const std::string& path);

// Binds a mesh to a world for stepping: registers the ghost action on every
// locality and owns the promise tables the exchanges synchronize through.
// Must not outlive the world or the mesh.
class WorkloadSession {
  public:
    WorkloadSession(Mesh& mesh, World& world, StepConfig config);
    ~WorkloadSession();

    WorkloadSession(const WorkloadSession&) = delete;
    WorkloadSession& operator=(const WorkloadSession&) = delete;

    Mesh& mesh() { return mesh_; }
    World& world() { return world_; }
    const StepConfig& config() const { return config_; }

    // One standalone exchange round at `step`: refreshes every sub-grid's
    // cells for the step, then lets every sub-grid collect its ghost layers
    // once. An unfulfilled neighbor surfaces as the scheduler's deadlock
    // diagnostic.
    void exchange_ghost_cells(CommMode mode, std::uint64_t step);

    // Runs one time step to completion across the world; returns wall ns.
    std::uint64_t run_step(std::uint64_t step_index);

    // Steps num_steps times and reports throughput. Only the stepping is
    // timed; mesh construction and any output fall outside.
    ScalingPoint run_benchmark();

  private:
    using ArrivalKey = std::tuple<std::uint64_t, int, std::uint64_t>;  // grid, face, round
    using PublishKey = std::pair<std::uint64_t, std::uint64_t>;        // grid, step

    Task execute_step_body(std::uint64_t grid_id, std::uint64_t step);
    Task collect_body(std::uint64_t grid_id, CommMode mode, std::uint64_t round);
    Task fluxes_body(std::uint64_t grid_id);

    void send_boundary(const SubGrid& g, int face, std::uint64_t round);
    std::vector<std::uint8_t> handle_boundary(const std::vector<std::uint8_t>& payload);
    PromiseHandle arrival_slot(std::uint64_t grid, int face, std::uint64_t round);
    PromiseHandle publish_slot(std::uint64_t grid, std::uint64_t step);
    void prune_rounds(std::uint64_t max_round, std::uint64_t max_publish_step);
    std::uint32_t next_stream(LocalityId owner);

    Mesh& mesh_;
    World& world_;
    StepConfig config_;

    std::mutex slots_mutex_;
    std::map<ArrivalKey, PromiseHandle> arrivals_;
    std::map<PublishKey, PromiseHandle> published_;
    std::vector<std::uint32_t> streams_issued_;
    std::mutex streams_mutex_;
};

// Convenience wrapper: one exchange round through a throwaway session.
void exchange_ghost_cells(Mesh& mesh, World& world, CommMode mode, std::uint64_t step = 0);

}  // namespace taskscope
