#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <optional>
#include <thread>
#include <vector>

#include "wqed/common.hpp"
#include "wqed/config.hpp"
#include "wqed/dtwa.hpp"
#include "wqed/exact.hpp"
#include "wqed/model.hpp"
#include "wqed/observables.hpp"
#include "wqed/qsdmf.hpp"
#include "wqed/record.hpp"

namespace wqed {

struct RunOptions {
    int workers = 0;                    // 0: WQED_WORKERS env or hardware count
    std::vector<int> snapshot_samples;  // grid indices with Bloch snapshots kept
    int dir_rate_sample = -1;           // keep per-trajectory (R_R, R_L) at this index
    double max_failure_fraction = 0.01;
};

struct RunResult {
    EnsembleStatistics stats;
    std::vector<double> rr_at_sample, rl_at_sample;   // per trajectory
    std::vector<TrajectoryRecord> snapshot_records;   // index + snapshots only
    std::optional<DisorderRealization> shared_realization;
    double seconds = 0.0;
};

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("WQED_WORKERS")) {
        int w = std::atoi(env);
        if (w > 0) return w;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? int(hc) : 1;
}

namespace detail {

// One engine set per worker; trajectory engines are reused across runs.
struct WorkerEngines {
    explicit WorkerEngines(const SystemConfig& cfg)
        : eliminated(cfg), full(cfg), qsdmf(cfg), cfg_(cfg) {}

    TrajectoryRecord run(Engine kind, RngStream& stream, const DisorderRealization& r,
                         std::uint64_t index, const std::vector<double>& grid,
                         const TrajectoryOptions& opts) {
        switch (kind) {
            case Engine::DtwaEliminated: return eliminated.run(stream, r, index, grid, opts);
            case Engine::DtwaFull: return full.run(stream, r, index, grid, opts);
            case Engine::Qsdmf: return qsdmf.run(stream, r, index, grid, opts);
            case Engine::QuantumJump: {
                QuantumJumpEngine qj(cfg_, r);
                return qj.run(stream, index, grid);
            }
            default:
                throw InvalidParameter("engine does not produce stochastic trajectories");
        }
    }

    DtwaEliminatedEngine eliminated;
    DtwaFullEngine full;
    QsdmfEngine qsdmf;
    SystemConfig cfg_;
};

}  // namespace detail

// Runs the ensemble over a fixed work queue of trajectory indices. Chunks of
// consecutive indices are reduced locally and merged in chunk order, so the
// result is byte-identical for any worker count.
inline RunResult run_ensemble(const SystemConfig& cfg, Engine engine, const RunOptions& opts = {}) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> grid = make_grid(cfg);
    const long n_traj = cfg.n_trajectories;
    constexpr long kChunk = 8;
    const long n_chunks = (n_traj + kChunk - 1) / kChunk;

    RunResult result;
    if (cfg.frozen_disorder) {
        RngStream rstream = seed_stream(cfg.master_seed, kSharedRealizationStream);
        result.shared_realization = sample_disorder(cfg, rstream);
    }
    const bool keep_rates = opts.dir_rate_sample >= 0;
    if (keep_rates) {
        result.rr_at_sample.assign(n_traj, 0.0);
        result.rl_at_sample.assign(n_traj, 0.0);
    }
    const bool keep_snapshots = !opts.snapshot_samples.empty();
    if (keep_snapshots) result.snapshot_records.resize(n_traj);

    TrajectoryOptions topts;
    topts.snapshot_samples = opts.snapshot_samples;

    std::vector<EnsembleAccumulator> chunk_acc(n_chunks);
    std::atomic<long> next_chunk{0};
    const int workers = std::min<long>(resolve_workers(opts.workers), n_chunks);

    auto work = [&]() {
        detail::WorkerEngines engines(cfg);
        for (;;) {
            long chunk = next_chunk.fetch_add(1);
            if (chunk >= n_chunks) break;
            EnsembleAccumulator acc(cfg.n_atoms, cfg.gamma, grid);
            const long lo = chunk * kChunk;
            const long hi = std::min(n_traj, lo + kChunk);
            for (long idx = lo; idx < hi; ++idx) {
                RngStream stream = seed_stream(cfg.master_seed, std::uint64_t(idx));
                TrajectoryRecord rec;
                if (result.shared_realization) {
                    rec = engines.run(engine, stream, *result.shared_realization,
                                      std::uint64_t(idx), grid, topts);
                } else {
                    DisorderRealization r = sample_disorder(cfg, stream);
                    rec = engines.run(engine, stream, r, std::uint64_t(idx), grid, topts);
                }
                if (keep_rates && !rec.failed && !rec.moments.empty()) {
                    const SampleMoments& M = rec.moments[opts.dir_rate_sample];
                    result.rr_at_sample[idx] = traj_directional_rate(M, cfg.gamma, -1);
                    result.rl_at_sample[idx] = traj_directional_rate(M, cfg.gamma, +1);
                }
                acc.add(rec);
                if (keep_snapshots) {
                    TrajectoryRecord kept;
                    kept.index = rec.index;
                    kept.failed = rec.failed;
                    kept.snapshots = std::move(rec.snapshots);
                    result.snapshot_records[idx] = std::move(kept);
                }
            }
            chunk_acc[chunk] = std::move(acc);
        }
    };

    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    EnsembleAccumulator total(cfg.n_atoms, cfg.gamma, grid);
    for (long c = 0; c < n_chunks; ++c) total.merge(chunk_acc[c]);
    if (total.failed() > opts.max_failure_fraction * n_traj)
        throw NumericalFailure("failed trajectories exceed " +
                               std::to_string(100.0 * opts.max_failure_fraction) + "%");
    result.stats = total.finalize();
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

// Grid index closest to time t.
inline int grid_index_of(const std::vector<double>& grid, double t) {
    int best = 0;
    for (int i = 1; i < (int)grid.size(); ++i)
        if (std::abs(grid[i] - t) < std::abs(grid[best] - t)) best = i;
    return best;
}

// Pilot pass (10% of the ensemble) to locate the burst before committing to
// snapshot indices for the full run.
inline EnsembleStatistics run_pilot(const SystemConfig& cfg, Engine engine,
                                    const RunOptions& opts = {}) {
    SystemConfig pilot = cfg;
    pilot.n_trajectories = std::max(20, cfg.n_trajectories / 10);
    RunOptions popts = opts;
    popts.snapshot_samples.clear();
    popts.dir_rate_sample = -1;
    return run_ensemble(pilot, engine, popts).stats;
}

}  // namespace wqed
