#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "wqed/common.hpp"

namespace wqed {

enum class DisorderKind { UniformOffset, GaussianOffset, RegularLattice };
enum class CavityCount { Two, OneHomogeneous };
enum class Engine { DtwaFull, DtwaEliminated, Qsdmf, QuantumJump, DickeLadder, EdCavity };

inline const char* to_string(DisorderKind k) {
    switch (k) {
        case DisorderKind::UniformOffset: return "uniform";
        case DisorderKind::GaussianOffset: return "gaussian";
        case DisorderKind::RegularLattice: return "lattice";
    }
    return "?";
}

inline const char* to_string(Engine e) {
    switch (e) {
        case Engine::DtwaFull: return "dtwa-full";
        case Engine::DtwaEliminated: return "dtwa-elim";
        case Engine::Qsdmf: return "qsdmf";
        case Engine::QuantumJump: return "qj";
        case Engine::DickeLadder: return "ladder";
        case Engine::EdCavity: return "ed";
    }
    return "?";
}

// All physical and numerical parameters of one experiment.
struct SystemConfig {
    int n_atoms = 1;
    double gamma = 1.0;
    double theta = 0.0;                  // spatial disorder strength, radians
    DisorderKind disorder_kind = DisorderKind::UniformOffset;
    double k0d = 2.0 * kPi;              // lattice phase per site (RegularLattice only)
    double delta_omega = 0.0;            // spectral disorder width, rate units
    double kappa = 0.0;                  // cavity decay (full-model runs); 0 = derive 50*gamma*N
    double coupling_g = 0.0;             // 0 = derive sqrt(gamma*kappa)/2
    bool include_hamiltonian = true;
    CavityCount cavity_count = CavityCount::Two;
    bool frozen_disorder = false;        // one shared realization instead of one per trajectory
    double t_end = 0.0;                  // 0 = derive 5 ln(N)/(gamma N), or 5/gamma for N = 1
    int n_samples = 2000;
    double dt = 0.0;                     // 0 = engine default
    int n_trajectories = 1000;
    std::uint64_t master_seed = 1;

    double effective_t_end() const {
        if (t_end > 0.0) return t_end;
        if (n_atoms >= 2) return 5.0 * std::log(double(n_atoms)) / (gamma * n_atoms);
        return 5.0 / gamma;
    }

    double effective_kappa() const {
        return kappa > 0.0 ? kappa : 50.0 * gamma * n_atoms;
    }

    double effective_g() const {
        if (coupling_g > 0.0) return coupling_g;
        return 0.5 * std::sqrt(gamma * effective_kappa());
    }

    // Engine integrator step ceiling when dt is left at 0.
    double default_dt(Engine e) const {
        double n = std::max(n_atoms, 1);
        switch (e) {
            case Engine::DtwaEliminated:
            case Engine::Qsdmf:
                return 1e-3 / (gamma * n);
            case Engine::DtwaFull:
                return std::min(0.1 / effective_kappa(), 0.01 / (gamma * n));
            default:
                return 1e-3 / (gamma * n);
        }
    }

    void validate() const {
        if (n_atoms < 1) throw InvalidParameter("n_atoms must be >= 1");
        if (!(gamma > 0.0)) throw InvalidParameter("gamma must be > 0");
        if (theta < 0.0) throw InvalidParameter("theta must be >= 0");
        if (delta_omega < 0.0) throw InvalidParameter("delta_omega must be >= 0");
        if (n_samples < 2) throw InvalidParameter("n_samples must be >= 2");
        if (n_trajectories < 1) throw InvalidParameter("n_trajectories must be >= 1");
        if (kappa < 0.0) throw InvalidParameter("kappa must be >= 0");
        if (t_end < 0.0) throw InvalidParameter("t_end must be >= 0");
        if (dt < 0.0) throw InvalidParameter("dt must be >= 0");
        if (dt > 0.0 && dt > effective_t_end() / n_samples)
            throw InvalidParameter("dt must not exceed t_end / n_samples");
        if (cavity_count == CavityCount::OneHomogeneous && (theta != 0.0 || delta_omega != 0.0))
            throw InvalidParameter("single-cavity benchmark requires theta = 0 and delta_omega = 0");
    }
};

}  // namespace wqed
