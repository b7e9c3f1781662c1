#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wqed/common.hpp"
#include "wqed/model.hpp"

namespace wqed {

// Phase-weighted collective sums of one trajectory at one sample time.
// Z(k, f) denotes sum_j e^{i k xi_j} f_j with m = <sigma->, q = |m|^2,
// n = (1 + s^z)/2. Everything downstream (decay rate, populations,
// photon-photon correlations, directional rates) contracts from these.
struct SampleMoments {
    cplx z1m, zm1m;        // Z(+-1, m); zm1m is the right-channel sum <J_R>
    cplx z0m2, z2m2, zm2m2;
    cplx z2q;
    cplx z2n;
    cplx z1nm, zm1nm;
    cplx z1qm, zm1qm;      // Z(+-1, q m)
    double z0q = 0.0, z0n = 0.0, z0nq = 0.0, z0n2 = 0.0, z0q2 = 0.0;
    double sum_sz = 0.0;
};

// m[j] must already be in the lab frame (rotating-frame engines multiply
// the e^{-i dw_j t} factor back in before sampling).
inline SampleMoments compute_moments(const KernelWorkspace& kernel, const cplx* m, const double* sz, int n) {
    SampleMoments M;
    const cplx* eip = kernel.phase_pos();
    const cplx* eim = kernel.phase_neg();
    for (int j = 0; j < n; ++j) {
        const cplx mj = m[j];
        const double q = std::norm(mj);
        const double nj = 0.5 * (1.0 + sz[j]);
        const cplx e1 = eip[j];
        const cplx e1c = eim[j];
        const cplx e2 = e1 * e1;
        const cplx m2 = mj * mj;
        M.z1m += e1 * mj;
        M.zm1m += e1c * mj;
        M.z0m2 += m2;
        M.z2m2 += e2 * m2;
        M.zm2m2 += std::conj(e2) * m2;
        M.z2q += e2 * q;
        M.z2n += e2 * nj;
        M.z1nm += e1 * (nj * mj);
        M.zm1nm += e1c * (nj * mj);
        M.z1qm += e1 * (q * mj);
        M.zm1qm += e1c * (q * mj);
        M.z0q += q;
        M.z0n += nj;
        M.z0nq += nj * q;
        M.z0n2 += nj * nj;
        M.z0q2 += q * q;
        M.sum_sz += sz[j];
    }
    return M;
}

struct BlochSnapshot {
    int sample_index = -1;
    std::vector<std::array<double, 3>> bloch;  // one unit vector per atom
};

struct TrajectoryRecord {
    std::uint64_t index = 0;
    bool failed = false;
    std::string failure;
    std::vector<SampleMoments> moments;   // semiclassical engines
    std::vector<double> r_direct;         // exact engines: R(t) on the grid
    std::vector<BlochSnapshot> snapshots; // opt-in (qsdmf ordering studies)
    int n_jumps = 0;                      // quantum-jump bookkeeping
    cplx homodyne_r{0, 0}, homodyne_l{0, 0};  // accumulated currents at t_end
};

}  // namespace wqed
