#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wqed/common.hpp"
#include "wqed/config.hpp"
#include "wqed/dtwa.hpp"
#include "wqed/model.hpp"
#include "wqed/record.hpp"
#include "wqed/rng.hpp"

namespace wqed {

// Quantum-state-diffusion engine with a product-state restriction: each
// trajectory is a tensor product of single-spin pure states driven by the
// site-local reduction of the diffusion equation. Site j sees the channel
// operators e^{-+ i xi_j} sigma_j^- shifted by the other-site expectation
// <J_k>\j, the mean-field Hamiltonian, and the two complex noises shared by
// all sites. Spinors are renormalized after every step, so dropped c-number
// (norm/phase) terms have no effect on the Bloch vectors.
class QsdmfEngine {
public:
    explicit QsdmfEngine(const SystemConfig& cfg) : cfg_(cfg) {}

    TrajectoryRecord run(RngStream& stream, const DisorderRealization& realization,
                         std::uint64_t index, const std::vector<double>& grid,
                         const TrajectoryOptions& opts = {}) {
        const int n = cfg_.n_atoms;
        const double gamma = cfg_.gamma;
        kernel_.reset(realization);
        a_.assign(n, cplx{1.0, 0.0});  // fully excited: |e> exactly
        b_.assign(n, cplx{0.0, 0.0});
        m_.resize(n); sz_.resize(n); sin_.resize(n); scratch_.resize(n);
        const std::vector<double>& dw = realization.delta_omega_j;
        const bool freq = realization.has_frequency_disorder();

        TrajectoryRecord rec;
        rec.index = index;
        rec.moments.reserve(grid.size());
        refresh_bloch();
        sample(rec, 0, opts);

        const double dt_max = cfg_.dt > 0.0 ? cfg_.dt : cfg_.default_dt(Engine::Qsdmf);
        const cplx* eip = kernel_.phase_pos();
        const cplx* eim = kernel_.phase_neg();
        const double c_noise = std::sqrt(0.5 * gamma);
        const bool with_h = cfg_.include_hamiltonian && !kernel_.zero_phase();

        cplx current_r{0, 0}, current_l{0, 0};
        double t = 0.0;
        for (std::size_t gi = 1; gi < grid.size(); ++gi) {
            double span = grid[gi] - grid[gi - 1];
            int steps = std::max(1, int(std::ceil(span / dt_max)));
            double h = span / steps;
            for (int s = 0; s < steps; ++s) {
                cplx jr{0, 0}, jl{0, 0};
                for (int j = 0; j < n; ++j) {
                    jr += eim[j] * m_[j];
                    jl += eip[j] * m_[j];
                }
                if (with_h) kernel_.apply_sin(m_.data(), sin_.data(), scratch_.data());
                cplx dwr = stream.wiener(h);
                cplx dwl = stream.wiener(h);
                current_r += gamma * jr.real() * h + c_noise * dwr;
                current_l += gamma * jl.real() * h + c_noise * dwl;
                for (int j = 0; j < n; ++j) {
                    const cplx mj = m_[j];
                    const cplx cr = jr - eim[j] * mj;
                    const cplx cl = jl - eip[j] * mj;
                    const cplx gj = eip[j] * cr + eim[j] * cl;
                    const cplx dv = eim[j] * dwr + eip[j] * dwl;
                    const cplx aj = a_[j], bj = b_[j];
                    // site generator in the {|e>, |g>} basis
                    const cplx hj = with_h ? sin_[j] : cplx{0, 0};
                    cplx coef_plus = -cplx(0.0, 0.5 * gamma) * hj - 0.25 * gamma * gj;
                    cplx coef_minus = -cplx(0.0, 0.5 * gamma) * std::conj(hj)
                                      + 0.25 * gamma * std::conj(gj) + gamma * std::conj(mj);
                    cplx da = (coef_plus * bj - 0.5 * gamma * aj) * h;
                    cplx db = coef_minus * aj * h;
                    if (freq) {
                        da += -cplx(0.0, 0.5 * dw[j]) * aj * h;
                        db += cplx(0.0, 0.5 * dw[j]) * bj * h;
                    }
                    da += -c_noise * mj * aj * dv;
                    db += c_noise * (aj - mj * bj) * dv;
                    cplx na = aj + da, nb = bj + db;
                    double nrm = std::sqrt(std::norm(na) + std::norm(nb));
                    a_[j] = na / nrm;
                    b_[j] = nb / nrm;
                }
                refresh_bloch();
                t += h;
            }
            for (int j = 0; j < n; ++j) {
                if (!is_finite(a_[j]) || !is_finite(b_[j])) {
                    rec.failed = true;
                    rec.failure = "non-finite state at t = " + std::to_string(t);
                    return rec;
                }
            }
            sample(rec, int(gi), opts);
        }
        rec.homodyne_r = current_r;
        rec.homodyne_l = current_l;
        return rec;
    }

private:
    void refresh_bloch() {
        for (std::size_t j = 0; j < a_.size(); ++j) {
            m_[j] = a_[j] * std::conj(b_[j]);
            sz_[j] = std::norm(a_[j]) - std::norm(b_[j]);
        }
    }

    void sample(TrajectoryRecord& rec, int sample_index, const TrajectoryOptions& opts) {
        const int n = int(a_.size());
        rec.moments.push_back(compute_moments(kernel_, m_.data(), sz_.data(), n));
        for (int s : opts.snapshot_samples) {
            if (s == sample_index) {
                BlochSnapshot snap;
                snap.sample_index = s;
                snap.bloch.resize(n);
                for (int j = 0; j < n; ++j)
                    snap.bloch[j] = {2.0 * m_[j].real(), -2.0 * m_[j].imag(), sz_[j]};
                rec.snapshots.push_back(std::move(snap));
            }
        }
    }

    SystemConfig cfg_;
    KernelWorkspace kernel_;
    std::vector<cplx> a_, b_, m_, sin_, scratch_;
    std::vector<double> sz_;
};

}  // namespace wqed
