#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wqed/common.hpp"
#include "wqed/config.hpp"
#include "wqed/model.hpp"
#include "wqed/record.hpp"
#include "wqed/rng.hpp"

namespace wqed {

struct TrajectoryOptions {
    std::vector<int> snapshot_samples;  // grid indices at which raw spins are kept
};

// Discrete initial sampling: (sx, sy, sz) = (+-1, +-1, +1) with equal weights.
inline void sample_initial_spins(int n, RngStream& stream, cplx* s_minus, double* s_z) {
    for (int j = 0; j < n; ++j) {
        std::uint32_t b = stream.bits2();
        double sx = (b & 1u) ? 1.0 : -1.0;
        double sy = (b & 2u) ? 1.0 : -1.0;
        s_minus[j] = 0.5 * cplx(sx, -sy);
        s_z[j] = 1.0;
    }
}

// Vacuum Wigner distribution: both quadratures N(0, 1/4).
inline cplx sample_initial_cavity(RngStream& stream) {
    return {0.5 * stream.gaussian(), 0.5 * stream.gaussian()};
}

namespace detail {

inline void record_sample(TrajectoryRecord& rec, const KernelWorkspace& kernel,
                          const std::vector<cplx>& m_rot, const std::vector<double>& sz,
                          const std::vector<double>& dw, double t, int sample_index,
                          std::vector<cplx>& lab, const TrajectoryOptions& opts) {
    const int n = int(m_rot.size());
    const cplx* m = m_rot.data();
    if (!dw.empty()) {
        for (int j = 0; j < n; ++j)
            lab[j] = m_rot[j] * std::exp(cplx(0.0, -dw[j] * t));
        m = lab.data();
    }
    rec.moments.push_back(compute_moments(kernel, m, sz.data(), n));
    for (int s : opts.snapshot_samples) {
        if (s == sample_index) {
            BlochSnapshot snap;
            snap.sample_index = s;
            snap.bloch.resize(n);
            for (int j = 0; j < n; ++j)
                snap.bloch[j] = {2.0 * m[j].real(), -2.0 * m[j].imag(), sz[j]};
            rec.snapshots.push_back(std::move(snap));
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Markovian spin-only engine (cavities adiabatically eliminated).
//
// Ito form, Euler-Maruyama stepping:
//   d s_j^- = [-(g/2) s_j^- + (g/2) s_j^z sum_l K_jl s_l^-] dt
//             + sqrt(g/2) s_j^z dW_j
//   d s_j^z = [-g s_j^z - g sum_l (s_j^+ K_jl s_l^- + c.c.)] dt
//             - sqrt(2 g) (s_j^+ dW_j + c.c.)
// with K_jl = exp(i k0 |z_j - z_l|), the l = j term included, and
// dW_j = (e^{i xi_j} dW_R + e^{-i xi_j} dW_L)/sqrt(2) built from two shared
// complex increments. Frequency offsets enter as per-atom rotating-frame
// phases absorbed into the kernel inputs and outputs.
// ---------------------------------------------------------------------------

class DtwaEliminatedEngine {
public:
    explicit DtwaEliminatedEngine(const SystemConfig& cfg) : cfg_(cfg) {}

    TrajectoryRecord run(RngStream& stream, const DisorderRealization& realization,
                         std::uint64_t index, const std::vector<double>& grid,
                         const TrajectoryOptions& opts = {}) {
        const int n = cfg_.n_atoms;
        const double gamma = cfg_.gamma;
        kernel_.reset(realization);
        m_.resize(n); sz_.resize(n); x_.resize(n); g_.resize(n); lab_.resize(n);
        const bool freq = realization.has_frequency_disorder();
        const std::vector<double>& dw = realization.delta_omega_j;

        TrajectoryRecord rec;
        rec.index = index;
        rec.moments.reserve(grid.size());

        sample_initial_spins(n, stream, m_.data(), sz_.data());
        detail::record_sample(rec, kernel_, m_, sz_, freq ? dw : kEmpty, 0.0, 0, lab_, opts);

        const double dt_max = cfg_.dt > 0.0 ? cfg_.dt : cfg_.default_dt(Engine::DtwaEliminated);
        const double c_half = std::sqrt(0.5 * gamma);
        const double c_two = std::sqrt(2.0 * gamma);
        const cplx* eip = kernel_.phase_pos();
        const cplx* eim = kernel_.phase_neg();
        const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

        double t = 0.0;
        for (std::size_t gi = 1; gi < grid.size(); ++gi) {
            double span = grid[gi] - grid[gi - 1];
            int steps = std::max(1, int(std::ceil(span / dt_max)));
            double h = span / steps;
            for (int s = 0; s < steps; ++s) {
                if (freq) {
                    for (int j = 0; j < n; ++j)
                        x_[j] = m_[j] * std::exp(cplx(0.0, -dw[j] * t));
                } else {
                    x_ = m_;
                }
                kernel_.apply(+1, x_.data(), g_.data());
                cplx dwr = stream.wiener(h);
                cplx dwl = stream.wiener(h);
                for (int j = 0; j < n; ++j) {
                    cplx phase = freq ? std::exp(cplx(0.0, dw[j] * t)) : cplx{1.0, 0.0};
                    cplx gj = phase * g_[j];
                    cplx noise_j = inv_sqrt2 * (eip[j] * dwr + eim[j] * dwl) * phase;
                    cplx mj = m_[j];
                    double zj = sz_[j];
                    cplx drift_m = -0.5 * gamma * mj + 0.5 * gamma * zj * gj;
                    double drift_z = -gamma * zj - 2.0 * gamma * (std::conj(mj) * gj).real();
                    m_[j] = mj + drift_m * h + c_half * zj * noise_j;
                    sz_[j] = zj + drift_z * h - c_two * 2.0 * (std::conj(mj) * noise_j).real();
                }
                t += h;
            }
            for (int j = 0; j < n; ++j) {
                if (!is_finite(m_[j]) || !std::isfinite(sz_[j])) {
                    rec.failed = true;
                    rec.failure = "non-finite state at t = " + std::to_string(t);
                    return rec;
                }
            }
            detail::record_sample(rec, kernel_, m_, sz_, freq ? dw : kEmpty, t, int(gi), lab_, opts);
        }
        return rec;
    }

private:
    inline static const std::vector<double> kEmpty{};
    SystemConfig cfg_;
    KernelWorkspace kernel_;
    std::vector<cplx> m_, x_, g_, lab_;
    std::vector<double> sz_;
};

// ---------------------------------------------------------------------------
// Full engine with explicit damped bosonic modes.
//
// The amplitude SDE is split: the Ornstein-Uhlenbeck part alpha^(0) is
// advanced exactly (two half-steps per step so RK4 midpoints see a value),
// and the remaining coupled deterministic system {s^-, s^z, alpha^(1)} is
// advanced with classical RK4.
// ---------------------------------------------------------------------------

class DtwaFullEngine {
public:
    explicit DtwaFullEngine(const SystemConfig& cfg) : cfg_(cfg) {}

    TrajectoryRecord run(RngStream& stream, const DisorderRealization& realization,
                         std::uint64_t index, const std::vector<double>& grid,
                         const TrajectoryOptions& opts = {}) {
        const int n = cfg_.n_atoms;
        kernel_.reset(realization);
        const bool freq = realization.has_frequency_disorder();
        const std::vector<double>& dw = realization.delta_omega_j;
        kappa_ = cfg_.effective_kappa();
        g_ = cfg_.effective_g();
        single_cavity_ = cfg_.cavity_count == CavityCount::OneHomogeneous;

        m_.resize(n); sz_.resize(n); lab_.resize(n);
        for (auto* v : {&x_, &sin_, &scratch_, &km_[0], &km_[1], &km_[2], &km_[3], &tm_})
            v->resize(n);
        for (auto* v : {&kz_[0], &kz_[1], &kz_[2], &kz_[3], &tz_}) v->resize(n);

        TrajectoryRecord rec;
        rec.index = index;
        rec.moments.reserve(grid.size());

        sample_initial_spins(n, stream, m_.data(), sz_.data());
        a0r_ = sample_initial_cavity(stream);
        a0l_ = single_cavity_ ? cplx{0, 0} : sample_initial_cavity(stream);
        a1r_ = a1l_ = cplx{0, 0};

        detail::record_sample(rec, kernel_, m_, sz_, freq ? dw : kEmpty, 0.0, 0, lab_, opts);

        const double dt_max = cfg_.dt > 0.0 ? cfg_.dt : cfg_.default_dt(Engine::DtwaFull);
        double t = 0.0;
        for (std::size_t gi = 1; gi < grid.size(); ++gi) {
            double span = grid[gi] - grid[gi - 1];
            int steps = std::max(1, int(std::ceil(span / dt_max)));
            double h = span / steps;
            for (int s = 0; s < steps; ++s) {
                if (!advance(t, h, stream, 0, freq ? &dw : nullptr)) {
                    rec.failed = true;
                    rec.failure = "step rejected at t = " + std::to_string(t);
                    return rec;
                }
                t += h;
            }
            detail::record_sample(rec, kernel_, m_, sz_, freq ? dw : kEmpty, t, int(gi), lab_, opts);
        }
        return rec;
    }

private:
    inline static const std::vector<double> kEmpty{};

    cplx ou_step(cplx a, double h, RngStream& stream) const {
        double decay = std::exp(-0.5 * kappa_ * h);
        double sigma = std::sqrt(0.25 * (1.0 - std::exp(-kappa_ * h)));
        return decay * a + cplx(sigma * stream.gaussian(), sigma * stream.gaussian());
    }

    // drift of {m, sz, a1R, a1L} given the stochastic amplitudes of the stage
    void drift(const std::vector<cplx>& m, const std::vector<double>& sz, cplx a1r, cplx a1l,
               cplx a0r, cplx a0l, double t, const std::vector<double>* dw,
               std::vector<cplx>& fm, std::vector<double>& fz, cplx& fa1r, cplx& fa1l) {
        const int n = cfg_.n_atoms;
        const double gamma = cfg_.gamma;
        const cplx* eip = kernel_.phase_pos();
        const cplx* eim = kernel_.phase_neg();
        if (dw) {
            for (int j = 0; j < n; ++j) x_[j] = m[j] * std::exp(cplx(0.0, -(*dw)[j] * t));
        } else {
            x_ = m;
        }
        const bool with_h = cfg_.include_hamiltonian && !kernel_.zero_phase() && !single_cavity_;
        if (with_h) kernel_.apply_sin(x_.data(), sin_.data(), scratch_.data());

        cplx ar = a0r + a1r, al = a0l + a1l;
        cplx jr{0, 0}, jl{0, 0};
        if (single_cavity_) {
            for (int j = 0; j < n; ++j) jr += x_[j];
            for (int j = 0; j < n; ++j) {
                cplx mj = m[j];
                fm[j] = g_ * sz[j] * ar;
                fz[j] = -4.0 * g_ * (std::conj(mj) * ar).real();
            }
            fa1r = -0.5 * kappa_ * a1r + g_ * jr;
            fa1l = cplx{0, 0};
            return;
        }
        for (int j = 0; j < n; ++j) {
            jr += eim[j] * x_[j];
            jl += eip[j] * x_[j];
        }
        const double gs = g_ / std::sqrt(2.0);
        for (int j = 0; j < n; ++j) {
            cplx phase = dw ? std::exp(cplx(0.0, (*dw)[j] * t)) : cplx{1.0, 0.0};
            cplx drive = (ar * eip[j] + al * eim[j]) * phase;
            cplx mj = m[j];
            cplx fmj = gs * sz[j] * drive;
            double fzj = -2.0 * std::sqrt(2.0) * g_ * (std::conj(mj) * drive).real();
            if (with_h) {
                cplx hj = phase * sin_[j];
                fmj += cplx(0.0, 0.5 * gamma) * sz[j] * hj;
                fzj += 2.0 * gamma * (std::conj(mj) * hj).imag();
            }
            fm[j] = fmj;
            fz[j] = fzj;
        }
        fa1r = -0.5 * kappa_ * a1r + gs * jr;
        fa1l = -0.5 * kappa_ * a1l + gs * jl;
    }

    bool state_ok() const {
        const double zmax = std::sqrt(3.0) * 1.01;
        for (int j = 0; j < cfg_.n_atoms; ++j)
            if (!is_finite(m_[j]) || !std::isfinite(sz_[j]) || std::abs(sz_[j]) > zmax) return false;
        return is_finite(a1r_) && is_finite(a1l_) && is_finite(a0r_) && is_finite(a0l_);
    }

    bool advance(double t, double h, RngStream& stream, int depth, const std::vector<double>* dw) {
        const int n = cfg_.n_atoms;
        std::vector<cplx> m_save = m_;
        std::vector<double> sz_save = sz_;
        cplx a1r_save = a1r_, a1l_save = a1l_;
        cplx a0r_save = a0r_, a0l_save = a0l_;

        cplx a0r_mid = ou_step(a0r_, 0.5 * h, stream);
        cplx a0l_mid = single_cavity_ ? cplx{0, 0} : ou_step(a0l_, 0.5 * h, stream);
        cplx a0r_end = ou_step(a0r_mid, 0.5 * h, stream);
        cplx a0l_end = single_cavity_ ? cplx{0, 0} : ou_step(a0l_mid, 0.5 * h, stream);

        cplx fr[4], fl[4];
        drift(m_, sz_, a1r_, a1l_, a0r_, a0l_, t, dw, km_[0], kz_[0], fr[0], fl[0]);
        stage(m_save, sz_save, a1r_save, a1l_save, km_[0], kz_[0], fr[0], fl[0], 0.5 * h);
        drift(tm_, tz_, t1r_, t1l_, a0r_mid, a0l_mid, t + 0.5 * h, dw, km_[1], kz_[1], fr[1], fl[1]);
        stage(m_save, sz_save, a1r_save, a1l_save, km_[1], kz_[1], fr[1], fl[1], 0.5 * h);
        drift(tm_, tz_, t1r_, t1l_, a0r_mid, a0l_mid, t + 0.5 * h, dw, km_[2], kz_[2], fr[2], fl[2]);
        stage(m_save, sz_save, a1r_save, a1l_save, km_[2], kz_[2], fr[2], fl[2], h);
        drift(tm_, tz_, t1r_, t1l_, a0r_end, a0l_end, t + h, dw, km_[3], kz_[3], fr[3], fl[3]);

        for (int j = 0; j < n; ++j) {
            m_[j] = m_save[j] + h / 6.0 * (km_[0][j] + 2.0 * km_[1][j] + 2.0 * km_[2][j] + km_[3][j]);
            sz_[j] = sz_save[j] + h / 6.0 * (kz_[0][j] + 2.0 * kz_[1][j] + 2.0 * kz_[2][j] + kz_[3][j]);
        }
        a1r_ = a1r_save + h / 6.0 * (fr[0] + 2.0 * fr[1] + 2.0 * fr[2] + fr[3]);
        a1l_ = a1l_save + h / 6.0 * (fl[0] + 2.0 * fl[1] + 2.0 * fl[2] + fl[3]);
        a0r_ = a0r_end;
        a0l_ = a0l_end;

        if (state_ok()) return true;
        if (depth >= 8) return false;

        // halve the step and retry from the saved state (fresh noise draws)
        m_ = std::move(m_save);
        sz_ = std::move(sz_save);
        a1r_ = a1r_save;
        a1l_ = a1l_save;
        a0r_ = a0r_save;
        a0l_ = a0l_save;
        return advance(t, 0.5 * h, stream, depth + 1, dw) &&
               advance(t + 0.5 * h, 0.5 * h, stream, depth + 1, dw);
    }

    void stage(const std::vector<cplx>& m0, const std::vector<double>& z0, cplx a1r0, cplx a1l0,
               const std::vector<cplx>& km, const std::vector<double>& kz, cplx fr, cplx fl,
               double f) {
        const int n = cfg_.n_atoms;
        tm_.resize(n);
        tz_.resize(n);
        for (int j = 0; j < n; ++j) {
            tm_[j] = m0[j] + f * km[j];
            tz_[j] = z0[j] + f * kz[j];
        }
        t1r_ = a1r0 + f * fr;
        t1l_ = a1l0 + f * fl;
    }

    SystemConfig cfg_;
    KernelWorkspace kernel_;
    bool single_cavity_ = false;
    double kappa_ = 0.0, g_ = 0.0;
    std::vector<cplx> m_, x_, sin_, scratch_, lab_, tm_;
    std::vector<cplx> km_[4];
    std::vector<double> sz_, tz_, kz_[4];
    cplx a0r_{}, a0l_{}, a1r_{}, a1l_{}, t1r_{}, t1l_{};
};

}  // namespace wqed
