#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "wqed/common.hpp"
#include "wqed/config.hpp"
#include "wqed/model.hpp"
#include "wqed/record.hpp"
#include "wqed/rng.hpp"

namespace wqed {

inline std::vector<double> make_grid(const SystemConfig& cfg) {
    std::vector<double> g(cfg.n_samples);
    const double T = cfg.effective_t_end();
    for (int i = 0; i < cfg.n_samples; ++i)
        g[i] = T * double(i) / double(cfg.n_samples - 1);
    return g;
}

// ---------------------------------------------------------------------------
// Permutation-symmetric ladder for the ideal array. From the fully excited
// state only the maximal multiplet J = N/2 is populated, so the rate
// equation lives on the N+1 ladder levels m = J, J-1, ..., -J.
// ---------------------------------------------------------------------------

// Rate out of level i (m = J - i): gamma (J+m)(J-m+1).
inline std::vector<double> dicke_ladder_rates(int n, double gamma) {
    std::vector<double> rates(n + 1);
    const double J = 0.5 * n;
    for (int i = 0; i <= n; ++i) {
        double m = J - i;
        rates[i] = gamma * (J + m) * (J - m + 1.0);
    }
    return rates;
}

struct LadderResult {
    std::vector<double> grid, r, p_e;
};

inline LadderResult dicke_rate_equation_evolve(int n, double gamma, const std::vector<double>& grid) {
    const auto rates = dicke_ladder_rates(n, gamma);
    const double J = 0.5 * n;
    auto deriv = [&](const std::vector<double>& p, std::vector<double>& dp) {
        for (int i = 0; i <= n; ++i) {
            double in = i > 0 ? rates[i - 1] * p[i - 1] : 0.0;
            dp[i] = in - rates[i] * p[i];
        }
    };
    auto run = [&](double dt_max, LadderResult& out) {
        std::vector<double> p(n + 1, 0.0), k1(n + 1), k2(n + 1), k3(n + 1), k4(n + 1), tmp(n + 1);
        p[0] = 1.0;
        out.grid = grid;
        out.r.assign(grid.size(), 0.0);
        out.p_e.assign(grid.size(), 0.0);
        auto emit = [&](std::size_t gi) {
            double r = 0.0, pe = 0.0;
            for (int i = 0; i <= n; ++i) {
                r += rates[i] * p[i];
                pe += p[i] * (2.0 * J - i);  // J + m = 2J - i excited atoms
            }
            out.r[gi] = r;
            out.p_e[gi] = pe / n;
        };
        emit(0);
        for (std::size_t gi = 1; gi < grid.size(); ++gi) {
            double span = grid[gi] - grid[gi - 1];
            int steps = std::max(1, int(std::ceil(span / dt_max)));
            double h = span / steps;
            for (int s = 0; s < steps; ++s) {
                deriv(p, k1);
                for (int i = 0; i <= n; ++i) tmp[i] = p[i] + 0.5 * h * k1[i];
                deriv(tmp, k2);
                for (int i = 0; i <= n; ++i) tmp[i] = p[i] + 0.5 * h * k2[i];
                deriv(tmp, k3);
                for (int i = 0; i <= n; ++i) tmp[i] = p[i] + h * k3[i];
                deriv(tmp, k4);
                for (int i = 0; i <= n; ++i)
                    p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            emit(gi);
        }
    };
    double rate_max = 0.0;
    for (double r : rates) rate_max = std::max(rate_max, r);
    double dt = 1.0 / (2.0 * rate_max);
    LadderResult a, b;
    run(dt, a);
    // refine until the peak is converged to 1e-4 relative
    for (int pass = 0; pass < 12; ++pass) {
        run(0.5 * dt, b);
        double ra = *std::max_element(a.r.begin(), a.r.end());
        double rb = *std::max_element(b.r.begin(), b.r.end());
        if (std::abs(ra - rb) <= 1e-4 * std::abs(rb)) return b;
        dt *= 0.5;
        a = b;
    }
    return b;
}

// ---------------------------------------------------------------------------
// Quantum-jump unraveling of the disordered master equation.
//
// The no-jump generator combines the Hamiltonian and the cosine dissipator
// into a single complex kernel, H_eff = -(i gamma / 2) sum_ij
// exp(i k0 |z_i - z_j|) s_i^+ s_j^-, evaluated with the same prefix
// factorization as the semiclassical engines (O(N 2^N) per application).
// ---------------------------------------------------------------------------

inline constexpr int kQuantumJumpMaxAtoms = 15;

class QuantumJumpEngine {
public:
    QuantumJumpEngine(const SystemConfig& cfg, const DisorderRealization& realization)
        : cfg_(cfg), realization_(realization), n_(cfg.n_atoms), dim_(std::size_t(1) << cfg.n_atoms) {
        if (n_ > kQuantumJumpMaxAtoms)
            throw InvalidParameter("quantum jump engine limited to N <= 15");
        order_ = realization.z_order;
        eip_.resize(n_);
        eim_.resize(n_);
        for (int j = 0; j < n_; ++j) {
            eip_[j] = std::exp(cplx(0.0, realization.xi[j]));
            eim_[j] = std::conj(eip_[j]);
        }
        if (realization.has_frequency_disorder()) {
            ediag_.assign(dim_, 0.0);
            for (std::size_t b = 0; b < dim_; ++b) {
                double e = 0.0;
                for (int j = 0; j < n_; ++j)
                    e += 0.5 * realization.delta_omega_j[j] * ((b >> j) & 1 ? 1.0 : -1.0);
                ediag_[b] = e;
            }
        }
    }

    TrajectoryRecord run(RngStream& stream, std::uint64_t index, const std::vector<double>& grid) const {
        TrajectoryRecord rec;
        rec.index = index;
        rec.r_direct.assign(grid.size(), 0.0);

        std::vector<cplx> psi(dim_, cplx{0, 0});
        psi[dim_ - 1] = 1.0;  // all atoms excited
        std::vector<cplx> k1(dim_), k2(dim_), k3(dim_), k4(dim_), tmp(dim_), saved(dim_);
        std::vector<cplx> acc(dim_), jr(dim_), jl(dim_);

        const double gamma = cfg_.gamma;
        double threshold = stream.uniform01();
        rec.r_direct[0] = rate_of(psi, jr, jl);

        const double dt_max = std::min(0.01 / gamma, grid[1] - grid[0]);
        double t = 0.0;
        for (std::size_t gi = 1; gi < grid.size(); ++gi) {
            double span = grid[gi] - grid[gi - 1];
            int steps = std::max(1, int(std::ceil(span / dt_max)));
            double h = span / steps;
            for (int s = 0; s < steps; ++s) {
                double remaining = h;
                while (remaining > 0.0) {
                    saved = psi;
                    rk4_step(psi, remaining, k1, k2, k3, k4, tmp, acc);
                    if (norm2(psi) >= threshold) break;
                    // bisect the jump time inside the remaining interval
                    double lo = 0.0, hi = remaining;
                    while (hi - lo > 1e-6 / gamma) {
                        double mid = 0.5 * (lo + hi);
                        psi = saved;
                        rk4_step(psi, mid, k1, k2, k3, k4, tmp, acc);
                        (norm2(psi) < threshold ? hi : lo) = mid;
                    }
                    psi = saved;
                    if (hi > 0.0) rk4_step(psi, hi, k1, k2, k3, k4, tmp, acc);
                    apply_jump(psi, jr, jl, stream);
                    ++rec.n_jumps;
                    threshold = stream.uniform01();
                    remaining -= hi;
                }
                t += h;
            }
            rec.r_direct[gi] = rate_of(psi, jr, jl);
        }
        return rec;
    }

private:
    double norm2(const std::vector<cplx>& v) const {
        double s = 0.0;
        for (const cplx& z : v) s += std::norm(z);
        return s;
    }

    // acc[b] over bit_j(b) = 0 indexes; apply sigma_j^- by reading the
    // partner with bit j set.
    void apply_heff(const std::vector<cplx>& psi, std::vector<cplx>& out,
                    std::vector<cplx>& acc) const {
        std::fill(out.begin(), out.end(), cplx{0, 0});
        std::fill(acc.begin(), acc.end(), cplx{0, 0});
        // forward sweep: acc = sum over earlier atoms of e^{-i xi} sigma^- psi
        for (int k = 0; k < n_; ++k) {
            int j = order_[k];
            const std::size_t bit = std::size_t(1) << j;
            const cplx fu = eip_[j], fd = eim_[j];
            for (std::size_t base = 0; base < dim_; base += 2 * bit)
                for (std::size_t off = 0; off < bit; ++off) {
                    std::size_t b = base + off;       // bit j clear
                    cplx low = psi[b | bit];          // sigma_j^- |psi>
                    out[b | bit] += low + fu * acc[b];
                    acc[b] += fd * low;
                }
        }
        std::fill(acc.begin(), acc.end(), cplx{0, 0});
        for (int k = n_ - 1; k >= 0; --k) {
            int j = order_[k];
            const std::size_t bit = std::size_t(1) << j;
            const cplx fu = eip_[j], fd = eim_[j];
            for (std::size_t base = 0; base < dim_; base += 2 * bit)
                for (std::size_t off = 0; off < bit; ++off) {
                    std::size_t b = base + off;
                    out[b | bit] += fd * acc[b];
                    acc[b] += fu * psi[b | bit];
                }
        }
        const cplx pref{0.0, -0.5 * cfg_.gamma};  // -(i gamma / 2)
        if (ediag_.empty()) {
            for (std::size_t b = 0; b < dim_; ++b) out[b] *= pref;
        } else {
            for (std::size_t b = 0; b < dim_; ++b)
                out[b] = pref * out[b] + cplx(0.0, -ediag_[b]) * psi[b];
        }
    }

    void rk4_step(std::vector<cplx>& psi, double h, std::vector<cplx>& k1, std::vector<cplx>& k2,
                  std::vector<cplx>& k3, std::vector<cplx>& k4, std::vector<cplx>& tmp,
                  std::vector<cplx>& acc) const {
        apply_heff(psi, k1, acc);
        for (std::size_t b = 0; b < dim_; ++b) tmp[b] = psi[b] + 0.5 * h * k1[b];
        apply_heff(tmp, k2, acc);
        for (std::size_t b = 0; b < dim_; ++b) tmp[b] = psi[b] + 0.5 * h * k2[b];
        apply_heff(tmp, k3, acc);
        for (std::size_t b = 0; b < dim_; ++b) tmp[b] = psi[b] + h * k3[b];
        apply_heff(tmp, k4, acc);
        for (std::size_t b = 0; b < dim_; ++b)
            psi[b] += h / 6.0 * (k1[b] + 2.0 * k2[b] + 2.0 * k3[b] + k4[b]);
    }

    void apply_channel(const std::vector<cplx>& psi, std::vector<cplx>& out, int chi) const {
        std::fill(out.begin(), out.end(), cplx{0, 0});
        for (int j = 0; j < n_; ++j) {
            const std::size_t bit = std::size_t(1) << j;
            const cplx f = chi < 0 ? eim_[j] : eip_[j];
            for (std::size_t base = 0; base < dim_; base += 2 * bit)
                for (std::size_t off = 0; off < bit; ++off) {
                    std::size_t b = base + off;
                    out[b] += f * psi[b | bit];
                }
        }
    }

    double rate_of(const std::vector<cplx>& psi, std::vector<cplx>& jr, std::vector<cplx>& jl) const {
        apply_channel(psi, jr, -1);
        apply_channel(psi, jl, +1);
        double nrm = norm2(psi);
        if (nrm <= 0.0) return 0.0;
        return 0.5 * cfg_.gamma * (norm2(jr) + norm2(jl)) / nrm;
    }

    void apply_jump(std::vector<cplx>& psi, std::vector<cplx>& jr, std::vector<cplx>& jl,
                    RngStream& stream) const {
        apply_channel(psi, jr, -1);
        apply_channel(psi, jl, +1);
        double wr = norm2(jr), wl = norm2(jl);
        double wsum = wr + wl;
        if (wsum <= 0.0) {  // fully decayed; stay in the ground state
            std::fill(psi.begin(), psi.end(), cplx{0, 0});
            psi[0] = 1.0;
            return;
        }
        const std::vector<cplx>& pick = stream.uniform01() * wsum < wr ? jr : jl;
        double nrm = std::sqrt(norm2(pick));
        for (std::size_t b = 0; b < dim_; ++b) psi[b] = pick[b] / nrm;
    }

    SystemConfig cfg_;
    DisorderRealization realization_;
    int n_;
    std::size_t dim_;
    std::vector<int> order_;
    std::vector<cplx> eip_, eim_;
    std::vector<double> ediag_;
};

inline TrajectoryRecord quantum_jump_run(const SystemConfig& cfg, const DisorderRealization& realization,
                                         std::uint64_t index, const std::vector<double>& grid) {
    QuantumJumpEngine engine(cfg, realization);
    RngStream stream = seed_stream(cfg.master_seed, index);
    return engine.run(stream, index, grid);
}

// ---------------------------------------------------------------------------
// Exact Lindblad evolution of N homogeneous atoms coupled to one damped
// cavity mode, on the |J = N/2, m> (x) |n <= N> basis.
// ---------------------------------------------------------------------------

struct EdCavityResult {
    std::vector<double> grid, r, p_e, photons;
    double min_eigenvalue = 0.0;  // most negative eigenvalue seen at checks
};

inline constexpr int kEdMaxAtoms = 30;

class EdCavityEngine {
public:
    EdCavityEngine(int n, double gamma, double kappa) : n_(n), gamma_(gamma), kappa_(kappa) {
        if (n > kEdMaxAtoms) throw InvalidParameter("ED cavity engine limited to N <= 30");
        g_ = 0.5 * std::sqrt(gamma * kappa);
        ns_ = n + 1;                     // spin levels, i = 0 is m = J
        nc_ = n + 1;                     // photon levels 0..N
        dim_ = std::size_t(ns_) * nc_;
        amp_.resize(ns_);
        const double J = 0.5 * n;
        for (int i = 0; i < ns_; ++i) {
            double m = J - i;
            amp_[i] = std::sqrt(std::max(0.0, (J + m) * (J - m + 1.0)));
        }
    }

    EdCavityResult evolve(const std::vector<double>& grid, int initial_photons = 0) const {
        std::vector<cplx> rho(dim_ * dim_, cplx{0, 0});
        rho[idx(0, initial_photons) * dim_ + idx(0, initial_photons)] = 1.0;

        EdCavityResult out;
        out.grid = grid;
        out.r.assign(grid.size(), 0.0);
        out.p_e.assign(grid.size(), 0.0);
        out.photons.assign(grid.size(), 0.0);
        out.min_eigenvalue = 0.0;

        std::vector<cplx> k1(rho.size()), k2(rho.size()), k3(rho.size()), k4(rho.size()),
            tmp(rho.size()), scratch(rho.size());

        double scale = kappa_ + g_ * (n_ + 1.0) + gamma_ * n_;
        double dt_max = 0.02 / scale;

        emit(rho, out, 0);
        for (std::size_t gi = 1; gi < grid.size(); ++gi) {
            double span = grid[gi] - grid[gi - 1];
            int steps = std::max(1, int(std::ceil(span / dt_max)));
            double h = span / steps;
            for (int s = 0; s < steps; ++s) {
                lindblad(rho, k1, scratch);
                axpy(tmp, rho, k1, 0.5 * h);
                lindblad(tmp, k2, scratch);
                axpy(tmp, rho, k2, 0.5 * h);
                lindblad(tmp, k3, scratch);
                axpy(tmp, rho, k3, h);
                lindblad(tmp, k4, scratch);
                for (std::size_t i = 0; i < rho.size(); ++i)
                    rho[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            emit(rho, out, gi);
            if (gi % std::max<std::size_t>(1, grid.size() / 8) == 0) {
                double lmin = min_eigenvalue(rho, scratch, tmp);
                out.min_eigenvalue = std::min(out.min_eigenvalue, lmin);
                if (lmin < -1e-8)
                    throw NumericalFailure("ED cavity density matrix lost positivity");
            }
        }
        return out;
    }

    double coupling() const { return g_; }

private:
    std::size_t idx(int i, int nph) const { return std::size_t(i) * nc_ + nph; }

    static void axpy(std::vector<cplx>& out, const std::vector<cplx>& a,
                     const std::vector<cplx>& b, double f) {
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + f * b[i];
    }

    // L rho with H = i g (J a^dag - J^dag a) and kappa D[a].
    void lindblad(const std::vector<cplx>& rho, std::vector<cplx>& out,
                  std::vector<cplx>& hr) const {
        const std::size_t D = dim_;
        // hr = (J a^dag - J^dag a) rho
        std::fill(hr.begin(), hr.end(), cplx{0, 0});
        for (int i = 0; i < ns_; ++i)
            for (int nph = 0; nph < nc_; ++nph) {
                std::size_t r = idx(i, nph);
                if (i + 1 < ns_ && nph + 1 < nc_) {
                    double f = amp_[i] * std::sqrt(double(nph + 1));
                    std::size_t rr = idx(i + 1, nph + 1);
                    for (std::size_t c = 0; c < D; ++c) hr[rr * D + c] += f * rho[r * D + c];
                }
                if (i > 0 && nph > 0) {
                    double f = amp_[i - 1] * std::sqrt(double(nph));
                    std::size_t rr = idx(i - 1, nph - 1);
                    for (std::size_t c = 0; c < D; ++c) hr[rr * D + c] -= f * rho[r * D + c];
                }
            }
        // out = -i [H, rho] = g (X rho - rho X) with H = i g X
        // (rho X)[r,c] = sum_k rho[r,k] X[k,c]; X columns have two entries
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = g_ * hr[i];
        for (int i = 0; i < ns_; ++i)
            for (int nph = 0; nph < nc_; ++nph) {
                std::size_t c = idx(i, nph);
                // X[k, c] entries: k = idx(i+1, nph+1) with +amp, k = idx(i-1, nph-1) with -amp
                if (i + 1 < ns_ && nph + 1 < nc_) {
                    double f = amp_[i] * std::sqrt(double(nph + 1));
                    std::size_t k = idx(i + 1, nph + 1);
                    for (std::size_t r = 0; r < D; ++r) out[r * D + c] -= g_ * f * rho[r * D + k];
                }
                if (i > 0 && nph > 0) {
                    double f = amp_[i - 1] * std::sqrt(double(nph));
                    std::size_t k = idx(i - 1, nph - 1);
                    for (std::size_t r = 0; r < D; ++r) out[r * D + c] += g_ * f * rho[r * D + k];
                }
            }
        // kappa (a rho a^dag - (1/2){a^dag a, rho})
        for (int i = 0; i < ns_; ++i)
            for (int nph = 0; nph < nc_; ++nph) {
                std::size_t r = idx(i, nph);
                for (int ip = 0; ip < ns_; ++ip)
                    for (int nphp = 0; nphp < nc_; ++nphp) {
                        std::size_t c = idx(ip, nphp);
                        cplx v{0, 0};
                        if (nph + 1 < nc_ && nphp + 1 < nc_)
                            v += std::sqrt(double(nph + 1)) * std::sqrt(double(nphp + 1)) *
                                 rho[idx(i, nph + 1) * D + idx(ip, nphp + 1)];
                        v -= 0.5 * (nph + nphp) * rho[r * D + c];
                        out[r * D + c] += kappa_ * v;
                    }
            }
    }

    void emit(const std::vector<cplx>& rho, EdCavityResult& out, std::size_t gi) const {
        const std::size_t D = dim_;
        const double J = 0.5 * n_;
        double jz = 0.0, nph_mean = 0.0;
        cplx xcorr{0, 0};
        for (int i = 0; i < ns_; ++i)
            for (int nph = 0; nph < nc_; ++nph) {
                std::size_t r = idx(i, nph);
                double pop = rho[r * D + r].real();
                jz += (J - i) * pop;
                nph_mean += nph * pop;
                if (i + 1 < ns_ && nph + 1 < nc_)
                    xcorr += rho[r * D + idx(i + 1, nph + 1)] * amp_[i] * std::sqrt(double(nph + 1));
            }
        out.r[gi] = 2.0 * g_ * xcorr.real();
        out.p_e[gi] = (jz + J) / n_;
        out.photons[gi] = nph_mean;
    }

    // smallest eigenvalue via power iteration on (I - rho)
    double min_eigenvalue(const std::vector<cplx>& rho, std::vector<cplx>& v,
                          std::vector<cplx>& w) const {
        const std::size_t D = dim_;
        v.assign(D, cplx{1.0 / std::sqrt(double(D)), 0});
        double lam = 0.0;
        for (int it = 0; it < 200; ++it) {
            for (std::size_t r = 0; r < D; ++r) {
                cplx s = v[r];
                for (std::size_t c = 0; c < D; ++c) s -= rho[r * D + c] * v[c];
                w[r] = s;
            }
            double nrm = 0.0;
            for (std::size_t r = 0; r < D; ++r) nrm += std::norm(w[r]);
            nrm = std::sqrt(nrm);
            if (nrm == 0.0) break;
            for (std::size_t r = 0; r < D; ++r) v[r] = w[r] / nrm;
            lam = nrm;
        }
        return 1.0 - lam;  // dominant of (I - rho) is 1 - lambda_min(rho)
    }

    int n_;
    double gamma_, kappa_, g_;
    int ns_, nc_;
    std::size_t dim_;
    std::vector<double> amp_;
};

inline EdCavityResult ed_collective_cavity_evolve(int n, double gamma, double kappa,
                                                  const std::vector<double>& grid,
                                                  int initial_photons = 0) {
    EdCavityEngine engine(n, gamma, kappa);
    return engine.evolve(grid, initial_photons);
}

}  // namespace wqed
