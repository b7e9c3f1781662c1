#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "wqed/common.hpp"
#include "wqed/config.hpp"
#include "wqed/rng.hpp"

namespace wqed {

// One draw of the atomic geometry: propagation phases xi_j = k0 delta_j,
// optional frequency offsets, and the derived two-mode spectral data.
struct DisorderRealization {
    std::vector<double> xi;            // wrapped to (-pi, pi]
    std::vector<double> k0z;           // full phase coordinate k0 z_j = 2 pi j + xi_j
    std::vector<int> z_order;          // atom indices sorted by physical position
    std::vector<double> delta_omega_j; // frequency offsets (rate units)
    cplx cached_c{1.0, 0.0};           // (1/N) sum_j exp(-2 i xi_j)
    double gamma_plus = 0.0;
    double gamma_minus = 0.0;

    int n() const { return static_cast<int>(xi.size()); }
    bool has_frequency_disorder() const {
        for (double w : delta_omega_j)
            if (w != 0.0) return true;
        return false;
    }
};

inline cplx overlap_c(const std::vector<double>& xi) {
    cplx s{0.0, 0.0};
    for (double x : xi) s += std::exp(cplx(0.0, -2.0 * x));
    return s / double(xi.size());
}

inline std::pair<double, double> channel_rates(double gamma, int n, cplx c) {
    double a = std::abs(c);
    return {0.5 * gamma * n * (1.0 + a), 0.5 * gamma * n * (1.0 - a)};
}

namespace detail {

inline void finalize_realization(DisorderRealization& r, const SystemConfig& cfg) {
    const int n = r.n();
    r.z_order.resize(n);
    std::iota(r.z_order.begin(), r.z_order.end(), 0);
    std::stable_sort(r.z_order.begin(), r.z_order.end(),
                     [&r](int a, int b) { return r.k0z[a] < r.k0z[b]; });
    r.cached_c = overlap_c(r.xi);
    auto [gp, gm] = channel_rates(cfg.gamma, n, r.cached_c);
    r.gamma_plus = gp;
    r.gamma_minus = gm;
}

}  // namespace detail

inline std::vector<double> sample_frequency_offsets(const SystemConfig& cfg, RngStream& stream) {
    std::vector<double> dw(cfg.n_atoms, 0.0);
    if (cfg.delta_omega > 0.0) {
        const double sigma = 0.5 * cfg.delta_omega;
        for (double& w : dw) w = sigma * stream.gaussian();
    }
    return dw;
}

inline DisorderRealization sample_uniform_disorder(const SystemConfig& cfg, RngStream& stream) {
    DisorderRealization r;
    const int n = cfg.n_atoms;
    r.xi.resize(n);
    r.k0z.resize(n);
    for (int j = 0; j < n; ++j) {
        double x = cfg.theta > 0.0 ? stream.uniform(-0.5 * cfg.theta, 0.5 * cfg.theta) : 0.0;
        x = wrap_angle(x);
        r.xi[j] = x;
        r.k0z[j] = 2.0 * kPi * j + x;
    }
    r.delta_omega_j = sample_frequency_offsets(cfg, stream);
    detail::finalize_realization(r, cfg);
    return r;
}

inline DisorderRealization sample_gaussian_disorder(const SystemConfig& cfg, RngStream& stream) {
    DisorderRealization r;
    const int n = cfg.n_atoms;
    r.xi.resize(n);
    r.k0z.resize(n);
    const double sigma = 0.5 * cfg.theta;
    for (int j = 0; j < n; ++j) {
        double raw = sigma > 0.0 ? sigma * stream.gaussian() : 0.0;
        r.xi[j] = wrap_angle(raw);
        r.k0z[j] = 2.0 * kPi * j + raw;  // unwrapped offset keeps the physical ordering
    }
    r.delta_omega_j = sample_frequency_offsets(cfg, stream);
    detail::finalize_realization(r, cfg);
    return r;
}

// Deterministic lattice with phase k0d per site; consumes the stream only
// for frequency offsets.
inline DisorderRealization regular_lattice(const SystemConfig& cfg, RngStream& stream) {
    DisorderRealization r;
    const int n = cfg.n_atoms;
    r.xi.resize(n);
    r.k0z.resize(n);
    for (int j = 0; j < n; ++j) {
        r.xi[j] = wrap_angle(j * cfg.k0d);
        r.k0z[j] = j * cfg.k0d;
    }
    r.delta_omega_j = sample_frequency_offsets(cfg, stream);
    detail::finalize_realization(r, cfg);
    return r;
}

inline DisorderRealization sample_disorder(const SystemConfig& cfg, RngStream& stream) {
    switch (cfg.disorder_kind) {
        case DisorderKind::UniformOffset: return sample_uniform_disorder(cfg, stream);
        case DisorderKind::GaussianOffset: return sample_gaussian_disorder(cfg, stream);
        case DisorderKind::RegularLattice: return regular_lattice(cfg, stream);
    }
    throw InvalidParameter("unknown disorder kind");
}

struct DisorderMoments {
    double mu_a, var_a, mu_b, var_b;  // moments of Re/Im exp(2 i xi)
};

// Closed-form moments of cos(2 xi) and sin(2 xi) under the two disorder laws.
inline DisorderMoments disorder_moments(double theta, DisorderKind kind) {
    if (kind == DisorderKind::UniformOffset) {
        if (theta < 1e-12) return {1.0, 0.0, 0.0, 0.0};
        double t = theta;
        double mu_a = std::sin(t) / t;
        double var_a = (t * t + std::cos(2.0 * t) + t * std::cos(t) * std::sin(t) - 1.0) / (2.0 * t * t);
        double var_b = (t - std::cos(t) * std::sin(t)) / (2.0 * t);
        return {mu_a, var_a, 0.0, var_b};
    }
    if (kind == DisorderKind::GaussianOffset) {
        double t2 = theta * theta;
        double mu_a = std::exp(-0.5 * t2);
        double var_a = 0.5 * (1.0 - 2.0 * std::exp(-t2) + std::exp(-2.0 * t2));
        double var_b = 0.5 * (1.0 - std::exp(-2.0 * t2));
        return {mu_a, var_a, 0.0, var_b};
    }
    throw InvalidParameter("disorder_moments: lattice has no ensemble moments");
}

// Prefix-aggregate evaluation of kernel sums
//   out_j = sum_l exp(sign * i * k0 |z_j - z_l|) x_l      (l = j included)
// in O(N): for z_l < z_j the kernel factorizes as e^{i k0 z_j} e^{-i k0 z_l},
// for z_l > z_j as e^{-i k0 z_j} e^{i k0 z_l}, with phases reduced mod 2 pi.
class KernelWorkspace {
public:
    KernelWorkspace() = default;

    explicit KernelWorkspace(const DisorderRealization& r) { reset(r); }

    void reset(const DisorderRealization& r) {
        n_ = r.n();
        order_ = r.z_order;
        eip_.resize(n_);
        eim_.resize(n_);
        zero_phase_ = true;
        for (int j = 0; j < n_; ++j) {
            eip_[j] = std::exp(cplx(0.0, r.xi[j]));
            eim_[j] = std::conj(eip_[j]);
            if (r.xi[j] != 0.0) zero_phase_ = false;
        }
    }

    int n() const { return n_; }
    bool zero_phase() const { return zero_phase_; }
    const cplx* phase_pos() const { return eip_.data(); }  // e^{+i xi_j}
    const cplx* phase_neg() const { return eim_.data(); }  // e^{-i xi_j}

    // sign = +1 or -1 selects e^{+-i k0 |z_j - z_l|}.
    void apply(int sign, const cplx* x, cplx* out) const {
        if (zero_phase_) {
            cplx s{0.0, 0.0};
            for (int j = 0; j < n_; ++j) s += x[j];
            for (int j = 0; j < n_; ++j) out[j] = s;
            return;
        }
        const cplx* a = sign > 0 ? eip_.data() : eim_.data();
        const cplx* b = sign > 0 ? eim_.data() : eip_.data();
        cplx p{0.0, 0.0};
        for (int k = 0; k < n_; ++k) {
            int j = order_[k];
            out[j] = x[j] + a[j] * p;
            p += b[j] * x[j];
        }
        cplx q{0.0, 0.0};
        for (int k = n_ - 1; k >= 0; --k) {
            int j = order_[k];
            out[j] += b[j] * q;
            q += a[j] * x[j];
        }
    }

    // sin-kernel action sum_{l != j} sin(k0 |z_j - z_l|) x_l; the diagonal
    // cancels between the two signed applications.
    void apply_sin(const cplx* x, cplx* out, cplx* scratch) const {
        if (zero_phase_) {
            for (int j = 0; j < n_; ++j) out[j] = cplx{0.0, 0.0};
            return;
        }
        apply(+1, x, out);
        apply(-1, x, scratch);
        const cplx half_over_i{0.0, -0.5};
        for (int j = 0; j < n_; ++j) out[j] = half_over_i * (out[j] - scratch[j]);
    }

private:
    int n_ = 0;
    bool zero_phase_ = true;
    std::vector<int> order_;
    std::vector<cplx> eip_, eim_;
};

}  // namespace wqed
