#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wqed/common.hpp"
#include "wqed/record.hpp"
#include "wqed/rng.hpp"

namespace wqed {

// ---------------------------------------------------------------------------
// Per-trajectory contractions.
//
// All pair and quadruple sums over atom indices are evaluated from the
// collective sums in SampleMoments. Coincident-site operator products are
// reduced exactly (s+s+ = s-s- = 0, s+s- = (1+sz)/2); distinct-site products
// are classical trajectory products.
// ---------------------------------------------------------------------------

// Decay rate of one trajectory: pair term with the diagonal removed plus the
// single-atom term (gamma/2) sum_j (1 + s_j^z).
inline double traj_decay_rate(const SampleMoments& M, double gamma, int n) {
    double pair = std::norm(M.z1m) + std::norm(M.zm1m) - 2.0 * M.z0q;
    return 0.5 * gamma * pair + 0.5 * gamma * (n + M.sum_sz);
}

inline double traj_excited_population(const SampleMoments& M, int n) {
    return (n + M.sum_sz) / (2.0 * n);
}

// <J_eta^dag J_eta> for eta = R (chi = -1) or L (chi = +1).
inline double traj_channel_occupation(const SampleMoments& M, int chi) {
    const cplx& b = (chi < 0) ? M.zm1m : M.z1m;
    return std::norm(b) - M.z0q + M.z0n;
}

// Directional emission rate, pair term only.
inline double traj_directional_rate(const SampleMoments& M, double gamma, int chi) {
    const cplx& b = (chi < 0) ? M.zm1m : M.z1m;
    return 0.5 * gamma * (std::norm(b) - M.z0q);
}

namespace detail {

inline cplx zm(const SampleMoments& M, int k) { return k > 0 ? M.z1m : M.zm1m; }
inline cplx zm2(const SampleMoments& M, int k) {
    if (k == 0) return M.z0m2;
    return k > 0 ? M.z2m2 : M.zm2m2;
}
inline cplx zq(const SampleMoments& M, int k) {
    if (k == 0) return cplx{M.z0q, 0.0};
    return k > 0 ? M.z2q : std::conj(M.z2q);
}
inline cplx zn(const SampleMoments& M, int k) {
    if (k == 0) return cplx{M.z0n, 0.0};
    return k > 0 ? M.z2n : std::conj(M.z2n);
}
inline cplx znm(const SampleMoments& M, int k) { return k > 0 ? M.z1nm : M.zm1nm; }
inline cplx zqm(const SampleMoments& M, int k) { return k > 0 ? M.z1qm : M.zm1qm; }

}  // namespace detail

// <J_eta^dag J_eta'^dag J_eta' J_eta> by inclusion-exclusion over index
// coincidences. chi / chip are the phase characters of eta / eta'
// (R -> -1, L -> +1).
inline cplx traj_four_point(const SampleMoments& M, int chi, int chip) {
    using namespace detail;
    const cplx A1 = std::conj(zm(M, chi));
    const cplx A2 = std::conj(zm(M, chip));
    const cplx A3 = zm(M, chip);
    const cplx A4 = zm(M, chi);

    const cplx E34 = zm2(M, chi + chip);
    const cplx E12 = std::conj(E34);
    const cplx E13 = zq(M, chip - chi);
    const cplx E24 = zq(M, chi - chip);
    const cplx E14{M.z0q, 0.0}, E23{M.z0q, 0.0};

    const cplx N13 = zn(M, chip - chi);
    const cplx N24 = zn(M, chi - chip);
    const cplx N14{M.z0n, 0.0}, N23{M.z0n, 0.0};

    const cplx E123 = std::conj(zqm(M, chi));
    const cplx E124 = std::conj(zqm(M, chip));
    const cplx E134 = zqm(M, chip);
    const cplx E234 = zqm(M, chi);
    const cplx E1234{M.z0q2, 0.0};

    const cplx G13_2 = std::conj(znm(M, chi));
    const cplx G13_4 = znm(M, chip);
    const cplx G14_2 = std::conj(znm(M, chip));
    const cplx G14_3 = znm(M, chip);
    const cplx G23_1 = std::conj(znm(M, chi));
    const cplx G23_4 = znm(M, chi);
    const cplx G24_1 = std::conj(znm(M, chip));
    const cplx G24_3 = znm(M, chi);

    const cplx H{M.z0nq, 0.0};
    const double K = M.z0n2;

    // all-distinct classical sum (set-partition inclusion-exclusion)
    cplx cl4 = A1 * A2 * A3 * A4
             - (E12 * A3 * A4 + E13 * A2 * A4 + E14 * A2 * A3 +
                E23 * A1 * A4 + E24 * A1 * A3 + E34 * A1 * A2)
             + (E12 * E34 + E13 * E24 + E14 * E23)
             + 2.0 * (E123 * A4 + E124 * A3 + E134 * A2 + E234 * A1)
             - 6.0 * E1234;

    // one coincidence between a raising and a lowering slot
    cplx x13 = N13 * (A2 * A4 - E24) - G13_2 * A4 - G13_4 * A2 + 2.0 * H;
    cplx x14 = N14 * (A2 * A3 - E23) - G14_2 * A3 - G14_3 * A2 + 2.0 * H;
    cplx x23 = N23 * (A1 * A4 - E14) - G23_1 * A4 - G23_4 * A1 + 2.0 * H;
    cplx x24 = N24 * (A1 * A3 - E13) - G24_1 * A3 - G24_3 * A1 + 2.0 * H;

    // two coincidences
    cplx d2 = N13 * N24 + N14 * N23 - 2.0 * K;

    return cl4 + x13 + x14 + x23 + x24 + d2;
}

// ---------------------------------------------------------------------------
// Peak extraction
// ---------------------------------------------------------------------------

struct PeakResult {
    double r_star = 0.0;
    double t_star = 0.0;
    int index = 0;
    bool at_boundary = false;
};

// Discrete argmax refined by a quadratic through the three bracketing points;
// ties break toward earlier times.
inline PeakResult find_peak(std::span<const double> r, std::span<const double> grid) {
    if (r.size() < 3 || r.size() != grid.size())
        throw InvalidParameter("find_peak needs >= 3 grid points");
    int k = 0;
    for (int i = 1; i < (int)r.size(); ++i)
        if (r[i] > r[k]) k = i;
    PeakResult p;
    p.index = k;
    if (k == 0 || k == (int)r.size() - 1) {
        p.at_boundary = true;
        p.r_star = r[k];
        p.t_star = grid[k];
        return p;
    }
    double rm = r[k - 1], r0 = r[k], rp = r[k + 1];
    double denom = rm - 2.0 * r0 + rp;
    if (std::abs(denom) < 1e-300 * std::abs(r0)) {
        p.r_star = r0;
        p.t_star = grid[k];
        return p;
    }
    double h = grid[k + 1] - grid[k];
    double shift = 0.5 * (rm - rp) / denom;
    p.t_star = grid[k] + shift * h;
    p.r_star = r0 - 0.125 * (rm - rp) * (rm - rp) / denom;
    return p;
}

// ---------------------------------------------------------------------------
// Ensemble reduction
// ---------------------------------------------------------------------------

struct EnsembleStatistics {
    std::vector<double> grid;
    std::vector<double> r, r_se;
    std::vector<double> p_e, p_e_se;
    std::vector<double> g2_auto_rr, g2_cross_rl, g2_total;
    std::vector<double> dir_r, dir_l, dir_diff_std;
    long n_effective = 0;
    long n_failed = 0;
    double r_star = 0.0, t_star = 0.0;
    bool peak_at_boundary = false;
};

// Streaming reducer over trajectory records. Addition order is fixed by the
// caller (ascending trajectory index, chunk-merged in chunk order), which
// makes the reduction bitwise reproducible for any worker count.
class EnsembleAccumulator {
public:
    EnsembleAccumulator() = default;

    EnsembleAccumulator(int n_atoms, double gamma, std::vector<double> grid)
        : n_(n_atoms), gamma_(gamma), grid_(std::move(grid)) {
        const std::size_t m = grid_.size();
        sum_r_.assign(m, 0.0); sum_r2_.assign(m, 0.0);
        sum_pe_.assign(m, 0.0); sum_pe2_.assign(m, 0.0);
        sum_trr_.assign(m, 0.0); sum_tll_.assign(m, 0.0); sum_trl_.assign(m, 0.0);
        sum_den_r_.assign(m, 0.0); sum_den_l_.assign(m, 0.0);
        sum_dir_r_.assign(m, 0.0); sum_dir_l_.assign(m, 0.0);
        sum_diff_.assign(m, 0.0); sum_diff2_.assign(m, 0.0);
    }

    void add(const TrajectoryRecord& rec) {
        if (rec.failed) {
            ++n_failed_;
            return;
        }
        ++count_;
        if (!rec.moments.empty()) {
            if (rec.moments.size() != grid_.size())
                throw InvalidParameter("record grid size mismatch");
            for (std::size_t i = 0; i < grid_.size(); ++i) {
                const SampleMoments& M = rec.moments[i];
                double r = traj_decay_rate(M, gamma_, n_);
                double pe = traj_excited_population(M, n_);
                sum_r_[i] += r; sum_r2_[i] += r * r;
                sum_pe_[i] += pe; sum_pe2_[i] += pe * pe;
                sum_trr_[i] += traj_four_point(M, -1, -1).real();
                sum_tll_[i] += traj_four_point(M, +1, +1).real();
                sum_trl_[i] += traj_four_point(M, -1, +1).real();
                sum_den_r_[i] += traj_channel_occupation(M, -1);
                sum_den_l_[i] += traj_channel_occupation(M, +1);
                double rr = traj_directional_rate(M, gamma_, -1);
                double rl = traj_directional_rate(M, gamma_, +1);
                sum_dir_r_[i] += rr; sum_dir_l_[i] += rl;
                double d = rr - rl;
                sum_diff_[i] += d; sum_diff2_[i] += d * d;
            }
        } else if (!rec.r_direct.empty()) {
            if (rec.r_direct.size() != grid_.size())
                throw InvalidParameter("record grid size mismatch");
            for (std::size_t i = 0; i < grid_.size(); ++i) {
                double r = rec.r_direct[i];
                sum_r_[i] += r; sum_r2_[i] += r * r;
            }
            direct_only_ = true;
        }
    }

    // Chunk partials combine by plain summation; keep the call order fixed.
    void merge(const EnsembleAccumulator& other) {
        count_ += other.count_;
        n_failed_ += other.n_failed_;
        direct_only_ = direct_only_ || other.direct_only_;
        auto acc = [](std::vector<double>& a, const std::vector<double>& b) {
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
        };
        acc(sum_r_, other.sum_r_); acc(sum_r2_, other.sum_r2_);
        acc(sum_pe_, other.sum_pe_); acc(sum_pe2_, other.sum_pe2_);
        acc(sum_trr_, other.sum_trr_); acc(sum_tll_, other.sum_tll_); acc(sum_trl_, other.sum_trl_);
        acc(sum_den_r_, other.sum_den_r_); acc(sum_den_l_, other.sum_den_l_);
        acc(sum_dir_r_, other.sum_dir_r_); acc(sum_dir_l_, other.sum_dir_l_);
        acc(sum_diff_, other.sum_diff_); acc(sum_diff2_, other.sum_diff2_);
    }

    long count() const { return count_; }
    long failed() const { return n_failed_; }

    EnsembleStatistics finalize() const {
        EnsembleStatistics s;
        s.grid = grid_;
        const std::size_t m = grid_.size();
        const double nt = std::max<long>(count_, 1);
        auto se_of = [&](double sum, double sum2) {
            if (count_ < 2) return 0.0;
            double mean = sum / nt;
            double var = std::max(0.0, sum2 / nt - mean * mean);
            return std::sqrt(var / (nt - 1.0));
        };
        s.r.resize(m); s.r_se.resize(m);
        s.p_e.resize(m); s.p_e_se.resize(m);
        s.g2_auto_rr.resize(m); s.g2_cross_rl.resize(m); s.g2_total.resize(m);
        s.dir_r.resize(m); s.dir_l.resize(m); s.dir_diff_std.resize(m);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double den_floor = 1e-12 * (gamma_ * n_) * (gamma_ * n_);
        for (std::size_t i = 0; i < m; ++i) {
            s.r[i] = sum_r_[i] / nt;
            s.r_se[i] = se_of(sum_r_[i], sum_r2_[i]);
            s.p_e[i] = sum_pe_[i] / nt;
            s.p_e_se[i] = se_of(sum_pe_[i], sum_pe2_[i]);
            double den_r = 0.5 * gamma_ * sum_den_r_[i] / nt;
            double den_l = 0.5 * gamma_ * sum_den_l_[i] / nt;
            double g2_scale = 0.25 * gamma_ * gamma_ / nt;
            if (direct_only_ || den_r * den_r < den_floor || den_r * den_l < den_floor) {
                s.g2_auto_rr[i] = nan;
                s.g2_cross_rl[i] = nan;
            } else {
                s.g2_auto_rr[i] = g2_scale * sum_trr_[i] / (den_r * den_r);
                s.g2_cross_rl[i] = g2_scale * sum_trl_[i] / (den_r * den_l);
            }
            double rt = s.r[i];
            if (direct_only_ || rt * rt < den_floor) {
                s.g2_total[i] = nan;
            } else {
                s.g2_total[i] = g2_scale *
                    (sum_trr_[i] + sum_tll_[i] + 2.0 * sum_trl_[i]) / (rt * rt);
            }
            s.dir_r[i] = sum_dir_r_[i] / nt;
            s.dir_l[i] = sum_dir_l_[i] / nt;
            double dm = sum_diff_[i] / nt;
            s.dir_diff_std[i] = count_ > 1
                ? std::sqrt(std::max(0.0, sum_diff2_[i] / nt - dm * dm))
                : 0.0;
        }
        s.n_effective = count_;
        s.n_failed = n_failed_;
        if (m >= 3) {
            PeakResult p = find_peak(s.r, s.grid);
            s.r_star = p.r_star;
            s.t_star = p.t_star;
            s.peak_at_boundary = p.at_boundary;
        }
        return s;
    }

private:
    int n_ = 0;
    double gamma_ = 1.0;
    std::vector<double> grid_;
    long count_ = 0, n_failed_ = 0;
    bool direct_only_ = false;
    std::vector<double> sum_r_, sum_r2_, sum_pe_, sum_pe2_;
    std::vector<double> sum_trr_, sum_tll_, sum_trl_;
    std::vector<double> sum_den_r_, sum_den_l_;
    std::vector<double> sum_dir_r_, sum_dir_l_, sum_diff_, sum_diff2_;
};

inline EnsembleStatistics reduce_records(const std::vector<TrajectoryRecord>& records,
                                         int n_atoms, double gamma,
                                         const std::vector<double>& grid) {
    EnsembleAccumulator acc(n_atoms, gamma, grid);
    for (const auto& r : records) acc.add(r);
    return acc.finalize();
}

// Per-trajectory directional rate time series (physical trajectories only).
inline std::pair<std::vector<double>, std::vector<double>>
directional_rates(const TrajectoryRecord& rec, double gamma) {
    if (rec.moments.empty())
        throw InvalidParameter("directional_rates requires moment-carrying records");
    std::vector<double> rr(rec.moments.size()), rl(rec.moments.size());
    for (std::size_t i = 0; i < rec.moments.size(); ++i) {
        rr[i] = traj_directional_rate(rec.moments[i], gamma, -1);
        rl[i] = traj_directional_rate(rec.moments[i], gamma, +1);
    }
    return {std::move(rr), std::move(rl)};
}

// ---------------------------------------------------------------------------
// Histograms
// ---------------------------------------------------------------------------

struct HistogramGrid {
    int nx = 0, ny = 0;
    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    std::vector<double> counts;  // row-major [iy * nx + ix]
    double total = 0.0;
    std::string label;

    double density(int ix, int iy) const {
        if (total <= 0.0) return 0.0;
        return counts[std::size_t(iy) * nx + ix] / total;
    }
};

inline HistogramGrid make_angle_histogram(int bins, const std::string& label) {
    HistogramGrid h;
    h.nx = h.ny = bins;
    h.x_lo = h.y_lo = -kPi;
    h.x_hi = h.y_hi = kPi;
    h.counts.assign(std::size_t(bins) * bins, 0.0);
    h.label = label;
    return h;
}

inline void histogram_insert(HistogramGrid& h, double x, double y, double w = 1.0) {
    int ix = int((x - h.x_lo) / (h.x_hi - h.x_lo) * h.nx);
    int iy = int((y - h.y_lo) / (h.y_hi - h.y_lo) * h.ny);
    ix = std::clamp(ix, 0, h.nx - 1);
    iy = std::clamp(iy, 0, h.ny - 1);
    h.counts[std::size_t(iy) * h.nx + ix] += w;
    h.total += w;
}

// Joint (d_xi, d_phi) density over sampled atom pairs at a snapshot time.
// Dipoles too close to the poles carry no azimuth and are skipped.
inline HistogramGrid spin_ordering_histogram(const std::vector<TrajectoryRecord>& records,
                                             const DisorderRealization& realization,
                                             int sample_index, int bins,
                                             long pair_budget,
                                             std::uint64_t seed = 0x9d0f) {
    HistogramGrid h = make_angle_histogram(bins, "ordering");
    const int n = realization.n();
    RngStream pick(seed, kSharedRealizationStream + 1);
    long per_record = std::max<long>(1, pair_budget / std::max<std::size_t>(records.size(), 1));
    constexpr double kMinSinTheta = 0.1;
    for (const auto& rec : records) {
        if (rec.failed) continue;
        const BlochSnapshot* snap = nullptr;
        for (const auto& s : rec.snapshots)
            if (s.sample_index == sample_index) snap = &s;
        if (!snap) continue;
        for (long p = 0; p < per_record; ++p) {
            int i = int(pick.uniform01() * n);
            int j = int(pick.uniform01() * n);
            if (i >= n) i = n - 1;
            if (j >= n) j = n - 1;
            if (i == j) continue;
            const auto& bi = snap->bloch[i];
            const auto& bj = snap->bloch[j];
            double si = std::hypot(bi[0], bi[1]);
            double sj = std::hypot(bj[0], bj[1]);
            if (si < kMinSinTheta || sj < kMinSinTheta) continue;
            double dphi = wrap_angle_half_open(std::atan2(bi[1], bi[0]) - std::atan2(bj[1], bj[0]));
            double dxi = wrap_angle_half_open(realization.xi[i] - realization.xi[j]);
            histogram_insert(h, dxi, dphi);
        }
    }
    if (h.total <= 0.0) throw NumericalFailure("spin_ordering_histogram: no retained pairs");
    return h;
}

// Fraction of histogram mass inside |d_phi -+ d_xi| < half_width (wrapped),
// and the fraction a uniform density would put there (bin-area count).
inline std::pair<double, double> diagonal_band_mass(const HistogramGrid& h, double half_width) {
    double mass = 0.0;
    long band_bins = 0;
    for (int iy = 0; iy < h.ny; ++iy) {
        double y = h.y_lo + (iy + 0.5) * (h.y_hi - h.y_lo) / h.ny;
        for (int ix = 0; ix < h.nx; ++ix) {
            double x = h.x_lo + (ix + 0.5) * (h.x_hi - h.x_lo) / h.nx;
            double d1 = std::abs(wrap_angle_half_open(y - x));
            double d2 = std::abs(wrap_angle_half_open(y + x));
            if (std::min(d1, d2) < half_width) {
                mass += h.density(ix, iy);
                ++band_bins;
            }
        }
    }
    double uniform = double(band_bins) / (double(h.nx) * h.ny);
    return {mass, uniform};
}

// Same for the horizontal band |d_phi| < half_width.
inline std::pair<double, double> horizontal_band_mass(const HistogramGrid& h, double half_width) {
    double mass = 0.0;
    long band_bins = 0;
    for (int iy = 0; iy < h.ny; ++iy) {
        double y = h.y_lo + (iy + 0.5) * (h.y_hi - h.y_lo) / h.ny;
        bool in = std::abs(wrap_angle_half_open(y)) < half_width;
        for (int ix = 0; ix < h.nx; ++ix) {
            if (in) {
                mass += h.density(ix, iy);
                ++band_bins;
            }
        }
    }
    double uniform = double(band_bins) / (double(h.nx) * h.ny);
    return {mass, uniform};
}

// 2D density of per-trajectory (R_R, R_L) at the burst.
inline HistogramGrid rate_pair_histogram(std::span<const double> rr, std::span<const double> rl,
                                         int bins) {
    HistogramGrid h;
    h.nx = h.ny = bins;
    double hi = 1e-300;
    for (double v : rr) hi = std::max(hi, v);
    for (double v : rl) hi = std::max(hi, v);
    h.x_lo = h.y_lo = 0.0;
    h.x_hi = h.y_hi = hi * 1.0000001;
    h.counts.assign(std::size_t(bins) * bins, 0.0);
    h.label = "rate_pair";
    for (std::size_t i = 0; i < rr.size(); ++i)
        histogram_insert(h, std::max(0.0, rr[i]), std::max(0.0, rl[i]));
    return h;
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw InvalidParameter("pearson: need two equal series");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= n; my /= n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxx += dx * dx; syy += dy * dy; sxy += dx * dy;
    }
    if (sxx <= 0 || syy <= 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace wqed
