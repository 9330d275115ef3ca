#ifndef METAPOP_STOCHASTIC_HPP
#define METAPOP_STOCHASTIC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "metapop/chain.hpp"
#include "metapop/errors.hpp"
#include "metapop/model.hpp"
#include "metapop/parallel.hpp"
#include "metapop/rng.hpp"

namespace metapop {

// ---------------------------------------------------------------------------
// Single-patch chain simulation
// ---------------------------------------------------------------------------

struct PatchRun {
    std::vector<std::pair<double, std::int64_t>> path;  ///< sampled (t, state) on the grid
    double time_avg_state = 0.0;                        ///< after burn-in
    double time_avg_power = 0.0;                        ///< time average of state^(1+delta)
    std::vector<double> occupation;                     ///< time-weighted occupancy after burn-in
    double burn_in = 0.0;
    std::uint64_t events = 0;
    std::int64_t final_state = 0;
};

/// Exact event-by-event simulation of the single-patch chain up to time T.
/// The occupation histogram and the time averages use the window
/// [burn_in_frac*T, T].
inline PatchRun simulate_patch(const ChainSpec& spec, std::int64_t init, double T, std::uint64_t seed,
                               double dt_sample = 1.0, double burn_in_frac = 0.2,
                               double delta_pow = 0.5) {
    if (init < 0) throw InvalidArgument("initial state must be >= 0");
    if (!(T > 0.0)) throw InvalidArgument("horizon must be positive");
    CounterRng rng(seed, rng_stream::events);

    PatchRun run;
    run.burn_in = burn_in_frac * T;
    const double window = T - run.burn_in;

    std::int64_t state = init;
    double t = 0.0;
    double next_sample = 0.0;
    double avg = 0.0, avg_pow = 0.0;

    auto account = [&](double from, double to) {
        // contribution of the constant-state interval [from, to)
        const double lo = std::max(from, run.burn_in);
        if (to <= lo) return;
        const double w = to - lo;
        avg += w * static_cast<double>(state);
        avg_pow += w * std::pow(static_cast<double>(state), 1.0 + delta_pow);
        if (static_cast<std::size_t>(state) >= run.occupation.size())
            run.occupation.resize(static_cast<std::size_t>(state) + 1, 0.0);
        run.occupation[static_cast<std::size_t>(state)] += w;
    };

    for (;;) {
        const double up = spec.up(state);
        const double down = spec.down(state);
        const double kill = state >= 1 ? spec.kill() : 0.0;
        const double total = up + down + kill;

        double t_next = total > 0.0 ? t + rng.next_exp(total) : T;
        if (t_next > T) t_next = T;

        while (next_sample <= t_next + 1e-15 && next_sample <= T) {
            run.path.emplace_back(next_sample, state);
            next_sample += dt_sample;
        }
        account(t, t_next);
        t = t_next;
        if (t >= T) break;

        const double r = rng.next_uniform() * total;
        if (r <= up)
            state += 1;
        else if (r <= up + down)
            state -= 1;
        else
            state = 0;
        ++run.events;
    }

    run.final_state = state;
    if (window > 0.0) {
        avg /= window;
        avg_pow /= window;
        for (double& v : run.occupation) v /= window;
    }
    run.time_avg_state = avg;
    run.time_avg_power = avg_pow;
    return run;
}

// ---------------------------------------------------------------------------
// Finite metapopulation simulation
// ---------------------------------------------------------------------------

struct EventCounters {
    std::uint64_t births = 0;
    std::uint64_t deaths = 0;
    std::uint64_t migrations = 0;
    std::uint64_t migration_successes = 0;
    std::uint64_t migration_failures = 0;
    std::uint64_t catastrophes = 0;
    std::int64_t catastrophe_mass = 0;  ///< individuals removed by catastrophes
};

/// A finite system of patches with its running clock and event ledger.
struct PatchSystem {
    std::vector<std::int64_t> counts;
    double t = 0.0;
    std::uint64_t rng_seed = 0;
    EventCounters counters;

    std::int64_t n() const { return static_cast<std::int64_t>(counts.size()); }
    std::int64_t total_population() const {
        std::int64_t tot = 0;
        for (auto c : counts) tot += c;
        return tot;
    }
};

struct MetapopRun {
    std::vector<double> times;
    std::vector<std::vector<double>> freq;  ///< freq[k][i] = fraction of patches at occupancy i
    std::vector<double> mean_occupancy;     ///< population mean per sample
    EventCounters counters;
    std::int64_t initial_population = 0;
    std::int64_t final_population = 0;
    std::uint64_t events = 0;
};

namespace detail {

/// Fenwick tree over per-patch total rates: O(log n) update and sampling.
class RateTree {
  public:
    explicit RateTree(std::size_t n) : n_(n), tree_(n + 1, 0.0), leaf_(n, 0.0) {}

    void set(std::size_t i, double rate) {
        const double delta = rate - leaf_[i];
        leaf_[i] = rate;
        for (std::size_t k = i + 1; k <= n_; k += k & (~k + 1)) tree_[k] += delta;
    }

    double total() const {
        double s = 0.0;
        for (std::size_t k = n_; k > 0; k -= k & (~k + 1)) s += tree_[k];
        return s;
    }

    /// Index of the first leaf whose prefix sum exceeds target.
    std::size_t sample(double target) const {
        std::size_t pos = 0;
        std::size_t mask = 1;
        while ((mask << 1) <= n_) mask <<= 1;
        for (; mask > 0; mask >>= 1) {
            const std::size_t nxt = pos + mask;
            if (nxt <= n_ && tree_[nxt] < target) {
                pos = nxt;
                target -= tree_[nxt];
            }
        }
        return std::min(pos, n_ - 1);
    }

    double leaf(std::size_t i) const { return leaf_[i]; }

  private:
    std::size_t n_;
    std::vector<double> tree_;
    std::vector<double> leaf_;
};

}  // namespace detail

/// Exact simulation of n patches under the full stochastic dynamics: per
/// patch with count c, births at c*b_c, deaths at c*d_c, migration departures
/// at c*gamma, catastrophes at nu. A migrant survives with probability rho
/// and lands in a patch chosen uniformly among all n (the source included;
/// the self-return probability 1/n vanishes in the large-n limit). The raw,
/// unnormalized model is used here; folding rho into deaths is exactly what
/// this simulator validates.
inline MetapopRun simulate_metapopulation(const RateModel& model, std::int64_t n_patches,
                                          const std::vector<std::int64_t>& init_histogram, double T,
                                          std::uint64_t seed, const std::vector<double>& sample_times,
                                          std::int64_t i_cap = 50) {
    if (n_patches < 2) throw InvalidArgument("need at least two patches");
    if (!(T >= 0.0)) throw InvalidArgument("horizon must be nonnegative");

    std::int64_t assigned = 0;
    for (auto h : init_histogram) {
        if (h < 0) throw InvalidArgument("histogram entries must be >= 0");
        assigned += h;
    }
    if (assigned != n_patches)
        throw InvalidArgument("initial histogram must account for every patch (" +
                              std::to_string(assigned) + " of " + std::to_string(n_patches) + ")");

    PatchSystem sys;
    sys.rng_seed = seed;
    sys.counts.reserve(static_cast<std::size_t>(n_patches));
    for (std::size_t i = 0; i < init_histogram.size(); ++i)
        for (std::int64_t r = 0; r < init_histogram[i]; ++r)
            sys.counts.push_back(static_cast<std::int64_t>(i));

    CounterRng events(seed, rng_stream::events);
    CounterRng coins(seed, rng_stream::thinning);
    CounterRng dests(seed, rng_stream::destinations);

    // occupancy histogram for O(i_cap) sampling
    std::vector<std::int64_t> occ_hist;
    auto bump = [&](std::int64_t c, std::int64_t delta) {
        if (static_cast<std::size_t>(c) >= occ_hist.size()) occ_hist.resize(static_cast<std::size_t>(c) + 1, 0);
        occ_hist[static_cast<std::size_t>(c)] += delta;
    };
    for (auto c : sys.counts) bump(c, +1);

    const auto n = static_cast<std::size_t>(n_patches);
    detail::RateTree rates(n);
    auto patch_rate = [&](std::int64_t c) {
        if (c == 0) return 0.0;  // empty patches have no events (catastrophe would be a no-op)
        const double cd = static_cast<double>(c);
        return cd * (model.birth(c) + model.death(c) + model.gamma) + model.nu;
    };
    for (std::size_t i = 0; i < n; ++i) rates.set(i, patch_rate(sys.counts[i]));

    MetapopRun run;
    run.initial_population = sys.total_population();

    std::size_t next_sample = 0;
    auto record_through = [&](double upto) {
        while (next_sample < sample_times.size() && sample_times[next_sample] <= upto) {
            std::vector<double> f(static_cast<std::size_t>(i_cap) + 1, 0.0);
            for (std::size_t i = 0; i < occ_hist.size() && i <= static_cast<std::size_t>(i_cap); ++i)
                f[i] = static_cast<double>(occ_hist[i]) / static_cast<double>(n_patches);
            run.times.push_back(sample_times[next_sample]);
            run.freq.push_back(std::move(f));
            run.mean_occupancy.push_back(static_cast<double>(sys.total_population()) /
                                         static_cast<double>(n_patches));
            ++next_sample;
        }
    };

    for (;;) {
        const double total = rates.total();
        double t_next = total > 0.0 ? sys.t + events.next_exp(total) : T;
        if (t_next > T) t_next = T;
        record_through(std::min(t_next, T));
        sys.t = t_next;
        if (sys.t >= T || total <= 0.0) break;

        const std::size_t patch = rates.sample(events.next_uniform() * total);
        const std::int64_t c = sys.counts[patch];
        if (c == 0) continue;  // rounding in the rate tree; empty patches have no events
        const double cd = static_cast<double>(c);
        const double birth = cd * model.birth(c);
        const double death = cd * model.death(c);
        const double migr = cd * model.gamma;
        const double r = events.next_uniform() * rates.leaf(patch);

        if (r <= birth) {
            sys.counts[patch] = c + 1;
            bump(c, -1);
            bump(c + 1, +1);
            ++sys.counters.births;
            rates.set(patch, patch_rate(c + 1));
        } else if (r <= birth + death) {
            sys.counts[patch] = c - 1;
            bump(c, -1);
            bump(c - 1, +1);
            ++sys.counters.deaths;
            rates.set(patch, patch_rate(c - 1));
        } else if (r <= birth + death + migr) {
            sys.counts[patch] = c - 1;
            bump(c, -1);
            bump(c - 1, +1);
            ++sys.counters.migrations;
            rates.set(patch, patch_rate(c - 1));
            if (coins.next_bernoulli(model.rho)) {
                const auto dest = static_cast<std::size_t>(dests.next_below(n));
                const std::int64_t dc = sys.counts[dest];
                sys.counts[dest] = dc + 1;
                bump(dc, -1);
                bump(dc + 1, +1);
                ++sys.counters.migration_successes;
                rates.set(dest, patch_rate(dc + 1));
            } else {
                ++sys.counters.migration_failures;
            }
        } else {
            sys.counts[patch] = 0;
            bump(c, -1);
            bump(0, +1);
            ++sys.counters.catastrophes;
            sys.counters.catastrophe_mass += c;
            rates.set(patch, 0.0);
        }
        ++run.events;
    }

    record_through(T);
    run.counters = sys.counters;
    run.final_population = sys.total_population();
    return run;
}

// ---------------------------------------------------------------------------
// Coupled pair and common-random-number experiments
// ---------------------------------------------------------------------------

/// Joint state of the coupled pair: the lower copy Y and the nonnegative
/// surplus W, so that the two coupled chains are Y and Y + W.
struct CoupledPair {
    std::int64_t y = 0;
    std::int64_t w = 0;
    double t = 0.0;
};

namespace detail {

/// One realization of the coupled pair (Y, W) started from (l, k-l), with a
/// shared catastrophe clock collapsing both components to 0. W is the
/// pathwise difference of the two coupled copies of the chain and can never
/// go negative; its value is recorded at each grid time.
///
/// The four birth/death channels and the catastrophe use separate streams
/// and Anderson-style next-reaction clocks, so a channel consumes randomness
/// only when it fires. With common seeds this aligns W draws across runs
/// that differ only in the initial Y, which is what makes the
/// common-random-number difference estimates tight.
struct CoupledChannels {
    CounterRng y_stream, w_stream, cat_stream;
    double py_up = 0.0, py_down = 0.0, pw_up = 0.0, pw_down = 0.0, pcat = 0.0;  // next firing (internal)
    double ty_up = 0.0, ty_down = 0.0, tw_up = 0.0, tw_down = 0.0, tcat = 0.0;  // consumed internal time

    CoupledChannels(std::uint64_t seed, std::uint64_t stream_base)
        : y_stream(seed, stream_base + rng_stream::coupled_y),
          w_stream(seed, stream_base + rng_stream::coupled_w),
          cat_stream(seed, stream_base + rng_stream::catastrophe) {
        py_up = y_stream.next_exp1();
        py_down = y_stream.next_exp1();
        pw_up = w_stream.next_exp1();
        pw_down = w_stream.next_exp1();
        pcat = cat_stream.next_exp1();
    }
};

inline void run_coupled_pair(const RateModel& model, double s, std::int64_t y0, std::int64_t w0,
                             const std::vector<double>& t_grid, std::uint64_t seed,
                             std::uint64_t stream_base, std::vector<std::int64_t>& w_at_grid,
                             std::vector<std::int64_t>& y_at_grid, std::uint64_t* event_count) {
    CoupledChannels ch(seed, stream_base);
    CoupledPair state{y0, w0, 0.0};
    std::int64_t& y = state.y;
    std::int64_t& w = state.w;
    double& t = state.t;
    std::size_t gi = 0;
    w_at_grid.assign(t_grid.size(), 0);
    y_at_grid.assign(t_grid.size(), 0);

    auto total_birth = [&](std::int64_t i) {
        return i > 0 ? static_cast<double>(i) * model.birth(i) : 0.0;
    };
    auto total_death = [&](std::int64_t i) {
        return i > 0 ? static_cast<double>(i) * (model.death(i) + model.gamma) : 0.0;
    };

    const double horizon = t_grid.empty() ? 0.0 : t_grid.back();
    for (;;) {
        const double ry_up = total_birth(y) + model.gamma * s;
        const double ry_down = total_death(y);
        const double rw_up = std::max(0.0, total_birth(y + w) - total_birth(y));
        const double rw_down = std::max(0.0, total_death(y + w) - total_death(y));
        const double rcat = model.nu;

        const double inf = std::numeric_limits<double>::infinity();
        const double dt_y_up = ry_up > 0.0 ? (ch.py_up - ch.ty_up) / ry_up : inf;
        const double dt_y_down = ry_down > 0.0 ? (ch.py_down - ch.ty_down) / ry_down : inf;
        const double dt_w_up = rw_up > 0.0 ? (ch.pw_up - ch.tw_up) / rw_up : inf;
        const double dt_w_down = rw_down > 0.0 ? (ch.pw_down - ch.tw_down) / rw_down : inf;
        const double dt_cat = rcat > 0.0 ? (ch.pcat - ch.tcat) / rcat : inf;

        double dt = dt_y_up;
        int which = 0;
        if (dt_y_down < dt) { dt = dt_y_down; which = 1; }
        if (dt_w_up < dt) { dt = dt_w_up; which = 2; }
        if (dt_w_down < dt) { dt = dt_w_down; which = 3; }
        if (dt_cat < dt) { dt = dt_cat; which = 4; }

        const double t_next = dt == inf ? horizon : t + dt;
        while (gi < t_grid.size() && t_grid[gi] <= std::min(t_next, horizon) + 1e-15) {
            w_at_grid[gi] = w;
            y_at_grid[gi] = y;
            ++gi;
        }
        if (t_next >= horizon || dt == inf) break;
        t = t_next;

        ch.ty_up += ry_up * dt;
        ch.ty_down += ry_down * dt;
        ch.tw_up += rw_up * dt;
        ch.tw_down += rw_down * dt;
        ch.tcat += rcat * dt;

        switch (which) {
            case 0: y += 1; ch.py_up += ch.y_stream.next_exp1(); break;
            case 1: y -= 1; ch.py_down += ch.y_stream.next_exp1(); break;
            case 2: w += 1; ch.pw_up += ch.w_stream.next_exp1(); break;
            case 3: w -= 1; ch.pw_down += ch.w_stream.next_exp1(); break;
            case 4: y = 0; w = 0; ch.pcat += ch.cat_stream.next_exp1(); break;
        }
        if (event_count) ++*event_count;
        if (w < 0 || y < 0)
            throw CouplingBug("coupled pair left the admissible region: Y = " + std::to_string(y) +
                              ", W = " + std::to_string(w));
    }
}

}  // namespace detail

struct CoupledPairReport {
    std::vector<double> t_grid;
    std::vector<double> mean_difference;  ///< estimate of E(Z1_t - Z2_t)
    std::vector<double> se_difference;
    std::vector<double> prob_strict;  ///< estimate of P[Z1_t > Z2_t]
    std::uint64_t reps = 0;
    std::uint64_t events = 0;
    std::uint64_t domination_violations = 0;  ///< nonzero would have thrown already
};

/// Replicated coupled-pair simulation with initial states k > l >= 0.
/// Pathwise domination Z1 >= Z2 holds by construction; any violation throws.
inline CoupledPairReport coupled_pair_run(const RateModel& model, double s, std::int64_t k,
                                          std::int64_t l, const std::vector<double>& t_grid,
                                          std::uint64_t reps, std::uint64_t seed) {
    if (!model.normalized()) throw InvalidModel("coupled pair requires a normalized model");
    if (k < l || l < 0) throw InvalidArgument("need initial states k >= l >= 0");
    if (t_grid.empty()) throw InvalidArgument("need a nonempty time grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] <= t_grid[i - 1]) throw InvalidArgument("time grid must increase");

    const std::size_t g = t_grid.size();
    std::vector<double> sum_w(g, 0.0), sum_w2(g, 0.0), strict(g, 0.0);
    std::vector<std::uint64_t> event_counts(reps, 0);
    std::vector<std::vector<std::int64_t>> w_all(reps);

    parallel_reps(reps, [&](std::uint64_t r) {
        std::vector<std::int64_t> w_at, y_at;
        detail::run_coupled_pair(model, s, l, k - l, t_grid, seed, rng_stream::stride * r, w_at, y_at,
                                 &event_counts[r]);
        w_all[r] = std::move(w_at);
    });

    for (std::uint64_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < g; ++i) {
            const auto w = static_cast<double>(w_all[r][i]);
            sum_w[i] += w;
            sum_w2[i] += w * w;
            if (w > 0) strict[i] += 1.0;
        }

    CoupledPairReport rep;
    rep.t_grid = t_grid;
    rep.reps = reps;
    for (auto c : event_counts) rep.events += c;
    const auto n = static_cast<double>(reps);
    for (std::size_t i = 0; i < g; ++i) {
        const double mean = sum_w[i] / n;
        const double var = std::max(0.0, sum_w2[i] / n - mean * mean);
        rep.mean_difference.push_back(mean);
        rep.se_difference.push_back(std::sqrt(var / n));
        rep.prob_strict.push_back(strict[i] / n);
    }
    return rep;
}

struct SecondDifferenceResult {
    std::vector<std::int64_t> m_values;  ///< m for which D_m = E^(m+1)Z - E^(m)Z was estimated
    std::vector<double> t_grid;
    std::vector<std::vector<double>> first_difference;       ///< [m][t] estimate of D_m(t)
    std::vector<std::vector<double>> second_difference;      ///< [m][t] estimate of D_{m+1} - D_m
    std::vector<std::vector<double>> second_difference_se;   ///< paired standard errors
    std::uint64_t reps = 0;
};

/// Common-random-number estimate of the first and second differences of
/// m -> E^(m) Z_t. Each replication runs the coupled pair (Y_0 = m, W_0 = 1)
/// for every m with identical streams, so the per-replication paired
/// difference W^(m) - W^(m+1) estimates -(second difference) with most of
/// the common noise cancelled.
inline SecondDifferenceResult second_difference_experiment(const RateModel& model, double s,
                                                           std::int64_t m_lo, std::int64_t m_hi,
                                                           const std::vector<double>& t_grid,
                                                           std::uint64_t reps, std::uint64_t seed) {
    if (m_lo < 0 || m_hi < m_lo) throw InvalidArgument("need 0 <= m_lo <= m_hi");
    if (t_grid.empty()) throw InvalidArgument("need a nonempty time grid");
    const auto n_m = static_cast<std::size_t>(m_hi - m_lo + 2);  // D_m needs W-runs at m_lo..m_hi+1
    const std::size_t g = t_grid.size();

    // Replications are processed in fixed-size blocks (parallel within a
    // block, sequential reduction between blocks) so that memory stays
    // bounded and results do not depend on the worker count.
    const std::uint64_t block = 65536;
    std::vector<double> sum_first(n_m * g, 0.0);
    std::vector<double> sum_d((n_m - 1) * g, 0.0), sum_d2((n_m - 1) * g, 0.0);
    std::vector<std::int64_t> w_block(static_cast<std::size_t>(block) * n_m * g, 0);

    for (std::uint64_t base = 0; base < reps; base += block) {
        const std::uint64_t count = std::min(block, reps - base);
        parallel_reps(count, [&](std::uint64_t k) {
            const std::uint64_t r = base + k;
            std::vector<std::int64_t> w_at, y_at;
            for (std::size_t mi = 0; mi < n_m; ++mi) {
                const std::int64_t m = m_lo + static_cast<std::int64_t>(mi);
                detail::run_coupled_pair(model, s, m, 1, t_grid, seed, rng_stream::stride * r, w_at,
                                         y_at, nullptr);
                for (std::size_t i = 0; i < g; ++i)
                    w_block[(static_cast<std::size_t>(k) * n_m + mi) * g + i] = w_at[i];
            }
        });
        for (std::uint64_t k = 0; k < count; ++k)
            for (std::size_t mi = 0; mi < n_m; ++mi)
                for (std::size_t i = 0; i < g; ++i) {
                    const auto v = static_cast<double>(w_block[(static_cast<std::size_t>(k) * n_m + mi) * g + i]);
                    sum_first[mi * g + i] += v;
                    if (mi + 1 < n_m) {
                        const auto next = static_cast<double>(
                            w_block[(static_cast<std::size_t>(k) * n_m + mi + 1) * g + i]);
                        const double d = next - v;
                        sum_d[mi * g + i] += d;
                        sum_d2[mi * g + i] += d * d;
                    }
                }
    }

    SecondDifferenceResult out;
    out.t_grid = t_grid;
    out.reps = reps;
    const auto n = static_cast<double>(reps);
    for (std::size_t mi = 0; mi < n_m; ++mi) {
        out.m_values.push_back(m_lo + static_cast<std::int64_t>(mi));
        std::vector<double> first(g, 0.0);
        for (std::size_t i = 0; i < g; ++i) first[i] = sum_first[mi * g + i] / n;
        out.first_difference.push_back(std::move(first));
    }
    for (std::size_t mi = 0; mi + 1 < n_m; ++mi) {
        std::vector<double> mean(g, 0.0), se(g, 0.0);
        for (std::size_t i = 0; i < g; ++i) {
            mean[i] = sum_d[mi * g + i] / n;
            const double var = std::max(0.0, sum_d2[mi * g + i] / n - mean[i] * mean[i]);
            se[i] = std::sqrt(var / n);
        }
        out.second_difference.push_back(std::move(mean));
        out.second_difference_se.push_back(std::move(se));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo reproduction number
// ---------------------------------------------------------------------------

struct MonteCarloEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::uint64_t reps = 0;
    std::uint64_t censored = 0;  ///< paths cut at the event cap (bias flag)
};

/// Monte Carlo estimate of the reproduction number: gamma times the mean
/// area under the zero-immigration chain started at 1, accumulated until
/// absorption at 0.
inline MonteCarloEstimate r0_monte_carlo(const RateModel& model, std::uint64_t reps, std::uint64_t seed,
                                         std::uint64_t max_events_per_path = 10000000) {
    if (!model.normalized()) throw InvalidModel("Monte Carlo reproduction number needs a normalized model");
    if (reps == 0) throw InvalidArgument("need at least one path");
    const ChainSpec spec = chain_rates(model, 0.0);

    std::vector<double> areas(reps, 0.0);
    std::vector<std::uint8_t> cut(reps, 0);
    parallel_reps(reps, [&](std::uint64_t r) {
        CounterRng rng(seed, rng_stream::stride * r + rng_stream::events);
        std::int64_t state = 1;
        double area = 0.0;
        std::uint64_t events = 0;
        while (state > 0) {
            const double up = spec.up(state);
            const double down = spec.down(state);
            const double kill = spec.kill();
            const double total = up + down + kill;
            const double dt = rng.next_exp(total);
            area += dt * static_cast<double>(state);
            const double u = rng.next_uniform() * total;
            if (u <= up)
                state += 1;
            else if (u <= up + down)
                state -= 1;
            else
                state = 0;
            if (++events >= max_events_per_path) {
                cut[r] = 1;
                break;
            }
        }
        areas[r] = area;
    });

    double sum = 0.0, sum2 = 0.0;
    MonteCarloEstimate est;
    est.reps = reps;
    for (std::uint64_t r = 0; r < reps; ++r) {
        sum += areas[r];
        sum2 += areas[r] * areas[r];
        est.censored += cut[r];
    }
    const auto n = static_cast<double>(reps);
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    est.value = model.gamma * mean;
    est.std_error = model.gamma * std::sqrt(var / n);
    return est;
}

}  // namespace metapop

#endif  // METAPOP_STOCHASTIC_HPP
