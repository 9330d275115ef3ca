#ifndef METAPOP_IO_HPP
#define METAPOP_IO_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metapop/chain.hpp"
#include "metapop/errors.hpp"
#include "metapop/meanfield.hpp"
#include "metapop/model.hpp"
#include "metapop/stochastic.hpp"
#include "metapop/threshold.hpp"

namespace metapop {

using json = nlohmann::json;

/// Floats are emitted with 17 significant digits and '.' decimal separator,
/// which round-trips doubles exactly and keeps reruns byte-identical.
inline std::string format_float(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// FNV-1a hash of a canonical string, as a fixed-width hex token carried by
/// every output for reproducibility.
inline std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Model specification files: {"family": ..., "params": {...}, "gamma": ...,
// "nu": ..., "rho": ...}
// ---------------------------------------------------------------------------

inline RateModel model_from_json(const json& j) {
    try {
        const std::string family = j.at("family").get<std::string>();
        const double gamma = j.at("gamma").get<double>();
        const double nu = j.at("nu").get<double>();
        const double rho = j.value("rho", 1.0);
        const json& params = j.at("params");
        if (family == "constant") {
            ConstantParams p;
            p.b = params.at("b").get<double>();
            p.d = params.at("d").get<double>();
            return build_rate_model(p, gamma, nu, rho);
        }
        if (family == "logistic_death") {
            LogisticDeathParams p;
            p.b0 = params.at("b0").get<double>();
            p.d0 = params.at("d0").get<double>();
            p.delta = params.at("delta").get<double>();
            return build_rate_model(p, gamma, nu, rho);
        }
        if (family == "table") {
            TableParams p;
            p.b = params.at("b").get<std::vector<double>>();
            p.d = params.at("d").get<std::vector<double>>();
            if (params.contains("b_inf")) p.b_inf = params.at("b_inf").get<double>();
            if (params.contains("d_inf")) p.d_inf = params.at("d_inf").get<double>();
            return build_rate_model(p, gamma, nu, rho);
        }
        throw InvalidModel("unknown rate family '" + family + "'");
    } catch (const json::exception& e) {
        throw InvalidModel(std::string("malformed model specification: ") + e.what());
    }
}

inline json model_to_json(const RateModel& m) {
    json j;
    j["family"] = to_string(m.family);
    j["gamma"] = m.gamma;
    j["nu"] = m.nu;
    j["rho"] = m.rho;
    switch (m.family) {
        case RateFamily::constant:
            j["params"] = {{"b", m.base_birth}, {"d", m.base_death}};
            break;
        case RateFamily::logistic_death:
            j["params"] = {{"b0", m.base_birth}, {"d0", m.base_death}, {"delta", m.crowding}};
            break;
        case RateFamily::table:
            j["params"] = {{"b", m.birth_table},
                           {"d", m.death_table},
                           {"b_inf", m.b_inf},
                           {"d_inf", m.d_inf}};
            break;
    }
    return j;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline json to_json(const HypothesisReport& r) {
    json j;
    j["h1_holds"] = r.h1_holds;
    j["h2_holds"] = r.h2_holds;
    j["margin"] = r.margin;
    j["tail_gap"] = r.tail_gap;
    if (r.first_violation_index)
        j["first_violation_index"] = *r.first_violation_index;
    else
        j["first_violation_index"] = nullptr;
    return j;
}

inline json to_json(const EquilibriumSolution& e) {
    return json{{"s", e.s},           {"mean", e.mean},         {"N", e.N},
                {"tail_mass", e.tail_mass}, {"residual", e.residual}};
}

inline json to_json(const ThresholdReport& r) {
    return json{{"r0", r.r0},
                {"s_star", r.s_star},
                {"classification", to_string(r.classification)},
                {"s_tilde", r.s_tilde},
                {"iterations", r.iterations},
                {"residual", r.residual}};
}

inline json to_json(const SpectralReport& r) {
    json j;
    j["r0"] = r.r0;
    if (r.lambda0)
        j["lambda0"] = *r.lambda0;
    else
        j["lambda0"] = nullptr;
    j["alpha_est"] = r.alpha_est;
    json chi = json::array();
    for (const auto& [lam, val] : r.chi) chi.push_back({lam, val});
    j["chi"] = chi;
    return j;
}

inline json to_json(const EventCounters& c) {
    return json{{"births", c.births},
                {"deaths", c.deaths},
                {"migrations", c.migrations},
                {"migration_successes", c.migration_successes},
                {"migration_failures", c.migration_failures},
                {"catastrophes", c.catastrophes},
                {"catastrophe_mass", c.catastrophe_mass}};
}

// ---------------------------------------------------------------------------
// CSV writers (header row, '.' decimal, 17 significant digits)
// ---------------------------------------------------------------------------

inline void write_distribution_csv(std::ostream& os, const EquilibriumSolution& e) {
    os << "j,pi_j\n";
    for (std::size_t j = 0; j < e.pi.size(); ++j) os << j << ',' << format_float(e.pi[j]) << '\n';
}

inline void write_g_samples_csv(std::ostream& os, const std::vector<double>& s_grid,
                                const std::vector<double>& g_values) {
    os << "s,G\n";
    for (std::size_t i = 0; i < s_grid.size(); ++i)
        os << format_float(s_grid[i]) << ',' << format_float(g_values[i]) << '\n';
}

inline void write_chi_samples_csv(std::ostream& os, const SpectralReport& r) {
    os << "lambda,chi\n";
    for (const auto& [lam, val] : r.chi) os << format_float(lam) << ',' << format_float(val) << '\n';
}

/// Trajectory CSV: t, s, mass_defect, p_0..p_K with K capped (default 50).
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::int64_t cap = 50) {
    if (traj.samples.empty()) return;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(cap) + 1, traj.samples[0].p.size());
    os << "t,s,mass_defect";
    for (std::size_t j = 0; j < k; ++j) os << ",p_" << j;
    os << '\n';
    for (const auto& sample : traj.samples) {
        os << format_float(sample.t) << ',' << format_float(sample.s) << ','
           << format_float(sample.mass_defect);
        for (std::size_t j = 0; j < k; ++j) os << ',' << format_float(sample.p[j]);
        os << '\n';
    }
}

/// Binary dump: 8-byte magic "MPTRAJ01", then u64 N, u64 sample count, then
/// per sample t, s, mass defect and p_0..p_N, all little-endian 64-bit.
inline void write_trajectory_binary(std::ostream& os, const Trajectory& traj) {
    const char magic[8] = {'M', 'P', 'T', 'R', 'A', 'J', '0', '1'};
    os.write(magic, 8);
    const std::uint64_t n = traj.samples.empty() ? 0 : traj.samples[0].p.size() - 1;
    const std::uint64_t count = traj.samples.size();
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&count), 8);
    auto put = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    for (const auto& sample : traj.samples) {
        put(sample.t);
        put(sample.s);
        put(sample.mass_defect);
        for (double v : sample.p) put(v);
    }
}

inline void write_empirical_csv(std::ostream& os, const MetapopRun& run) {
    if (run.times.empty()) return;
    os << "t,mean";
    for (std::size_t i = 0; i < run.freq[0].size(); ++i) os << ",p_" << i;
    os << '\n';
    for (std::size_t k = 0; k < run.times.size(); ++k) {
        os << format_float(run.times[k]) << ',' << format_float(run.mean_occupancy[k]);
        for (double v : run.freq[k]) os << ',' << format_float(v);
        os << '\n';
    }
}

/// One row per sweep point: parameter value, reproduction number, fixed
/// point, bound, classification.
struct SweepRow {
    double param = 0.0;
    double r0 = 0.0;
    double s_star = 0.0;
    double s_tilde = 0.0;
    Persistence classification = Persistence::extinct;
};

inline void write_sweep_csv(std::ostream& os, const std::string& param_name,
                            const std::vector<SweepRow>& rows) {
    os << param_name << ",r0,s_star,s_tilde,classification\n";
    for (const auto& row : rows)
        os << format_float(row.param) << ',' << format_float(row.r0) << ',' << format_float(row.s_star)
           << ',' << format_float(row.s_tilde) << ',' << to_string(row.classification) << '\n';
}

}  // namespace metapop

#endif  // METAPOP_IO_HPP
