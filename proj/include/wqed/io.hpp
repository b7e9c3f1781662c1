#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "wqed/common.hpp"
#include "wqed/config.hpp"

namespace wqed {

// ---------------------------------------------------------------------------
// Flat key-value config files: `key = value`, '#' comments, strict keys.
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_key_values(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        std::string t = strip(line);
        if (t.empty()) continue;
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw InvalidParameter("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = strip(t.substr(0, eq));
        std::string val = strip(t.substr(eq + 1));
        if (key.empty() || val.empty())
            throw InvalidParameter("config line " + std::to_string(lineno) + ": empty key or value");
        if (kv.count(key))
            throw InvalidParameter("config: duplicate key '" + key + "'");
        kv[key] = val;
    }
    return kv;
}

inline bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw InvalidParameter("expected boolean, got '" + v + "'");
}

inline DisorderKind parse_disorder_kind(const std::string& v) {
    if (v == "uniform") return DisorderKind::UniformOffset;
    if (v == "gaussian") return DisorderKind::GaussianOffset;
    if (v == "lattice") return DisorderKind::RegularLattice;
    throw InvalidParameter("unknown disorder_kind '" + v + "'");
}

inline Engine parse_engine(const std::string& v) {
    if (v == "dtwa-full") return Engine::DtwaFull;
    if (v == "dtwa-elim") return Engine::DtwaEliminated;
    if (v == "qsdmf") return Engine::Qsdmf;
    if (v == "qj") return Engine::QuantumJump;
    if (v == "ladder") return Engine::DickeLadder;
    if (v == "ed") return Engine::EdCavity;
    throw InvalidParameter("unknown engine '" + v + "'");
}

struct ParsedConfig {
    SystemConfig system;
    Engine engine = Engine::DtwaEliminated;
};

// Applies key-value pairs onto a config; unknown keys are errors.
inline void apply_config_entry(ParsedConfig& pc, const std::string& key, const std::string& val) {
    SystemConfig& c = pc.system;
    try {
        if (key == "n_atoms") c.n_atoms = std::stoi(val);
        else if (key == "gamma") c.gamma = std::stod(val);
        else if (key == "theta") c.theta = std::stod(val);
        else if (key == "disorder_kind") c.disorder_kind = parse_disorder_kind(val);
        else if (key == "k0d") c.k0d = std::stod(val);
        else if (key == "delta_omega") c.delta_omega = std::stod(val);
        else if (key == "kappa") c.kappa = std::stod(val);
        else if (key == "coupling_g") c.coupling_g = std::stod(val);
        else if (key == "include_hamiltonian") c.include_hamiltonian = parse_bool(val);
        else if (key == "cavity_count") {
            if (val == "two") c.cavity_count = CavityCount::Two;
            else if (val == "one") c.cavity_count = CavityCount::OneHomogeneous;
            else throw InvalidParameter("cavity_count must be 'two' or 'one'");
        }
        else if (key == "frozen_disorder") c.frozen_disorder = parse_bool(val);
        else if (key == "t_end") c.t_end = std::stod(val);
        else if (key == "n_samples") c.n_samples = std::stoi(val);
        else if (key == "dt") c.dt = std::stod(val);
        else if (key == "n_trajectories") c.n_trajectories = std::stoi(val);
        else if (key == "master_seed") c.master_seed = std::stoull(val);
        else if (key == "engine") pc.engine = parse_engine(val);
        else throw InvalidParameter("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw InvalidParameter("config key '" + key + "': cannot parse '" + val + "'");
    } catch (const std::out_of_range&) {
        throw InvalidParameter("config key '" + key + "': value out of range");
    }
}

inline ParsedConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidParameter("cannot open config file: " + path);
    ParsedConfig pc;
    for (const auto& [k, v] : parse_key_values(in)) apply_config_entry(pc, k, v);
    return pc;
}

inline nlohmann::json config_to_json(const SystemConfig& c, Engine engine) {
    nlohmann::json j;
    j["n_atoms"] = c.n_atoms;
    j["gamma"] = c.gamma;
    j["theta"] = c.theta;
    j["disorder_kind"] = to_string(c.disorder_kind);
    j["k0d"] = c.k0d;
    j["delta_omega"] = c.delta_omega;
    j["kappa"] = c.kappa;
    j["coupling_g"] = c.coupling_g;
    j["include_hamiltonian"] = c.include_hamiltonian;
    j["cavity_count"] = c.cavity_count == CavityCount::Two ? "two" : "one";
    j["frozen_disorder"] = c.frozen_disorder;
    j["t_end"] = c.effective_t_end();
    j["n_samples"] = c.n_samples;
    j["dt"] = c.dt;
    j["n_trajectories"] = c.n_trajectories;
    j["master_seed"] = c.master_seed;
    j["engine"] = to_string(engine);
    return j;
}

// ---------------------------------------------------------------------------
// Output files: full-precision CSV plus a JSON manifest with checksums.
// Writes are atomic (temp file in the target directory, then rename).
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void atomic_write(const std::string& path, const std::string& data, bool force) {
    namespace fs = std::filesystem;
    fs::path target(path);
    if (!force && fs::exists(target))
        throw InvalidParameter("output exists (use --force to overwrite): " + path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw NumericalFailure("cannot open for writing: " + tmp.string());
        out << data;
        if (!out) throw NumericalFailure("write failed: " + tmp.string());
    }
    fs::rename(tmp, target);
}

struct SeriesColumn {
    std::string name;
    const std::vector<double>* values = nullptr;
    const std::vector<double>* se = nullptr;  // optional `<name>_se` column
};

struct ManifestRecorder {
    nlohmann::json meta;
    std::vector<std::pair<std::string, std::uint64_t>> outputs;

    void add_output(const std::string& path, const std::string& data) {
        outputs.emplace_back(std::filesystem::path(path).filename().string(), fnv1a64(data));
    }

    std::string render() const {
        nlohmann::json j = meta;
        nlohmann::json files = nlohmann::json::object();
        for (const auto& [name, sum] : outputs) {
            char buf[20];
            std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)sum);
            files[name] = buf;
        }
        j["outputs"] = files;
        return j.dump(2) + "\n";
    }
};

// CSV with header `t,<name>,<name>_se,...`, 17 significant digits, LF endings.
inline std::string render_series(const std::vector<double>& grid,
                                 const std::vector<SeriesColumn>& cols) {
    for (const auto& c : cols) {
        if (c.values->size() != grid.size())
            throw InvalidParameter("column '" + c.name + "' length mismatch");
        if (c.se && c.se->size() != grid.size())
            throw InvalidParameter("column '" + c.name + "_se' length mismatch");
    }
    std::ostringstream out;
    out << "t";
    for (const auto& c : cols) {
        out << "," << c.name;
        if (c.se) out << "," << c.name << "_se";
    }
    out << "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out << format_full(grid[i]);
        for (const auto& c : cols) {
            out << "," << format_full((*c.values)[i]);
            if (c.se) out << "," << format_full((*c.se)[i]);
        }
        out << "\n";
    }
    return out.str();
}

inline void write_series(const std::string& path, const std::vector<double>& grid,
                         const std::vector<SeriesColumn>& cols, ManifestRecorder& manifest,
                         bool force) {
    std::string data = render_series(grid, cols);
    atomic_write(path, data, force);
    manifest.add_output(path, data);
}

inline void write_manifest(const std::string& path, const ManifestRecorder& manifest, bool force) {
    atomic_write(path, manifest.render(), force);
}

}  // namespace wqed
