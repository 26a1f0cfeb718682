#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <Eigen/Dense>

#include "mrf/design.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/errors.hpp"
#include "mrf/mc.hpp"
#include "mrf/version.hpp"

// Run configuration: a single versioned JSON document whose defaults
// reproduce the reference simulation constants. Unknown keys are rejected.

namespace mrf::cli {

struct RunConfig {
    // bloch
    double te_ms = 2.0;
    double phi_deg = 0.0;
    Eigen::Index nv = 400;

    // design
    std::vector<TissueParams> tissues = {{700.0, 60.0, 0.6},
                                         {850.0, 50.0, 0.6},
                                         {1100.0, 102.0, 0.6}};
    Eigen::Vector3d weights = Eigen::Vector3d(2.0e-5, 5.0e-4, 3.0e1);
    double design_snr_db = 33.0;
    double design_snr_ref = 0.6;
    Eigen::Index design_n = 400;
    double tr_min_ms = 11.0, tr_max_ms = 15.0;
    double alpha_min_deg = 10.0, alpha_max_first_deg = 180.0, alpha_max_rest_deg = 60.0;
    double delta_alpha_max_deg = 1.0; // applies in opt2 mode
    Eigen::Index nv_design = 40;
    double design_tol = 1e-4;
    Eigen::Index design_max_iter = 50000;

    // dictionary
    GridSpec grid = default_grid_spec();

    // mc
    double mc_snr_db = 33.0;
    double mc_snr_ref = 0.6;
    Eigen::Index mc_trials = 100;
    std::uint64_t seed = 20170901;

    // io
    std::string out_dir = ".";

    // not part of the file; set from the command line
    unsigned threads = 0;

    std::string canonical_json;
    std::uint64_t config_hash = 0;

    DesignConfig design_config(bool variation_cap) const {
        constexpr double kDeg = M_PI / 180.0;
        DesignConfig c;
        c.tissues = tissues;
        c.weights = weights;
        c.sigma = snr_to_sigma(design_snr_db, design_snr_ref);
        c.n = design_n;
        c.tr_min = tr_min_ms;
        c.tr_max = tr_max_ms;
        c.alpha_min = alpha_min_deg * kDeg;
        c.alpha_max_first = alpha_max_first_deg * kDeg;
        c.alpha_max_rest = alpha_max_rest_deg * kDeg;
        c.delta_alpha_max = variation_cap ? delta_alpha_max_deg * kDeg
                                          : std::numeric_limits<double>::infinity();
        c.nv_design = nv_design;
        c.tol = design_tol;
        c.max_iter = design_max_iter;
        c.threads = threads;
        return c;
    }

    IsochromatEnsemble ensemble() const { return uniform_ensemble(nv); }
    double mc_sigma() const { return snr_to_sigma(mc_snr_db, mc_snr_ref); }
};

inline std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::string& section,
                                std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) {
                return it.key() == k;
            }) == allowed.end())
            throw ValidationError("config: unknown key '" +
                                  (section.empty() ? it.key() : section + "." + it.key()) +
                                  "'");
    }
}

inline std::vector<GridSpec::Segment> parse_segments(const nlohmann::json& j,
                                                     const std::string& where) {
    std::vector<GridSpec::Segment> out;
    if (!j.is_array())
        throw ValidationError("config: " + where + " must be an array of [start,end,step]");
    for (const auto& seg : j) {
        if (!seg.is_array() || seg.size() != 3)
            throw ValidationError("config: " + where + " entries must be [start,end,step]");
        out.push_back({seg[0].get<double>(), seg[1].get<double>(), seg[2].get<double>()});
    }
    return out;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("config: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config: parse error in " + path + ": " + e.what());
    }

    RunConfig cfg;
    reject_unknown_keys(j, "", {"version", "bloch", "design", "dictionary", "mc", "io"});
    if (!j.contains("version") || !j["version"].is_number_integer() ||
        j["version"].get<int>() != 1)
        throw ValidationError("config: missing or unsupported 'version' (expected 1)");

    try {
        if (j.contains("bloch")) {
            const auto& b = j["bloch"];
            reject_unknown_keys(b, "bloch", {"te_ms", "phi_deg", "nv"});
            cfg.te_ms = b.value("te_ms", cfg.te_ms);
            cfg.phi_deg = b.value("phi_deg", cfg.phi_deg);
            cfg.nv = b.value("nv", cfg.nv);
        }
        if (j.contains("design")) {
            const auto& d = j["design"];
            reject_unknown_keys(d, "design",
                                {"tissues", "weights", "snr_db", "snr_ref", "n",
                                 "tr_min_ms", "tr_max_ms", "alpha_min_deg",
                                 "alpha_max_first_deg", "alpha_max_rest_deg",
                                 "delta_alpha_max_deg", "nv_design", "tol", "max_iter"});
            if (d.contains("tissues")) {
                cfg.tissues.clear();
                for (const auto& t : d["tissues"]) {
                    if (!t.is_array() || t.size() != 3)
                        throw ValidationError("config: design.tissues entries must be [t1,t2,m0]");
                    cfg.tissues.push_back(
                        {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()});
                }
            }
            if (d.contains("weights")) {
                const auto& w = d["weights"];
                if (!w.is_array() || w.size() != 3)
                    throw ValidationError("config: design.weights must be [wT1,wT2,wM0]");
                cfg.weights = Eigen::Vector3d(w[0].get<double>(), w[1].get<double>(),
                                              w[2].get<double>());
            }
            cfg.design_snr_db = d.value("snr_db", cfg.design_snr_db);
            cfg.design_snr_ref = d.value("snr_ref", cfg.design_snr_ref);
            cfg.design_n = d.value("n", cfg.design_n);
            cfg.tr_min_ms = d.value("tr_min_ms", cfg.tr_min_ms);
            cfg.tr_max_ms = d.value("tr_max_ms", cfg.tr_max_ms);
            cfg.alpha_min_deg = d.value("alpha_min_deg", cfg.alpha_min_deg);
            cfg.alpha_max_first_deg = d.value("alpha_max_first_deg", cfg.alpha_max_first_deg);
            cfg.alpha_max_rest_deg = d.value("alpha_max_rest_deg", cfg.alpha_max_rest_deg);
            cfg.delta_alpha_max_deg = d.value("delta_alpha_max_deg", cfg.delta_alpha_max_deg);
            cfg.nv_design = d.value("nv_design", cfg.nv_design);
            cfg.design_tol = d.value("tol", cfg.design_tol);
            cfg.design_max_iter = d.value("max_iter", cfg.design_max_iter);
        }
        if (j.contains("dictionary")) {
            const auto& g = j["dictionary"];
            reject_unknown_keys(g, "dictionary", {"t1_segments", "t2_segments"});
            if (g.contains("t1_segments"))
                cfg.grid.t1_segments = parse_segments(g["t1_segments"], "dictionary.t1_segments");
            if (g.contains("t2_segments"))
                cfg.grid.t2_segments = parse_segments(g["t2_segments"], "dictionary.t2_segments");
        }
        if (j.contains("mc")) {
            const auto& m = j["mc"];
            reject_unknown_keys(m, "mc", {"snr_db", "snr_ref", "trials", "seed"});
            cfg.mc_snr_db = m.value("snr_db", cfg.mc_snr_db);
            cfg.mc_snr_ref = m.value("snr_ref", cfg.mc_snr_ref);
            cfg.mc_trials = m.value("trials", cfg.mc_trials);
            cfg.seed = m.value("seed", cfg.seed);
        }
        if (j.contains("io")) {
            const auto& io = j["io"];
            reject_unknown_keys(io, "io", {"out_dir"});
            cfg.out_dir = io.value("out_dir", cfg.out_dir);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config: bad value type in " + path + ": " + e.what());
    }

    cfg.canonical_json = j.dump();
    cfg.config_hash = fnv1a64(cfg.canonical_json);
    return cfg;
}

inline std::string provenance_line(const RunConfig& cfg) {
    std::ostringstream os;
    os << "tool=" << kToolName << " version=" << kToolVersion << " config_hash=" << std::hex
       << cfg.config_hash << std::dec << " seed=" << cfg.seed;
    return os.str();
}

inline nlohmann::json provenance_json(const RunConfig& cfg) {
    std::ostringstream hash;
    hash << std::hex << cfg.config_hash;
    return {{"tool", kToolName},
            {"version", kToolVersion},
            {"config_hash", hash.str()},
            {"seed", cfg.seed}};
}

} // namespace mrf::cli
