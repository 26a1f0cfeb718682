#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrf/bloch.hpp"
#include "mrf/crb.hpp"
#include "mrf/design.hpp"
#include "mrf/dictionary.hpp"
#include "mrf/mc.hpp"
#include "mrf/schedule_io.hpp"
#include "mrf/version.hpp"

#include "config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

std::ofstream open_out(const fs::path& path) {
    std::ofstream os(path);
    if (!os)
        throw mrf::IoError("cannot open " + path.string());
    os << std::setprecision(17);
    return os;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw mrf::IoError("cannot create output directory " + dir.string());
}

json matrix_json(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

json tissue_json(const mrf::TissueParams& t) {
    return {{"t1_ms", t.t1}, {"t2_ms", t.t2}, {"m0", t.m0}};
}

double bound_fraction(const mrf::AcqSchedule& s, double lo, double hi) {
    if (s.size() == 0)
        return 0.0;
    Eigen::Index on = 0;
    const double tol = 0.01 * (hi - lo);
    for (const auto& e : s.entries)
        if (std::abs(e.tr - lo) <= tol || std::abs(e.tr - hi) <= tol)
            ++on;
    return static_cast<double>(on) / static_cast<double>(s.size());
}

int cmd_simulate(const mrf::cli::RunConfig& cfg, const std::string& schedule_path) {
    const mrf::AcqSchedule schedule = mrf::read_schedule_csv(schedule_path);
    const mrf::IsochromatEnsemble ensemble = cfg.ensemble();
    ensure_dir(cfg.out_dir);

    auto combined = open_out(fs::path(cfg.out_dir) / "trajectories.csv");
    combined << "# " << mrf::cli::provenance_line(cfg) << "\n";
    combined << "tissue,n,mx,my,mag\n";
    for (std::size_t l = 0; l < cfg.tissues.size(); ++l) {
        const mrf::SignalTrajectory traj = mrf::simulate(schedule, cfg.tissues[l], ensemble);
        auto single = open_out(fs::path(cfg.out_dir) /
                               ("signal_t" + std::to_string(l) + ".csv"));
        single << "# " << mrf::cli::provenance_line(cfg) << "\n";
        single << "n,mx,my\n";
        for (Eigen::Index n = 0; n < traj.size(); ++n) {
            const double mx = traj.samples(0, n), my = traj.samples(1, n);
            combined << l << ',' << (n + 1) << ',' << mx << ',' << my << ','
                     << std::hypot(mx, my) << "\n";
            single << (n + 1) << ',' << mx << ',' << my << "\n";
        }
    }
    std::cout << "wrote trajectories for " << cfg.tissues.size() << " tissues to "
              << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_crb(const mrf::cli::RunConfig& cfg, const std::string& schedule_path) {
    const mrf::AcqSchedule schedule = mrf::read_schedule_csv(schedule_path);
    const mrf::IsochromatEnsemble ensemble = cfg.ensemble();
    const double sigma = mrf::snr_to_sigma(cfg.design_snr_db, cfg.design_snr_ref);
    ensure_dir(cfg.out_dir);

    json report = {{"provenance", mrf::cli::provenance_json(cfg)},
                   {"sigma", sigma},
                   {"n", schedule.size()},
                   {"tissues", json::array()}};
    auto csv = open_out(fs::path(cfg.out_dir) / "ncrb.csv");
    csv << "# " << mrf::cli::provenance_line(cfg) << "\n";
    csv << "tissue,t1_ms,t2_ms,m0,ncrb_t1,ncrb_t2,ncrb_m0\n";

    for (std::size_t l = 0; l < cfg.tissues.size(); ++l) {
        const auto& tissue = cfg.tissues[l];
        const auto [signal, sens] = mrf::sensitivity_trajectory(schedule, tissue, ensemble);
        const mrf::FisherMatrix fim = mrf::fisher(sens, sigma);
        const mrf::CrbReport rep = mrf::crb(fim, tissue);
        report["tissues"].push_back({{"tissue", tissue_json(tissue)},
                                     {"fim", matrix_json(fim.matrix)},
                                     {"crb", matrix_json(rep.crb_matrix)},
                                     {"ncrb", {rep.ncrb[0], rep.ncrb[1], rep.ncrb[2]}},
                                     {"condition_number", rep.condition_number}});
        csv << l << ',' << tissue.t1 << ',' << tissue.t2 << ',' << tissue.m0 << ','
            << rep.ncrb[0] << ',' << rep.ncrb[1] << ',' << rep.ncrb[2] << "\n";
    }
    open_out(fs::path(cfg.out_dir) / "crb_report.json") << report.dump(2) << "\n";
    std::cout << "wrote crb_report.json and ncrb.csv to " << cfg.out_dir << "\n";
    return kExitOk;
}

int cmd_design(const mrf::cli::RunConfig& cfg, const std::string& mode) {
    const bool opt2 = mode == "opt2";
    const mrf::DesignConfig dc = cfg.design_config(opt2);
    mrf::AcqSchedule init = mrf::conventional_schedule(dc.n, cfg.seed);
    for (auto& e : init.entries) {
        e.te = cfg.te_ms;
        e.phi = cfg.phi_deg * M_PI / 180.0;
    }
    init.validate();

    const mrf::DesignResult result = mrf::optimize(dc, init);
    ensure_dir(cfg.out_dir);

    const std::string stem = "schedule_" + mode;
    mrf::write_schedule_csv(result.schedule,
                            (fs::path(cfg.out_dir) / (stem + ".csv")).string(),
                            mrf::cli::provenance_line(cfg) + " mode=" + mode);

    auto history = open_out(fs::path(cfg.out_dir) / "cost_history.csv");
    history << "# " << mrf::cli::provenance_line(cfg) << "\n";
    history << "iteration,cost\n";
    for (std::size_t i = 0; i < result.cost_history.size(); ++i)
        history << i << ',' << result.cost_history[i] << "\n";

    json summary = {
        {"provenance", mrf::cli::provenance_json(cfg)},
        {"mode", mode},
        {"n", dc.n},
        {"iterations", result.iterations},
        {"converged", result.converged},
        {"initial_cost", result.cost_history.front()},
        {"final_cost", result.cost_history.back()},
        {"tr_bound_fraction", bound_fraction(result.schedule, dc.tr_min, dc.tr_max)},
        {"per_tissue_ncrb", matrix_json(result.per_tissue_ncrb)},
    };
    open_out(fs::path(cfg.out_dir) / "design_result.json") << summary.dump(2) << "\n";
    std::cout << "design " << mode << ": cost " << result.cost_history.front() << " -> "
              << result.cost_history.back() << " in " << result.iterations
              << " iterations (converged=" << (result.converged ? "yes" : "no")
              << "), wrote " << stem << ".csv\n";
    return kExitOk;
}

int cmd_dict(const mrf::cli::RunConfig& cfg, const std::string& schedule_path) {
    const mrf::AcqSchedule schedule = mrf::read_schedule_csv(schedule_path);
    const auto grid = mrf::build_grid(cfg.grid);
    const mrf::Dictionary dict = mrf::generate(schedule, grid, cfg.ensemble(), cfg.threads);
    ensure_dir(cfg.out_dir);
    const fs::path path = fs::path(cfg.out_dir) / "dictionary.bin";
    mrf::save_dictionary(dict, cfg.grid, path.string());
    std::cout << "wrote " << dict.atom_count() << " atoms (n=" << dict.n << ") to "
              << path.string() << "\n";
    return kExitOk;
}

Eigen::VectorXd read_signal_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw mrf::IoError("cannot open signal file " + path);
    std::vector<double> mx, my;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        if (!header_seen) {
            if (line != "n,mx,my")
                throw mrf::ValidationError("signal file must have header 'n,mx,my'");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string field;
        double vals[3];
        for (int f = 0; f < 3; ++f) {
            if (!std::getline(ls, field, ','))
                throw mrf::ValidationError("short row in signal file " + path);
            try {
                vals[f] = std::stod(field);
            } catch (const std::exception&) {
                throw mrf::ValidationError("bad number in signal file " + path);
            }
        }
        mx.push_back(vals[1]);
        my.push_back(vals[2]);
    }
    if (mx.empty())
        throw mrf::ValidationError("empty signal file " + path);
    Eigen::VectorXd flat(2 * static_cast<Eigen::Index>(mx.size()));
    for (std::size_t i = 0; i < mx.size(); ++i) {
        flat[2 * static_cast<Eigen::Index>(i)] = mx[i];
        flat[2 * static_cast<Eigen::Index>(i) + 1] = my[i];
    }
    return flat;
}

int cmd_match(const mrf::cli::RunConfig& cfg, const std::string& dict_path,
              const std::string& signal_path) {
    const auto [dict, spec] = mrf::load_dictionary(dict_path);
    const Eigen::VectorXd signal = read_signal_csv(signal_path);
    const mrf::Estimate est = mrf::match(signal, dict, cfg.threads);
    ensure_dir(cfg.out_dir);
    json out = {{"provenance", mrf::cli::provenance_json(cfg)},
                {"t1_ms", est.t1},
                {"t2_ms", est.t2},
                {"m0", est.m0},
                {"score", est.score},
                {"atom_index", est.atom_index}};
    open_out(fs::path(cfg.out_dir) / "estimate.json") << out.dump(2) << "\n";
    std::cout << "match: t1=" << est.t1 << " ms, t2=" << est.t2 << " ms, m0=" << est.m0
              << "\n";
    return kExitOk;
}

int cmd_mc(const mrf::cli::RunConfig& cfg, const std::string& schedule_path,
           const std::string& dict_path, double t1, double t2, double m0) {
    const mrf::AcqSchedule schedule = mrf::read_schedule_csv(schedule_path);
    const auto [dict, spec] = mrf::load_dictionary(dict_path);
    const mrf::TissueParams truth{t1, t2, m0};
    const mrf::NoiseModel noise{cfg.mc_sigma(), cfg.seed};
    const mrf::McResult result =
        mrf::run_mc(schedule, truth, noise, dict, cfg.ensemble(), cfg.mc_trials, cfg.threads);
    ensure_dir(cfg.out_dir);
    auto vec = [](const Eigen::Vector3d& v) { return json{v[0], v[1], v[2]}; };
    json out = {{"provenance", mrf::cli::provenance_json(cfg)},
                {"tissue", tissue_json(truth)},
                {"sigma", noise.sigma},
                {"trials", result.trials},
                {"nbias", vec(result.nbias)},
                {"nstd", vec(result.nstd)},
                {"nrmse", vec(result.nrmse)},
                {"nmae", vec(result.nmae)},
                {"empirical_std_over_crb", vec(result.empirical_std_over_crb)}};
    open_out(fs::path(cfg.out_dir) / "mc_result.json") << out.dump(2) << "\n";
    std::cout << "mc: nrmse(T1)=" << result.nrmse[0] << " nrmse(T2)=" << result.nrmse[1]
              << " over " << result.trials << " trials\n";
    return kExitOk;
}

int cmd_sweep(const mrf::cli::RunConfig& cfg, const std::vector<std::string>& schedule_paths) {
    std::vector<std::pair<std::string, mrf::AcqSchedule>> schedules;
    for (const auto& p : schedule_paths)
        schedules.emplace_back(fs::path(p).stem().string(), mrf::read_schedule_csv(p));
    const double sigma = mrf::snr_to_sigma(cfg.design_snr_db, cfg.design_snr_ref);
    const auto rows = mrf::sweep_ncrb(schedules, cfg.tissues.front(), sigma, cfg.ensemble());
    ensure_dir(cfg.out_dir);
    auto csv = open_out(fs::path(cfg.out_dir) / "ncrb_sweep.csv");
    csv << "# " << mrf::cli::provenance_line(cfg) << "\n";
    csv << "label,n,ncrb_t1,ncrb_t2,ncrb_m0\n";
    for (const auto& row : rows)
        csv << row.label << ',' << row.n << ',' << row.ncrb[0] << ',' << row.ncrb[1] << ','
            << row.ncrb[2] << "\n";
    std::cout << "wrote ncrb_sweep.csv with " << rows.size() << " rows to " << cfg.out_dir
              << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"MR fingerprinting schedule design: spin simulation, Cramer-Rao bounds, "
                 "schedule optimization, dictionary matching, Monte Carlo evaluation"};
    app.require_subcommand(1);

    std::string config_path, schedule_path, dict_path, signal_path, out_dir, mode = "opt1";
    std::vector<std::string> sweep_paths;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned threads = 0;
    double truth_t1 = 700.0, truth_t2 = 60.0, truth_m0 = 0.6;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides io.out_dir)");
        sub->add_option("--seed", seed, "seed override")
            ->each([&](const std::string&) { seed_set = true; });
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "noiseless magnetization trajectories");
    add_common(simulate);
    simulate->add_option("--schedule", schedule_path, "schedule CSV")->required();

    CLI::App* crb = app.add_subcommand("crb", "Fisher information and normalized CRB");
    add_common(crb);
    crb->add_option("--schedule", schedule_path, "schedule CSV")->required();

    CLI::App* design = app.add_subcommand("design", "optimize a schedule");
    add_common(design);
    design->add_option("--mode", mode, "opt1 (bounds only) or opt2 (flip variation cap)")
        ->check(CLI::IsMember({"opt1", "opt2"}));

    CLI::App* dict = app.add_subcommand("dict", "generate a dictionary");
    add_common(dict);
    dict->add_option("--schedule", schedule_path, "schedule CSV")->required();

    CLI::App* match = app.add_subcommand("match", "match a signal against a dictionary");
    add_common(match);
    match->add_option("--dict", dict_path, "dictionary container")->required();
    match->add_option("--signal", signal_path, "signal CSV (n,mx,my)")->required();

    CLI::App* mc = app.add_subcommand("mc", "Monte Carlo estimator evaluation");
    add_common(mc);
    mc->add_option("--schedule", schedule_path, "schedule CSV")->required();
    mc->add_option("--dict", dict_path, "dictionary container")->required();
    mc->add_option("--t1", truth_t1, "true T1 (ms)");
    mc->add_option("--t2", truth_t2, "true T2 (ms)");
    mc->add_option("--m0", truth_m0, "true M0");

    CLI::App* sweep = app.add_subcommand("sweep", "nCRB table over schedules");
    add_common(sweep);
    sweep->add_option("--schedule", sweep_paths, "schedule CSV (repeatable)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        mrf::cli::RunConfig cfg = mrf::cli::load_config(config_path);
        cfg.threads = threads;
        if (seed_set)
            cfg.seed = seed;
        if (!out_dir.empty())
            cfg.out_dir = out_dir;

        if (simulate->parsed())
            return cmd_simulate(cfg, schedule_path);
        if (crb->parsed())
            return cmd_crb(cfg, schedule_path);
        if (design->parsed())
            return cmd_design(cfg, mode);
        if (dict->parsed())
            return cmd_dict(cfg, schedule_path);
        if (match->parsed())
            return cmd_match(cfg, dict_path, signal_path);
        if (mc->parsed())
            return cmd_mc(cfg, schedule_path, dict_path, truth_t1, truth_t2, truth_m0);
        if (sweep->parsed())
            return cmd_sweep(cfg, sweep_paths);
        return kExitValidation;
    } catch (const mrf::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const mrf::SingularInformation& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const mrf::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
