#include "mrf/dictionary.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mrf/bloch.hpp"
#include "mrf/detail/parallel.hpp"

static_assert(std::endian::native == std::endian::little,
              "dictionary container assumes a little-endian host");

namespace mrf {

namespace {

constexpr char kMagic[8] = {'M', 'R', 'F', 'D', 'I', 'C', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr double kDegenerateNorm = 1e-12;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_segments(std::ostream& os, const std::vector<GridSpec::Segment>& segs) {
    for (const auto& s : segs) {
        write_pod(os, s.start);
        write_pod(os, s.end);
        write_pod(os, s.step);
    }
}

nlohmann::json segments_to_json(const std::vector<GridSpec::Segment>& segs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : segs)
        arr.push_back({s.start, s.end, s.step});
    return arr;
}

} // namespace

void GridSpec::validate() const {
    auto check = [](const std::vector<Segment>& segs, const char* name) {
        if (segs.empty())
            throw ValidationError(std::string("GridSpec: empty ") + name + " segments");
        double prev_end = -std::numeric_limits<double>::infinity();
        for (const auto& s : segs) {
            if (!(s.step > 0.0) || !(s.start <= s.end) || !(s.start > 0.0))
                throw ValidationError(std::string("GridSpec: bad ") + name + " segment");
            if (s.start <= prev_end)
                throw ValidationError(std::string("GridSpec: overlapping ") + name +
                                      " segments");
            prev_end = s.end;
        }
    };
    check(t1_segments, "t1");
    check(t2_segments, "t2");
}

GridSpec default_grid_spec() {
    GridSpec spec;
    spec.t1_segments = {{20.0, 1500.0, 10.0}, {1501.0, 3000.0, 30.0}};
    spec.t2_segments = {{30.0, 200.0, 1.0}, {201.0, 500.0, 5.0}};
    return spec;
}

std::vector<double> enumerate_grid(const std::vector<GridSpec::Segment>& segments) {
    std::vector<double> grid;
    for (std::size_t si = 0; si < segments.size(); ++si) {
        const auto& seg = segments[si];
        const double tol = seg.step * 1e-9;
        if (grid.empty()) {
            for (std::int64_t k = 0;; ++k) {
                const double v = seg.start + static_cast<double>(k) * seg.step;
                if (v > seg.end + tol)
                    break;
                grid.push_back(v);
            }
        } else {
            // Continue the chain from the previous grid point.
            const double anchor = grid.back();
            for (std::int64_t k = 1;; ++k) {
                const double v = anchor + static_cast<double>(k) * seg.step;
                if (v > seg.end + tol)
                    break;
                grid.push_back(v);
            }
        }
    }
    return grid;
}

std::vector<std::pair<double, double>> build_grid(const GridSpec& spec) {
    spec.validate();
    const std::vector<double> t1s = enumerate_grid(spec.t1_segments);
    const std::vector<double> t2s = enumerate_grid(spec.t2_segments);
    if (t1s.empty() || t2s.empty())
        throw ValidationError("build_grid: empty grid");
    std::vector<std::pair<double, double>> atoms;
    atoms.reserve(t1s.size() * t2s.size());
    for (const double t1 : t1s)
        for (const double t2 : t2s)
            atoms.emplace_back(t1, t2);
    return atoms;
}

Eigen::VectorXd flatten(const SignalTrajectory& trajectory) {
    return Eigen::Map<const Eigen::VectorXd>(trajectory.samples.data(),
                                             trajectory.samples.size());
}

Dictionary generate(const AcqSchedule& schedule,
                    const std::vector<std::pair<double, double>>& grid,
                    const IsochromatEnsemble& ensemble, unsigned threads) {
    schedule.validate();
    ensemble.validate();
    if (grid.empty())
        throw ValidationError("generate: empty grid");

    Dictionary dict;
    dict.atoms = grid;
    dict.n = schedule.size();
    dict.trajectories.resize(2 * dict.n, static_cast<Eigen::Index>(grid.size()));

    detail::parallel_for(static_cast<std::ptrdiff_t>(grid.size()), threads,
                         [&](std::ptrdiff_t a) {
                             const auto& [t1, t2] = grid[static_cast<std::size_t>(a)];
                             const SignalTrajectory traj =
                                 simulate(schedule, TissueParams{t1, t2, 1.0}, ensemble);
                             dict.trajectories.col(static_cast<Eigen::Index>(a)) =
                                 flatten(traj);
                         });

    dict.norms = dict.trajectories.colwise().norm();
    for (Eigen::Index a = 0; a < dict.atom_count(); ++a)
        if (!(dict.norms[a] > kDegenerateNorm))
            throw DegenerateAtom("generate: atom " + std::to_string(a) +
                                 " has (near-)zero trajectory norm");
    return dict;
}

Estimate match(const Eigen::VectorXd& signal, const Dictionary& dict, unsigned threads) {
    if (signal.size() != dict.trajectories.rows())
        throw ValidationError("match: signal length does not match dictionary");
    if (dict.atom_count() == 0)
        throw ValidationError("match: empty dictionary");

    const Eigen::Index atoms = dict.atom_count();
    Eigen::VectorXd dots(atoms);
    const unsigned nthreads = detail::resolve_threads(threads);
    const Eigen::Index chunk =
        std::max<Eigen::Index>(1, (atoms + nthreads - 1) / nthreads);
    detail::parallel_for((atoms + chunk - 1) / chunk, threads, [&](std::ptrdiff_t c) {
        const Eigen::Index lo = static_cast<Eigen::Index>(c) * chunk;
        const Eigen::Index len = std::min(chunk, atoms - lo);
        dots.segment(lo, len).noalias() =
            dict.trajectories.middleCols(lo, len).transpose() * signal;
    });

    // Scan in order so ties go to the lowest atom index.
    Eigen::Index best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < atoms; ++a) {
        const double score = dots[a] / dict.norms[a];
        if (score > best_score) {
            best_score = score;
            best = a;
        }
    }

    Estimate est;
    est.atom_index = best;
    est.t1 = dict.atoms[static_cast<std::size_t>(best)].first;
    est.t2 = dict.atoms[static_cast<std::size_t>(best)].second;
    est.m0 = std::max(0.0, dots[best] / (dict.norms[best] * dict.norms[best]));
    est.score = best_score;
    return est;
}

void save_dictionary(const Dictionary& dict, const GridSpec& spec,
                     const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw IoError("save_dictionary: cannot open " + path);

    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kVersion);
    write_pod(os, static_cast<std::uint64_t>(dict.n));
    write_pod(os, static_cast<std::uint64_t>(dict.atom_count()));
    write_pod(os, static_cast<std::uint32_t>(spec.t1_segments.size()));
    write_pod(os, static_cast<std::uint32_t>(spec.t2_segments.size()));
    write_segments(os, spec.t1_segments);
    write_segments(os, spec.t2_segments);
    for (const auto& [t1, t2] : dict.atoms) {
        write_pod(os, t1);
        write_pod(os, t2);
    }
    os.write(reinterpret_cast<const char*>(dict.norms.data()),
             static_cast<std::streamsize>(sizeof(double) * dict.norms.size()));
    os.write(reinterpret_cast<const char*>(dict.trajectories.data()),
             static_cast<std::streamsize>(sizeof(double) * dict.trajectories.size()));
    if (!os)
        throw IoError("save_dictionary: write failed for " + path);
    os.close();

    nlohmann::json sidecar = {
        {"format", "mrf-dictionary"},
        {"version", kVersion},
        {"n", dict.n},
        {"atom_count", dict.atom_count()},
        {"t1_segments", segments_to_json(spec.t1_segments)},
        {"t2_segments", segments_to_json(spec.t2_segments)},
    };
    std::ofstream js(path + ".json");
    if (!js)
        throw IoError("save_dictionary: cannot open " + path + ".json");
    js << sidecar.dump(2) << "\n";
}

std::pair<Dictionary, GridSpec> load_dictionary(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw IoError("load_dictionary: cannot open " + path);

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("load_dictionary: bad magic in " + path);
    std::uint32_t version = 0;
    read_pod(is, version);
    if (version != kVersion)
        throw IoError("load_dictionary: unsupported version in " + path);

    std::uint64_t n = 0, atoms = 0;
    std::uint32_t n_t1 = 0, n_t2 = 0;
    read_pod(is, n);
    read_pod(is, atoms);
    read_pod(is, n_t1);
    read_pod(is, n_t2);

    GridSpec spec;
    auto read_segments = [&](std::uint32_t count, std::vector<GridSpec::Segment>& out) {
        out.resize(count);
        for (auto& s : out) {
            read_pod(is, s.start);
            read_pod(is, s.end);
            read_pod(is, s.step);
        }
    };
    read_segments(n_t1, spec.t1_segments);
    read_segments(n_t2, spec.t2_segments);

    Dictionary dict;
    dict.n = static_cast<Eigen::Index>(n);
    dict.atoms.resize(atoms);
    for (auto& [t1, t2] : dict.atoms) {
        read_pod(is, t1);
        read_pod(is, t2);
    }
    dict.norms.resize(static_cast<Eigen::Index>(atoms));
    is.read(reinterpret_cast<char*>(dict.norms.data()),
            static_cast<std::streamsize>(sizeof(double) * dict.norms.size()));
    dict.trajectories.resize(2 * dict.n, static_cast<Eigen::Index>(atoms));
    is.read(reinterpret_cast<char*>(dict.trajectories.data()),
            static_cast<std::streamsize>(sizeof(double) * dict.trajectories.size()));
    if (!is)
        throw IoError("load_dictionary: truncated file " + path);
    return {std::move(dict), std::move(spec)};
}

} // namespace mrf
