#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mrf/types.hpp"

// MRF dictionary construction over a (T1, T2) grid and single-voxel
// maximum-likelihood estimation by pattern matching with an analytic M0
// scale.

namespace mrf {

/// Piecewise-uniform 1-D grids for T1 and T2, each a list of
/// (start, end, step) segments in ms. The first segment enumerates
/// start, start+step, ... <= end. Every following segment continues the
/// chain anchored at the previous grid point: prev + k*step for k >= 1,
/// capped at that segment's end. This avoids duplicated boundary points
/// while covering the stated ranges.
struct GridSpec {
    struct Segment {
        double start, end, step;
    };
    std::vector<Segment> t1_segments;
    std::vector<Segment> t2_segments;

    void validate() const;
};

/// The published discretization: T1 in [20, 3000] ms (10 ms steps to 1500,
/// 30 ms after), T2 in [30, 500] ms (1 ms steps to 200, 5 ms after);
/// 199 x 231 atoms.
GridSpec default_grid_spec();

std::vector<double> enumerate_grid(const std::vector<GridSpec::Segment>& segments);

/// Cartesian product of the two 1-D grids, T1-major.
std::vector<std::pair<double, double>> build_grid(const GridSpec& spec);

/// Unit-M0 trajectories for every (T1, T2) atom, flattened column-major to
/// 2N-vectors (mx[1], my[1], mx[2], ...). Immutable after construction.
struct Dictionary {
    std::vector<std::pair<double, double>> atoms; ///< (t1, t2) per atom
    Eigen::MatrixXd trajectories;                 ///< 2N x atom_count
    Eigen::VectorXd norms;                        ///< per-atom Euclidean norm
    Eigen::Index n = 0;                           ///< schedule length

    Eigen::Index atom_count() const { return trajectories.cols(); }
};

struct Estimate {
    double t1 = 0.0;
    double t2 = 0.0;
    double m0 = 0.0;
    double score = 0.0; ///< <d, s>/||d|| of the winning atom
    Eigen::Index atom_index = 0;
};

/// Simulates all atoms with unit M0 over the given schedule and ensemble.
/// Parallel across atoms; throws DegenerateAtom if a trajectory norm falls
/// below 1e-12 (a degenerate schedule).
Dictionary generate(const AcqSchedule& schedule,
                    const std::vector<std::pair<double, double>>& grid,
                    const IsochromatEnsemble& ensemble, unsigned threads = 0);

/// Maximum-likelihood match: the atom maximizing <d, s>/||d||, ties broken
/// by lowest atom index, with the least-squares scale m0 = max(0, <d,s>/||d||^2).
Estimate match(const Eigen::VectorXd& signal, const Dictionary& dict,
               unsigned threads = 0);

/// Flattens a trajectory into the dictionary's 2N-vector layout.
Eigen::VectorXd flatten(const SignalTrajectory& trajectory);

/// Binary container (magic, version, N, atom count, grid spec echo, atoms,
/// norms, little-endian float64 trajectory block) plus a JSON sidecar at
/// path + ".json" carrying the grid spec. Round-trips bit-exactly.
void save_dictionary(const Dictionary& dict, const GridSpec& spec,
                     const std::string& path);
std::pair<Dictionary, GridSpec> load_dictionary(const std::string& path);

} // namespace mrf
