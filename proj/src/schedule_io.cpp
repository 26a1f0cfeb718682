#include "mrf/schedule_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mrf/errors.hpp"

namespace mrf {

namespace {
constexpr double kDeg = M_PI / 180.0;
constexpr const char* kHeader = "n,alpha_deg,phi_deg,te_ms,tr_ms";
} // namespace

AcqSchedule read_schedule_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("read_schedule_csv: cannot open " + path);

    AcqSchedule schedule;
    std::string line;
    bool header_seen = false;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        if (!header_seen) {
            if (line != kHeader)
                throw ValidationError("read_schedule_csv: expected header '" +
                                      std::string(kHeader) + "' in " + path);
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string field;
        double vals[5];
        for (int f = 0; f < 5; ++f) {
            if (!std::getline(ls, field, ','))
                throw ValidationError("read_schedule_csv: short row at line " +
                                      std::to_string(lineno) + " of " + path);
            try {
                vals[f] = std::stod(field);
            } catch (const std::exception&) {
                throw ValidationError("read_schedule_csv: bad number at line " +
                                      std::to_string(lineno) + " of " + path);
            }
        }
        schedule.entries.push_back(
            {vals[1] * kDeg, vals[2] * kDeg, vals[3], vals[4]});
    }
    schedule.validate();
    return schedule;
}

void write_schedule_csv(const AcqSchedule& schedule, const std::string& path,
                        const std::string& provenance) {
    std::ofstream os(path);
    if (!os)
        throw IoError("write_schedule_csv: cannot open " + path);
    if (!provenance.empty())
        os << "# " << provenance << "\n";
    os << kHeader << "\n";
    os << std::setprecision(17);
    for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
        const auto& e = schedule.entries[i];
        os << (i + 1) << ',' << e.alpha / kDeg << ',' << e.phi / kDeg << ',' << e.te
           << ',' << e.tr << "\n";
    }
    if (!os)
        throw IoError("write_schedule_csv: write failed for " + path);
}

} // namespace mrf
