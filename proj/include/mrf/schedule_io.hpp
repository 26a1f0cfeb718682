#pragma once

#include <string>

#include "mrf/types.hpp"

// Schedule files are CSV with header `n,alpha_deg,phi_deg,te_ms,tr_ms`, one
// row per repetition, angles in degrees at the file boundary (radians
// internally). Lines starting with '#' are comments.

namespace mrf {

AcqSchedule read_schedule_csv(const std::string& path);

/// `provenance`, when nonempty, is written as a leading '#' comment line.
void write_schedule_csv(const AcqSchedule& schedule, const std::string& path,
                        const std::string& provenance = "");

} // namespace mrf
