#pragma once

#include <string>
#include <vector>

#include "stemflow/csv.hpp"

namespace stemflow {

// Population totals at one recorded time (populations in units of N~).
struct TraceSample {
    double t_days = 0.0;
    double a_total = 0.0;
    double omega_total = 0.0;
};

using TotalsTrace = std::vector<TraceSample>;

inline Table totals_table(const TotalsTrace& trace) {
    Table t;
    t.columns = {"t_days", "A_total", "Omega_total"};
    for (const auto& s : trace) t.add_row({s.t_days, s.a_total, s.omega_total});
    return t;
}

// ABM and PDE traces in one table, distinguished by a leading `model` column.
inline Table overlay_table(const std::vector<std::pair<std::string, TotalsTrace>>& traces) {
    Table t;
    t.columns = {"model", "t_days", "A_total", "Omega_total"};
    for (const auto& [name, trace] : traces) {
        for (const auto& s : trace) t.add_row({name, s.t_days, s.a_total, s.omega_total});
    }
    return t;
}

}  // namespace stemflow
