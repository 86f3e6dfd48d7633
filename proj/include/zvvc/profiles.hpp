#pragma once

#include "zvvc/csv.hpp"
#include "zvvc/feeder.hpp"

#include <string>

namespace zvvc {

// Minute-resolution time series: one column per profile name, one row per
// minute, values in kW (or kvar for reactive columns).
struct ProfileSet {
    csv::Table table;

    int minutes() const { return static_cast<int>(table.rows.size()); }

    // Column index for a profile name; throws DataError if absent.
    int column(const std::string& name) const;

    double at(int minute, int col) const {
        return table.rows[static_cast<std::size_t>(minute)][static_cast<std::size_t>(col)];
    }
};

ProfileSet load_profiles_file(const std::string& path);

// Every profile referenced by the feeder's loads and PV systems must resolve
// to a column; throws DataError naming the first missing one.
void check_profiles(const FeederModel& m, const ProfileSet& profiles);

} // namespace zvvc
