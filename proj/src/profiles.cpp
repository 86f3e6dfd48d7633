#include "zvvc/profiles.hpp"

#include "zvvc/errors.hpp"

namespace zvvc {

int ProfileSet::column(const std::string& name) const {
    int c = table.column(name);
    if (c < 0) throw DataError("profile '" + name + "' not found in profile table");
    return c;
}

ProfileSet load_profiles_file(const std::string& path) {
    ProfileSet p{csv::read_table_file(path)};
    if (p.table.rows.empty()) throw DataError(path + ": profile table has no rows");
    return p;
}

void check_profiles(const FeederModel& m, const ProfileSet& profiles) {
    for (const LoadPoint& lp : m.loads) {
        profiles.column(lp.profile);
        if (!lp.kvar_profile.empty()) profiles.column(lp.kvar_profile);
    }
    for (const PvSystem& pv : m.pvs) profiles.column(pv.profile);
}

} // namespace zvvc
