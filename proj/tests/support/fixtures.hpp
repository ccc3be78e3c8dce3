#pragma once

#include <string>

#include "scgid/json_io.hpp"

namespace scgid::test_support {

inline std::string fixture_path(const std::string& name) {
    return std::string(SCGID_FIXTURE_DIR) + "/" + name;
}

inline SummaryCausalGraph fixture_scg(const std::string& name) {
    return load_scg(fixture_path(name));
}

inline FullTimeGraph fixture_full_time(const std::string& name) {
    return load_full_time(fixture_path(name));
}

} // namespace scgid::test_support
