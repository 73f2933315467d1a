#pragma once

#include <sstream>
#include <string>

#include "dpr/data_model.hpp"

namespace test_util {

inline dpr::PanelDataset panel_from(const std::string& csv, const dpr::PanelSchema& schema = {}) {
    std::istringstream in(csv);
    return dpr::load_panel(in, schema);
}

}  // namespace test_util
