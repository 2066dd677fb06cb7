#pragma once

#include <json.hpp>

#include "bmsense/landscape.hpp"

namespace bmsense::detail {

nlohmann::ordered_json report_json(const LandscapeReport& report);

}  // namespace bmsense::detail
