#pragma once

// Single include point for nlohmann/json (vendored as vendor/json.hpp).
#include <json.hpp>

namespace matgraph {
using json = nlohmann::json;
}
