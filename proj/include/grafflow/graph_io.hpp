#pragma once

#include <filesystem>
#include <string_view>

#include "json.hpp"

#include "grafflow/graph_model.hpp"

namespace grafflow {

/// Graph description:
///   {"edges":    [{"id": "e1", "from": "A", "to": "B", "length": 30}, ...],
///    "vertices": [{"id": "A", "condition": {"type": "delta", "alpha": -1},
///                  "slot_order": [["e1", "start"], ["e2", "start"]]}, ...]}
/// Condition types: kirchhoff (default), delta {alpha}, delta_prime {beta},
/// dirichlet, dipole {tau}, matrix {a, b} with row-major nested arrays.
MetricGraph graph_from_json(const nlohmann::json& doc);
MetricGraph parse_graph(std::string_view text);
MetricGraph load_graph(const std::filesystem::path& path);

/// Condition for a vertex of the given degree; degree only matters for the
/// kirchhoff and delta families.
VertexCondition condition_from_json(const nlohmann::json& doc, std::size_t degree);

}  // namespace grafflow
