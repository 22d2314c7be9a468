#include "grafflow/graph_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "grafflow/error.hpp"

namespace grafflow {

using nlohmann::json;

namespace {

double number(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_number()) {
    throw Error(ErrorKind::InvalidGraph, std::string("condition needs numeric '") + key + "'");
  }
  return doc.at(key).get<double>();
}

Matrix matrix_from_json(const json& rows, const char* what) {
  if (!rows.is_array() || rows.empty()) throw Error(ErrorKind::InvalidGraph, std::string(what) + " must be a nonempty array of rows");
  const auto n = rows.size();
  const auto m = rows.front().is_array() ? rows.front().size() : 0;
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < n; ++i) {
    if (!rows[i].is_array() || rows[i].size() != m) throw Error(ErrorKind::InvalidGraph, std::string(what) + " rows must have equal length");
    for (std::size_t j = 0; j < m; ++j) {
      if (!rows[i][j].is_number()) throw Error(ErrorKind::InvalidGraph, std::string(what) + " entries must be numbers");
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
    }
  }
  return out;
}

Endpoint endpoint_from_json(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "start" || s == "from") return Endpoint::Start;
  if (s == "end" || s == "to") return Endpoint::End;
  throw Error(ErrorKind::InvalidGraph, "endpoint must be 'start' or 'end', got '" + s + "'");
}

}  // namespace

VertexCondition condition_from_json(const json& doc, std::size_t degree) {
  if (doc.is_string()) return condition_from_json(json{{"type", doc}}, degree);
  if (!doc.is_object()) throw Error(ErrorKind::InvalidGraph, "condition must be an object or a type name");
  const auto type = doc.value("type", std::string("kirchhoff"));
  if (type == "kirchhoff") return kirchhoff_condition(degree);
  if (type == "delta") return delta_condition(degree, number(doc, "alpha"));
  if (type == "delta_prime") return delta_prime_condition(number(doc, "beta"));
  if (type == "dirichlet") return dirichlet_condition();
  if (type == "dipole") return dipole_condition(number(doc, "tau"));
  if (type == "matrix") {
    if (!doc.contains("a") || !doc.contains("b")) throw Error(ErrorKind::InvalidGraph, "matrix condition needs 'a' and 'b'");
    VertexCondition c{matrix_from_json(doc.at("a"), "a"), matrix_from_json(doc.at("b"), "b")};
    if (const auto check = validate_condition(c); !check.valid()) {
      throw Error(ErrorKind::InvalidCondition, "matrix condition: " + check.reason);
    }
    return c;
  }
  throw Error(ErrorKind::InvalidGraph, "unknown condition type '" + type + "'");
}

MetricGraph graph_from_json(const json& doc) {
  try {
    if (!doc.is_object() || !doc.contains("edges") || !doc.at("edges").is_array()) {
      throw Error(ErrorKind::InvalidGraph, "graph needs an 'edges' array");
    }
    std::vector<EdgeSpec> edges;
    std::map<std::string, std::size_t> degree;
    for (const auto& e : doc.at("edges")) {
      EdgeSpec spec{e.at("id").get<std::string>(), e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                    e.at("length").get<double>()};
      ++degree[spec.from];
      ++degree[spec.to];
      edges.push_back(std::move(spec));
    }

    std::vector<VertexSpec> vertices;
    if (doc.contains("vertices")) {
      for (const auto& v : doc.at("vertices")) {
        VertexSpec spec;
        spec.id = v.at("id").get<std::string>();
        const auto it = degree.find(spec.id);
        const std::size_t d = it == degree.end() ? 0 : it->second;
        spec.condition = condition_from_json(v.value("condition", json("kirchhoff")), d);
        if (v.contains("slot_order")) {
          for (const auto& s : v.at("slot_order")) {
            if (!s.is_array() || s.size() != 2) throw Error(ErrorKind::InvalidGraph, "slot_order entries are [edge, end] pairs");
            spec.slot_order.push_back({s[0].get<std::string>(), endpoint_from_json(s[1])});
          }
        }
        vertices.push_back(std::move(spec));
      }
    }
    // Vertices only mentioned by edges get the Kirchhoff condition, but an
    // explicit vertices list must be complete.
    if (!doc.contains("vertices")) {
      for (const auto& [id, d] : degree) vertices.push_back({id, kirchhoff_condition(d), {}});
    }
    return build_graph(edges, vertices);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::InvalidGraph, std::string("malformed graph description: ") + ex.what());
  }
}

MetricGraph parse_graph(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw Error(ErrorKind::InvalidGraph, std::string("graph is not valid JSON: ") + ex.what());
  }
  return graph_from_json(doc);
}

MetricGraph load_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open graph file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_graph(buf.str());
}

}  // namespace grafflow
