#pragma once

// JSON and CSV interchange. Every JSON document carries "schema": 1; floats
// are written with 17 significant digits so files round-trip exactly.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sepflow/clustering.hpp"
#include "sepflow/control.hpp"
#include "sepflow/distributions.hpp"
#include "sepflow/error.hpp"
#include "sepflow/flow.hpp"
#include "sepflow/geometry.hpp"
#include "sepflow/separability.hpp"

namespace sepflow {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

namespace detail {

inline void dump(const Json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string pad_end(static_cast<std::size_t>(indent * depth), ' ');
  const bool flat_array = j.is_array() && std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
  switch (j.type()) {
    case Json::value_t::number_float: out += format_double(j.get<double>()); return;
    case Json::value_t::object: {
      if (j.empty()) { out += "{}"; return; }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad + Json(it.key()).dump() + ": ";
        dump(it.value(), out, indent, depth + 1);
      }
      out += "\n" + pad_end + "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) { out += "[]"; return; }
      if (flat_array) {
        out += "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) out += ", ";
          dump(j[i], out, indent, depth + 1);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump(j[i], out, indent, depth + 1);
      }
      out += "\n" + pad_end + "]";
      return;
    }
    default: out += j.dump();
  }
}

inline Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Eigen::VectorXd vec(const Json& j, std::size_t dim, const char* what) {
  if (!j.is_array() || j.size() != dim) throw FormatError(std::string(what) + ": expected an array of " + std::to_string(dim) + " numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    if (!j[i].is_number()) throw FormatError(std::string(what) + ": non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline void check_schema(const Json& j) {
  if (!j.is_object()) throw FormatError("top-level JSON value must be an object");
  if (j.contains("schema") && j.at("schema") != kSchemaVersion)
    throw FormatError("unsupported schema version " + j.at("schema").dump());
}

template <class T>
T field(const Json& j, const char* key) {
  if (!j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline std::string to_text(const Json& j) {
  std::string out;
  detail::dump(j, out, 2, 0);
  return out + "\n";
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
  if (!out) throw FormatError("write failed for '" + path + "'");
}

// ---- dataset ----

inline Json to_json(const LabeledPair& p) {
  Json j{{"schema", kSchemaVersion}, {"dim", p.dim()}, {"reds", Json::array()}, {"blues", Json::array()}};
  for (const auto& x : p.reds()) j["reds"].push_back(detail::vec(x));
  for (const auto& x : p.blues()) j["blues"].push_back(detail::vec(x));
  return j;
}

inline LabeledPair pair_from_json(const Json& j) {
  detail::check_schema(j);
  const auto dim = detail::field<std::size_t>(j, "dim");
  auto list = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) throw FormatError(std::string("missing point list '") + key + "'");
    std::vector<Point> pts;
    for (const auto& e : j.at(key)) pts.push_back(detail::vec(e, dim, key));
    return pts;
  };
  return LabeledPair(dim, list("reds"), list("blues"));
}

// ---- separating families ----

inline Json to_json(const Hyperplane& h) { return Json{{"normal", detail::vec(h.normal)}, {"offset", h.offset}}; }

inline Json to_json(const SeparatingFamily& f) {
  Json j{{"schema", kSchemaVersion}, {"kind", f.kind == FamilyKind::axis_aligned ? "axis" : "oblique"}};
  if (f.kind == FamilyKind::axis_aligned) j["axis"] = f.axis;
  j["planes"] = Json::array();
  for (const auto& h : f.planes) j["planes"].push_back(to_json(h));
  j["certified"] = f.certified;
  return j;
}

inline SeparatingFamily family_from_json(const Json& j, std::size_t dim) {
  detail::check_schema(j);
  SeparatingFamily f;
  const auto kind = detail::field<std::string>(j, "kind");
  if (kind == "axis") {
    f.kind = FamilyKind::axis_aligned;
    f.axis = detail::field<std::size_t>(j, "axis");
  } else if (kind == "oblique") {
    f.kind = FamilyKind::oblique;
  } else {
    throw FormatError("unknown family kind '" + kind + "'");
  }
  if (!j.contains("planes") || !j.at("planes").is_array()) throw FormatError("missing 'planes'");
  for (const auto& p : j.at("planes")) {
    Hyperplane h{detail::vec(p.at("normal"), dim, "normal"), detail::field<double>(p, "offset")};
    if (std::abs(h.normal.norm() - 1.0) > 1e-12) throw ValidationError("plane normal is not a unit vector");
    f.planes.push_back(std::move(h));
  }
  f.certified = false;  // a loaded family must be re-verified
  return f;
}

inline Json to_json(const ClusterFamily& fam) {
  Json j{{"schema", kSchemaVersion},
         {"target_axis", fam.target_axis},
         {"color", to_string(fam.color)},
         {"family", to_json(fam.margins)},
         {"clusters", Json::array()}};
  for (const auto& c : fam.clusters) {
    Json pad = Json::array();
    for (bool b : c.padded) pad.push_back(b);
    j["clusters"].push_back(Json{{"members", c.members},
                                 {"padded", pad},
                                 {"normal", detail::vec(c.base.normal)},
                                 {"offset", c.base.offset},
                                 {"margin", c.margin},
                                 {"margin_hi", c.margin_hi},
                                 {"margin_lo", c.margin_lo},
                                 {"direction", detail::vec(c.direction)}});
  }
  return j;
}

// ---- schedules ----

inline Json to_json(const ControlSchedule& s) {
  Json j{{"schema", kSchemaVersion},
         {"activation", to_string(s.activation)},
         {"target_axis", s.target_axis},
         {"targets_swapped", s.targets_swapped},
         {"switches", s.switches()},
         {"legs", Json::array()}};
  for (const auto& l : s.legs)
    j["legs"].push_back(Json{{"a", detail::vec(l.a)}, {"b", l.b}, {"w", detail::vec(l.w)}, {"tau", l.tau}});
  return j;
}

inline ControlSchedule schedule_from_json(const Json& j) {
  detail::check_schema(j);
  ControlSchedule s;
  s.activation = parse_activation(detail::field<std::string>(j, "activation"));
  s.target_axis = detail::field<std::size_t>(j, "target_axis");
  s.targets_swapped = j.value("targets_swapped", false);
  if (!j.contains("legs") || !j.at("legs").is_array()) throw FormatError("missing 'legs'");
  for (const auto& l : j.at("legs")) {
    if (!l.contains("a") || !l.at("a").is_array()) throw FormatError("leg without 'a'");
    const std::size_t dim = l.at("a").size();
    s.push(detail::vec(l.at("a"), dim, "a"), detail::field<double>(l, "b"), detail::vec(l.at("w"), dim, "w"),
           detail::field<double>(l, "tau"));
  }
  return s;
}

// ---- simulation results ----

inline Json to_json(const SimulationResult& r, std::size_t n_red) {
  Json j{{"schema", kSchemaVersion},
         {"target_axis", r.target_axis},
         {"targets_swapped", r.targets_swapped},
         {"red_in_TR", r.red_in_TR},
         {"blue_in_TB", r.blue_in_TB},
         {"classified", r.classified()},
         {"max_blue_net_displacement", r.max_blue_net_displacement},
         {"max_red_net_displacement", r.max_red_net_displacement},
         {"min_margin_to_threshold", r.min_margin_to_threshold},
         {"precision_bits", r.precision_bits},
         {"finals", Json{{"reds", Json::array()}, {"blues", Json::array()}}}};
  for (std::size_t i = 0; i < r.finals.size(); ++i)
    j["finals"][i < n_red ? "reds" : "blues"].push_back(detail::vec(r.finals[i]));
  return j;
}

// ---- exact tables ----

inline std::string pmf_csv(const Pmf1D& pmf) {
  std::ostringstream os;
  os << "k,mass,mass_float\n";
  for (std::size_t k = 1; k <= pmf.max_k(); ++k)
    os << k << "," << to_string(pmf.mass(k)) << "," << format_double(to_double(pmf.mass(k))) << "\n";
  return os.str();
}

inline Json pmf_json(const Pmf1D& pmf) {
  Json rows = Json::array();
  for (std::size_t k = 1; k <= pmf.max_k(); ++k)
    rows.push_back(Json{{"k", k}, {"mass", to_string(pmf.mass(k))}, {"mass_float", to_double(pmf.mass(k))}});
  return Json{{"schema", kSchemaVersion}, {"N", pmf.n()}, {"rows", rows}};
}

inline std::string ccdf_csv(std::size_t d, std::size_t n) {
  std::ostringstream os;
  os << "d,N,k,ccdf,ccdf_float\n";
  for (std::size_t k = 1; k <= 2 * n - 1; ++k) {
    const Rational p = ccdf_zperp(d, n, k);
    os << d << "," << n << "," << k << "," << to_string(p) << "," << format_double(to_double(p)) << "\n";
  }
  return os.str();
}

inline std::string fig4_csv(const std::vector<LowerBoundRow>& rows, bool exact_column) {
  std::ostringstream os;
  os << "N,d,k,lower_bound" << (exact_column ? ",lower_bound_exact" : "") << "\n";
  for (const auto& r : rows) {
    os << r.n << "," << r.d << "," << r.k << "," << format_double(to_double(r.lower_bound));
    if (exact_column) os << "," << to_string(r.lower_bound);
    os << "\n";
  }
  return os.str();
}

}  // namespace sepflow
