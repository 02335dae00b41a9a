#include "hitop/fea/problem_json.hpp"

#include <string>

#include "hitop/common/error.hpp"

namespace hitop::fea {

using nlohmann::json;

namespace {

const json& require(const json& doc, const char* key) {
  if (!doc.is_object()) throw ValidationError("", "problem document must be an object");
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(key, "required field is missing");
  return *it;
}

int as_int(const json& v, const std::string& field) {
  if (!v.is_number_integer()) throw ValidationError(field, "must be an integer");
  return v.get<int>();
}

double as_number(const json& v, const std::string& field) {
  if (!v.is_number()) throw ValidationError(field, "must be a number");
  return v.get<double>();
}

void add_rect(const json& rect, const std::string& field, int nelx, int nely, std::vector<int>& out) {
  if (!rect.is_object()) throw ValidationError(field, "rect must be an object");
  for (const char* k : {"row", "col", "rows", "cols"})
    if (!rect.contains(k)) throw ValidationError(field + "/" + k, "required field is missing");
  int r0 = as_int(rect["row"], field + "/row");
  int c0 = as_int(rect["col"], field + "/col");
  int nr = as_int(rect["rows"], field + "/rows");
  int nc = as_int(rect["cols"], field + "/cols");
  if (r0 < 0 || c0 < 0 || nr < 0 || nc < 0 || r0 + nr > nely || c0 + nc > nelx)
    throw ValidationError(field, "rectangle exceeds the mesh");
  for (int r = r0; r < r0 + nr; ++r)
    for (int c = c0; c < c0 + nc; ++c) out.push_back(r * nelx + c);
}

}  // namespace

DesignProblem problem_from_json(const json& doc) {
  DesignProblem p;
  p.nelx = as_int(require(doc, "nelx"), "nelx");
  p.nely = as_int(require(doc, "nely"), "nely");
  p.volfrac = as_number(require(doc, "volfrac"), "volfrac");
  if (doc.contains("nu")) p.poisson_ratio = as_number(doc["nu"], "nu");

  const json& loads = require(doc, "loads");
  if (!loads.is_array()) throw ValidationError("loads", "must be an array of [dof, value] pairs");
  for (std::size_t i = 0; i < loads.size(); ++i) {
    const std::string field = "loads/" + std::to_string(i);
    const json& l = loads[i];
    if (!l.is_array() || l.size() != 2) throw ValidationError(field, "must be a [dof, value] pair");
    p.loads.push_back({as_int(l[0], field + "/0"), as_number(l[1], field + "/1")});
  }

  const json& fixed = require(doc, "fixed_dofs");
  if (!fixed.is_array()) throw ValidationError("fixed_dofs", "must be an array of dof indices");
  for (std::size_t i = 0; i < fixed.size(); ++i) p.fixed_dofs.push_back(as_int(fixed[i], "fixed_dofs/" + std::to_string(i)));

  if (doc.contains("passive")) {
    const json& passive = doc["passive"];
    if (!passive.is_array()) throw ValidationError("passive", "must be an array");
    if (p.nelx < 1 || p.nely < 1) throw ValidationError("nelx", "must be >= 1");
    for (std::size_t i = 0; i < passive.size(); ++i) {
      const std::string field = "passive/" + std::to_string(i);
      const json& entry = passive[i];
      if (!entry.is_object() || !entry.contains("kind")) throw ValidationError(field + "/kind", "required field is missing");
      const std::string kind = entry["kind"].is_string() ? entry["kind"].get<std::string>() : "";
      if (kind != "solid" && kind != "void") throw ValidationError(field + "/kind", "must be \"solid\" or \"void\"");
      auto& target = kind == "solid" ? p.passive_solid : p.passive_void;
      if (entry.contains("rect")) add_rect(entry["rect"], field + "/rect", p.nelx, p.nely, target);
      if (entry.contains("elements")) {
        const json& els = entry["elements"];
        if (!els.is_array()) throw ValidationError(field + "/elements", "must be an array");
        for (std::size_t k = 0; k < els.size(); ++k)
          target.push_back(as_int(els[k], field + "/elements/" + std::to_string(k)));
      }
    }
  }
  p.normalize();
  p.validate();
  return p;
}

json problem_to_json(const DesignProblem& p) {
  json doc;
  doc["nelx"] = p.nelx;
  doc["nely"] = p.nely;
  doc["volfrac"] = p.volfrac;
  doc["nu"] = p.poisson_ratio;
  doc["loads"] = json::array();
  for (const auto& l : p.loads) doc["loads"].push_back({l.dof, l.value});
  doc["fixed_dofs"] = p.fixed_dofs;
  doc["passive"] = json::array();
  if (!p.passive_solid.empty()) doc["passive"].push_back({{"kind", "solid"}, {"elements", p.passive_solid}});
  if (!p.passive_void.empty()) doc["passive"].push_back({{"kind", "void"}, {"elements", p.passive_void}});
  return doc;
}

}  // namespace hitop::fea
