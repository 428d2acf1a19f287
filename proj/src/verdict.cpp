#include "mmc/verdict.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace mmc {

namespace {

// JSON has no representation for inf/nan.
json finite_or_string(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double number_from(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return NAN;
}

}  // namespace

json to_json(const Verdict& v) {
  return json{{"name", v.name},
              {"anchor", v.anchor},
              {"lhs", finite_or_string(v.lhs)},
              {"rhs", finite_or_string(v.rhs)},
              {"gap", finite_or_string(v.gap)},
              {"tol", finite_or_string(v.tol)},
              {"pass", v.pass},
              {"meta", v.meta}};
}

Verdict verdict_from_json(const json& j) {
  Verdict v;
  v.name = j.at("name").get<std::string>();
  v.anchor = j.at("anchor").get<std::string>();
  v.lhs = number_from(j.at("lhs"));
  v.rhs = number_from(j.at("rhs"));
  v.gap = number_from(j.at("gap"));
  v.tol = number_from(j.at("tol"));
  v.pass = j.at("pass").get<bool>();
  v.meta = j.value("meta", json::object());
  return v;
}

std::string emit_report(const std::vector<Verdict>& verdicts) {
  json arr = json::array();
  for (const auto& v : verdicts) arr.push_back(to_json(v));
  return json{{"verdicts", arr}}.dump();
}

void emit_report(const std::vector<Verdict>& verdicts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << emit_report(verdicts) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path);
}

bool all_pass(const std::vector<Verdict>& verdicts) {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.pass; });
}

Verdict exact_verdict(const std::string& name, const std::string& anchor, const Measurement& m, double tol,
                      const TolPolicy& policy) {
  Verdict v;
  v.name = name;
  v.anchor = anchor;
  v.lhs = m.lhs;
  v.rhs = m.rhs;
  v.gap = m.gap;
  v.tol = tol * policy.scale;
  v.pass = std::isfinite(m.gap) && m.gap <= v.tol;
  v.meta = m.extra;
  v.meta["h"] = m.h;
  v.meta["dt"] = m.dt;
  v.meta["seed"] = policy.seed;
  v.meta["mode"] = "exact";
  return v;
}

Verdict refined_verdict(const std::string& name, const std::string& anchor, const std::vector<Measurement>& levels,
                        const TolPolicy& policy, double ratio) {
  if (levels.empty()) throw std::invalid_argument("refined_verdict needs at least one level");
  if (ratio <= 0.0) ratio = policy.ratio;
  const Measurement& fine = levels.back();
  Verdict v;
  v.name = name;
  v.anchor = anchor;
  v.lhs = fine.lhs;
  v.rhs = fine.rhs;
  v.gap = fine.gap;
  json gaps = json::array();
  json hs = json::array();
  for (const auto& m : levels) {
    gaps.push_back(finite_or_string(m.gap));
    hs.push_back(m.h);
  }
  v.meta = fine.extra;
  v.meta["gaps"] = gaps;
  v.meta["h"] = hs;
  v.meta["dt"] = fine.dt;
  v.meta["seed"] = policy.seed;
  const double floor = policy.floor * policy.scale;
  if (levels.size() == 1) {
    v.tol = std::max(policy.scale * fine.h, floor);
    v.meta["mode"] = "single";
  } else {
    const Measurement& coarse = levels[levels.size() - 2];
    v.tol = std::max(ratio * coarse.gap * policy.scale, floor);
    v.meta["mode"] = "refined";
    v.meta["ratio_limit"] = ratio;
    v.meta["ratio"] = coarse.gap > 0.0 ? finite_or_string(fine.gap / coarse.gap) : json(nullptr);
  }
  v.pass = std::isfinite(fine.gap) && fine.gap <= v.tol;
  return v;
}

}  // namespace mmc
