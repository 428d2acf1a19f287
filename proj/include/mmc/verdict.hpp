#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace mmc {

using json = nlohmann::json;

// One identity or inequality check. pass <=> gap <= tol.
struct Verdict {
  std::string name;
  std::string anchor;  // identity label, for traceability in reports
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
  double tol = 0.0;
  bool pass = false;
  json meta = json::object();  // resolution record {h, dt, seed, ...}
};

json to_json(const Verdict& v);
Verdict verdict_from_json(const json& j);
// {"verdicts":[...]} with sorted keys.
std::string emit_report(const std::vector<Verdict>& verdicts);
void emit_report(const std::vector<Verdict>& verdicts, const std::string& path);
bool all_pass(const std::vector<Verdict>& verdicts);

// A single-resolution measurement feeding a verdict.
struct Measurement {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;  // nonnegative, already normalized
  double h = 0.0;
  double dt = 0.0;
  json extra = json::object();
};

struct TolPolicy {
  double exact = 1e-10;  // machine-level identities
  double ratio = 0.75;   // fine gap / coarse gap
  double floor = 1e-9;   // gaps below this count as converged
  double scale = 1.0;    // --tol-scale
  int refine = 2;        // resolutions per asymptotic check
  unsigned long long seed = 42;
};

// gap <= tol * policy.scale.
Verdict exact_verdict(const std::string& name, const std::string& anchor, const Measurement& m, double tol,
                      const TolPolicy& policy);
// Two resolutions: pass iff fine gap <= ratio * coarse gap, or fine gap <= floor.
// With one resolution: pass iff gap <= scale * h (gaps are relative).
Verdict refined_verdict(const std::string& name, const std::string& anchor, const std::vector<Measurement>& levels,
                        const TolPolicy& policy, double ratio = -1.0);

}  // namespace mmc
