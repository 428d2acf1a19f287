#pragma once

#include <memory>
#include <optional>

#include "mmc/lagrangian.hpp"
#include "mmc/ricci.hpp"

namespace mmc {

// One resolution of a model with its operators, built on first use.
class Level {
 public:
  explicit Level(std::string spec, unsigned long long seed) : spec_(std::move(spec)), seed_(seed) {}

  const std::string& spec() const { return spec_; }
  const DiscreteSpace& space();
  const Dirichlet& dirichlet();
  const TestFunctionBank& bank();  // 20 functions, tau = 0.05
  const Connection& connection();
  const Complex& complex();

 private:
  std::string spec_;
  unsigned long long seed_;
  std::unique_ptr<DiscreteSpace> s_;
  std::unique_ptr<Dirichlet> dir_;
  std::unique_ptr<TestFunctionBank> bank_;
  std::unique_ptr<Connection> con_;
  std::unique_ptr<Complex> cx_;
};

// A model at policy.refine resolutions. kappa overrides the declared curvature.
class SuiteContext {
 public:
  SuiteContext(const std::string& spec, std::optional<double> kappa, const TolPolicy& policy);

  int levels() const { return static_cast<int>(levels_.size()); }
  Level& level(int i) { return *levels_.at(i); }
  Level& coarse() { return *levels_.front(); }
  Level& fine() { return *levels_.back(); }
  double kappa();
  const TolPolicy& policy() const { return policy_; }

 private:
  std::vector<std::unique_ptr<Level>> levels_;
  std::optional<double> kappa_;
  TolPolicy policy_;
};

struct CriterionReport {
  int id = 0;
  std::string name;
  std::string space;
  bool skipped = false;
  std::string reason;  // why skipped
  std::vector<Verdict> verdicts;

  bool pass() const { return !skipped && all_pass(verdicts); }
};

inline constexpr int kCriteria = 7;

std::string criterion_name(int id);
// Criteria 2 and 6 need a torus, 3 a sphere; others run on any model.
std::optional<std::string> criterion_inapplicable(int id, const DiscreteSpace& s);
CriterionReport run_criterion(int id, SuiteContext& ctx);
std::vector<CriterionReport> run_suite(SuiteContext& ctx);

json to_json(const CriterionReport& r);
// {"criteria":[...]} with sorted keys; each id once.
std::string emit_suite_report(const std::vector<CriterionReport>& reports);
// Skipped criteria do not fail the suite; an all-skipped suite does.
bool suite_pass(const std::vector<CriterionReport>& reports);

// Named checks shared by the criteria and the subcommands. A check that does
// not apply to the model returns no verdicts.
std::vector<std::string> check_names();
std::vector<std::string> criterion_checks(int id);
std::vector<Verdict> run_checks(const std::vector<std::string>& names, SuiteContext& ctx);
// Constant-curvature charts at their declared K, where the pointwise
// curvature inequalities are equalities and the two-sided gap is reported.
bool equality_model(SuiteContext& ctx);

// Building blocks.
// Worst measurement of a family; extra["count"], extra["worst"] are added.
Measurement worst_of(const std::vector<Measurement>& ms);
// Reads extra["two_sided"] as the gap; the one-sided gap moves to extra["one_sided"].
Measurement two_sided(Measurement m);

}  // namespace mmc
