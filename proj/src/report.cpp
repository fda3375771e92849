#include "bidask/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bidask/cps.hpp"
#include "bidask/dual_solver.hpp"
#include "bidask/shadow.hpp"
#include "json.hpp"

namespace bidask {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::string default_out_path(const RunConfig& cfg) {
  if (!cfg.out_path.empty()) return cfg.out_path;
  const char* dir = std::getenv("BIDASK_OUTPUT_DIR");
  const std::string base = dir != nullptr ? std::string(dir) : std::string(".");
  return base + "/" + cfg.command + "-report.json";
}

json check_to_json(const CheckResult& c, const EventTree* tree) {
  json j;
  j["ok"] = c.ok;
  j["worst"] = c.worst;
  if (c.node >= 0 && tree != nullptr) j["node"] = tree->node(c.node).id;
  if (!c.what.empty()) j["what"] = c.what;
  return j;
}

json solution_to_json(const Solution& sol, const EventTree& tree) {
  json j;
  j["value"] = sol.value;
  j["kkt_residual"] = sol.kkt_residual;
  j["evals"] = sol.evals;
  j["converged"] = sol.converged;
  j["strategy"] = json::parse(strategy_to_json(sol.strategy, tree));
  return j;
}

json deflator_report_to_json(const DeflatorReport& rep, const EventTree& tree) {
  json j;
  j["ok"] = rep.ok;
  j["nonnegative"] = check_to_json(rep.nonnegative, &tree);
  j["initial_scale"] = check_to_json(rep.initial_scale, &tree);
  j["spread"] = check_to_json(rep.spread, &tree);
  j["certificate"] = check_to_json(rep.certificate, &tree);
  j["sampled_supermartingale"] = check_to_json(rep.sampled, &tree);
  j["certificate_is_only_sufficient"] = rep.certificate_is_only_sufficient;
  return j;
}

json config_to_json(const RunConfig& cfg) {
  json j;
  j["command"] = cfg.command;
  j["utility"] = cfg.utility;
  j["x"] = cfg.x;
  j["y"] = cfg.y;
  j["seed"] = cfg.seed;
  j["samples"] = cfg.samples;
  j["tolerances"] = {{"gap", cfg.gap_tol},
                     {"certificate", cfg.cert_tol},
                     {"value", cfg.value_tol},
                     {"alignment", cfg.align_tol},
                     {"trade", cfg.trade_tol}};
  if (cfg.lambda_prime >= 0.0) j["lambda_prime"] = cfg.lambda_prime;
  return j;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

// Full solve pipeline: primal, extracted dual, certificates, price-system
// check and shadow verdict.
int run_solve(const RunConfig& cfg, json* report) {
  const MarketSpec market = market_from_json(read_file(cfg.market_path));
  const Utility utility = Utility::from_name(cfg.utility);
  json timings;

  Timer t_primal;
  SolveOptions sopts;
  sopts.trade_tol = cfg.trade_tol;
  const Solution primal = solve_frictional(market, utility, cfg.x, sopts);
  timings["primal_ms"] = t_primal.ms();

  Timer t_dual;
  const Deflator deflator = extract_deflator(market, utility, primal);
  double dual_objective = 0.0;
  for (int l : market.tree.leaves())
    dual_objective += market.tree.uncond_prob(l) * utility.conjugate(deflator.y0[l]);
  const double gap = dual_objective + cfg.x * deflator.y - primal.value;
  timings["dual_ms"] = t_dual.ms();

  VerifyOptions vopts;
  vopts.tol = cfg.cert_tol;
  vopts.samples = cfg.samples;
  vopts.seed = cfg.seed;

  Timer t_cert;
  const DeflatorReport defl_rep = verify_deflator(market, deflator, vopts);
  const OptimalityReport opt_rep =
      verify_optimality_relations(market, utility, cfg.x, primal, deflator, vopts);
  const AlignmentReport align_rep =
      verify_trade_alignment(market, primal, deflator, cfg.align_tol);
  const LocalShadowReport local_rep = verify_local_shadow(
      market, utility, cfg.x, primal, deflator, cfg.shadow_samples, cfg.seed, cfg.value_tol);
  timings["certificates_ms"] = t_cert.ms();

  Timer t_cps;
  const double lp = cfg.lambda_prime >= 0.0 ? cfg.lambda_prime : market.lambda / 2.0;
  const CpsVerdict cps = market.lambda > 0.0 ? find_cps(market, lp) : CpsVerdict{true, 1.0, {}};
  timings["cps_ms"] = t_cps.ms();

  Timer t_shadow;
  json shadow_json;
  {
    const CpsDualResult mart = dual_value_via_cps(market, utility, deflator.y);
    Deflator source;
    source.y = deflator.y;
    source.y0.resize(market.tree.size());
    source.y1.resize(market.tree.size());
    for (int u = 0; u < market.tree.size(); ++u) {
      source.y0[u] = deflator.y * mart.system.z0[u];
      source.y1[u] = deflator.y * mart.system.z1[u];
    }
    const ShadowCandidate cand = candidate_from_dual(market, source, cfg.cert_tol);
    const ShadowVerdict verdict =
        verify_shadow(market, utility, cfg.x, cand, &source, cfg.value_tol, cfg.align_tol);
    shadow_json["exists"] = verdict.exists;
    shadow_json["frictional_value"] = verdict.frictional_value;
    shadow_json["frictionless_value"] = verdict.frictionless_value;
    shadow_json["margin"] = verdict.margin;
    shadow_json["alignment"] = check_to_json(verdict.alignment, &market.tree);
    shadow_json["martingale_y0_ok"] = verdict.martingale_y0.ok;
    shadow_json["martingale_y1_ok"] = verdict.martingale_y1.ok;
    shadow_json["candidate_arbitrage_free"] = verdict.candidate_arbitrage_free;
    if (!verdict.note.empty()) shadow_json["note"] = verdict.note;
  }
  timings["shadow_ms"] = t_shadow.ms();

  (*report)["market"] = json::parse(market_to_json(market));
  (*report)["primal"] = solution_to_json(primal, market.tree);
  (*report)["dual"] = {{"yhat", deflator.y},
                       {"value", dual_objective},
                       {"duality_gap", gap},
                       {"deflator", json::parse(deflator_to_json(deflator, market.tree))}};
  (*report)["certificates"] = {
      {"deflator", deflator_report_to_json(defl_rep, market.tree)},
      {"optimality",
       {{"ok", opt_rep.ok},
        {"terminal_marginal", check_to_json(opt_rep.terminal_marginal, &market.tree)},
        {"product", check_to_json(opt_rep.product, &market.tree)},
        {"drift", check_to_json(opt_rep.drift, &market.tree)},
        {"bipolar", check_to_json(opt_rep.bipolar, &market.tree)}}},
      {"alignment",
       {{"ok", align_rep.ok},
        {"buys", check_to_json(align_rep.buys, &market.tree)},
        {"sells", check_to_json(align_rep.sells, &market.tree)},
        {"identity", check_to_json(align_rep.identity, &market.tree)},
        {"trading_nodes", align_rep.trading_nodes}}},
      {"local_shadow",
       {{"ok", local_rep.ok},
        {"checked", local_rep.checked},
        {"vacuous", local_rep.vacuous},
        {"max_violation", local_rep.max_violation},
        {"zero_deviation_gap", local_rep.zero_deviation_gap}}}};
  (*report)["cps"] = {{"feasible", cps.feasible},
                      {"margin", cps.margin},
                      {"lambda_prime", lp}};
  (*report)["shadow"] = shadow_json;
  (*report)["timings"] = timings;

  const bool certified = defl_rep.ok && opt_rep.ok && align_rep.ok && local_rep.ok &&
                         std::abs(gap) <= cfg.gap_tol * std::max(1.0, std::abs(primal.value));
  if (!primal.converged) return kNoConvergence;
  return certified ? kOk : kCertificateFailure;
}

int run_dual(const RunConfig& cfg, json* report) {
  const MarketSpec market = market_from_json(read_file(cfg.market_path));
  const Utility utility = Utility::from_name(cfg.utility);
  json timings;

  Timer t;
  const DualSolution dual = dual_value(market, utility, cfg.y);
  timings["dual_ms"] = t.ms();
  Timer t2;
  const CpsDualResult via_cps = dual_value_via_cps(market, utility, cfg.y);
  timings["cps_dual_ms"] = t2.ms();

  VerifyOptions vopts;
  vopts.tol = cfg.cert_tol;
  vopts.samples = cfg.samples;
  vopts.seed = cfg.seed;
  const DeflatorReport defl_rep = verify_deflator(market, dual.deflator, vopts);

  (*report)["market"] = json::parse(market_to_json(market));
  (*report)["dual"] = {{"y", cfg.y},
                       {"value", dual.value},
                       {"solver_gap", dual.solver_gap},
                       {"value_via_cps", via_cps.value},
                       {"route_gap", std::abs(dual.value - via_cps.value)},
                       {"deflator", json::parse(deflator_to_json(dual.deflator, market.tree))}};
  (*report)["certificates"] = {{"deflator", deflator_report_to_json(defl_rep, market.tree)}};
  (*report)["timings"] = timings;
  if (!dual.converged || !via_cps.converged) return kNoConvergence;
  return defl_rep.ok ? kOk : kCertificateFailure;
}

int run_cps_check(const RunConfig& cfg, json* report) {
  const MarketSpec market = market_from_json(read_file(cfg.market_path));
  const double lp = cfg.lambda_prime >= 0.0 ? cfg.lambda_prime : market.lambda / 2.0;
  Timer t;
  const CpsVerdict v = find_cps(market, lp);
  (*report)["market"] = json::parse(market_to_json(market));
  (*report)["cps"] = {{"feasible", v.feasible}, {"margin", v.margin}, {"lambda_prime", lp}};
  if (v.feasible) {
    json nodes = json::array();
    for (int u = 0; u < market.tree.size(); ++u)
      nodes.push_back({{"id", market.tree.node(u).id},
                       {"z0", v.system.z0[u]},
                       {"z1", v.system.z1[u]}});
    (*report)["cps"]["system"] = nodes;
  }
  (*report)["timings"] = {{"cps_ms", t.ms()}};
  return v.feasible ? kOk : kCertificateFailure;
}

int run_shadow_check(const RunConfig& cfg, json* report) {
  const MarketSpec market = market_from_json(read_file(cfg.market_path));
  const Utility utility = Utility::from_name(cfg.utility);
  json timings;

  Timer t;
  SolveOptions sopts;
  const Solution primal = solve_frictional(market, utility, cfg.x, sopts);
  const Deflator extracted = extract_deflator(market, utility, primal);
  const CpsDualResult mart = dual_value_via_cps(market, utility, extracted.y);
  Deflator source;
  source.y = extracted.y;
  source.y0.resize(market.tree.size());
  source.y1.resize(market.tree.size());
  for (int u = 0; u < market.tree.size(); ++u) {
    source.y0[u] = extracted.y * mart.system.z0[u];
    source.y1[u] = extracted.y * mart.system.z1[u];
  }
  const ShadowCandidate cand = candidate_from_dual(market, source, cfg.cert_tol);
  const ShadowVerdict verdict =
      verify_shadow(market, utility, cfg.x, cand, &source, cfg.value_tol, cfg.align_tol);
  timings["shadow_ms"] = t.ms();

  json cj = json::array();
  for (int u = 0; u < market.tree.size(); ++u)
    cj.push_back({{"id", market.tree.node(u).id}, {"price", verdict.candidate.price[u]}});
  (*report)["market"] = json::parse(market_to_json(market));
  (*report)["shadow"] = {{"exists", verdict.exists},
                         {"frictional_value", verdict.frictional_value},
                         {"frictionless_value", verdict.frictionless_value},
                         {"margin", verdict.margin},
                         {"values_match", verdict.values_match},
                         {"alignment", check_to_json(verdict.alignment, &market.tree)},
                         {"martingale_y0_ok", verdict.martingale_y0.ok},
                         {"martingale_y1_ok", verdict.martingale_y1.ok},
                         {"candidate_arbitrage_free", verdict.candidate_arbitrage_free},
                         {"candidate", cj}};
  if (!verdict.note.empty()) (*report)["shadow"]["note"] = verdict.note;
  (*report)["timings"] = timings;
  return kOk;  // a "no shadow price" verdict is a successful run
}

int run_counterexample(const RunConfig& cfg, json* report) {
  json timings;
  Timer t;
  const CounterexampleMarket cm = build_market(cfg.ce);
  const NonexistenceCertificate cert = verify_nonexistence(cfg.ce);
  const ClosedFormPrimal pr = closed_form_primal(cfg.ce, cm);
  const ClosedFormDual du = closed_form_dual(cfg.ce, cm);
  const ClosedFormFrictionless fl = closed_form_frictionless(cfg.ce, cm);
  timings["counterexample_ms"] = t.ms();

  (*report)["params"] = {{"lambda", cfg.ce.lambda},
                         {"epsilon", cfg.ce.epsilon},
                         {"q0", cfg.ce.q0},
                         {"q1", cfg.ce.q1},
                         {"truncation", cfg.ce.truncation}};
  (*report)["market"] = json::parse(market_to_json(cm.market));
  (*report)["renormalization"] = cm.renormalization;
  json conv = json::array();
  for (const TruncationPoint& tp : cert.convergence)
    conv.push_back({{"N", tp.N},
                    {"solver_trade", tp.solver_trade},
                    {"cap", tp.cap},
                    {"residual", tp.residual}});
  json rob = json::array();
  for (const SpreadRobustnessPoint& r : cert.robustness)
    rob.push_back({{"lambda_prime", r.lambda_prime}, {"gap", r.gap}});
  (*report)["certificate"] = {
      {"ok", cert.ok},
      {"utility_gap", cert.utility_gap},
      {"frictional_value", pr.value},
      {"frictionless_value", fl.value},
      {"frictional_first_trade", cert.frictional_first_trade},
      {"frictionless_first_trade", cert.frictionless_first_trade},
      {"drift0", cert.drift0},
      {"drift1", cert.drift1},
      {"deflator_certificate_ok", cert.deflator_certificate_ok},
      {"deflator_certificate_worst", du.certificate_worst},
      {"convergence", conv},
      {"convergence_monotone", cert.convergence_monotone},
      {"spread_robustness", rob}};
  if (!cert.failure.empty()) (*report)["certificate"]["failure"] = cert.failure;
  (*report)["strategy"] = json::parse(strategy_to_json(pr.strategy, cm.market.tree));
  (*report)["deflator"] = json::parse(deflator_to_json(du.deflator, cm.market.tree));
  (*report)["timings"] = timings;
  return cert.ok ? kOk : kCertificateFailure;
}

// Re-checks the stored artifacts of a previous report; tampering with any
// value or strategy entry breaks one of the recomputed identities.
int run_verify(const RunConfig& cfg, json* report) {
  const json prev = json::parse(read_file(cfg.report_path));
  if (!prev.contains("schema") || prev["schema"].get<int>() != 1)
    throw std::runtime_error("unsupported report schema");
  const std::string command = prev.at("config").at("command").get<std::string>();
  json checks = json::array();
  bool ok = true;
  auto check = [&](const std::string& name, bool pass, double residual) {
    checks.push_back({{"name", name}, {"ok", pass}, {"residual", residual}});
    ok = ok && pass;
  };

  if (command == "solve" || command == "counterexample") {
    const MarketSpec market = market_from_json(prev.at("market").dump());
    const Utility utility = command == "solve"
                                ? Utility::from_name(prev.at("config").at("utility").get<std::string>())
                                : Utility::log_utility();
    const json& pj = command == "solve" ? prev.at("primal").at("strategy") : prev.at("strategy");
    const Strategy st = strategy_from_json(pj.dump(), market.tree);
    std::string why;
    const bool admissible = is_admissible(st, market, st.initial_cash, &why);
    check("strategy_admissible", admissible, 0.0);

    const Holdings h = accumulate(market.tree, st);
    double value = 0.0;
    for (int l : market.tree.leaves())
      value += market.tree.uncond_prob(l) * utility.value_or_neg_inf(std::max(h.phi0[l], 0.0));
    const double stored = command == "solve"
                              ? prev.at("primal").at("value").get<double>()
                              : prev.at("certificate").at("frictional_value").get<double>();
    check("primal_value_consistent", std::abs(value - stored) <= 1e-9 * std::max(1.0, std::abs(stored)),
          std::abs(value - stored));

    const json& dj = command == "solve" ? prev.at("dual").at("deflator") : prev.at("deflator");
    const Deflator defl = deflator_from_json(dj.dump(), market.tree);
    if (command == "solve") {
      const DeflatorReport rep = verify_deflator(market, defl, {});
      check("deflator_certified", rep.ok, std::max({rep.spread.worst, rep.certificate.worst}));
      double dual_objective = 0.0;
      for (int l : market.tree.leaves())
        dual_objective += market.tree.uncond_prob(l) * utility.conjugate(defl.y0[l]);
      const double x = prev.at("config").at("x").get<double>();
      const double gap = dual_objective + x * defl.y - value;
      check("duality_gap_small", std::abs(gap) <= cfg.gap_tol * std::max(1.0, std::abs(value)),
            std::abs(gap));
    } else {
      CounterexampleParams prm;
      prm.lambda = prev.at("params").at("lambda").get<double>();
      prm.epsilon = prev.at("params").at("epsilon").get<double>();
      prm.q0 = prev.at("params").at("q0").get<double>();
      prm.q1 = prev.at("params").at("q1").get<double>();
      prm.truncation = prev.at("params").at("truncation").get<int>();
      const CounterexampleMarket cm = build_market(prm);
      const ClosedFormPrimal pr = closed_form_primal(prm, cm);
      const ClosedFormFrictionless fl = closed_form_frictionless(prm, cm);
      const double gap = fl.value - pr.value;
      const double stored_gap = prev.at("certificate").at("utility_gap").get<double>();
      check("utility_gap_consistent", std::abs(gap - stored_gap) <= 1e-10, std::abs(gap - stored_gap));
      check("utility_gap_positive", gap > 0.0, gap);
    }
  } else if (command == "dual") {
    const MarketSpec market = market_from_json(prev.at("market").dump());
    const Utility utility = Utility::from_name(prev.at("config").at("utility").get<std::string>());
    const Deflator defl = deflator_from_json(prev.at("dual").at("deflator").dump(), market.tree);
    const DeflatorReport rep = verify_deflator(market, defl, {});
    check("deflator_certified", rep.ok, std::max({rep.spread.worst, rep.certificate.worst}));
    double dual_objective = 0.0;
    for (int l : market.tree.leaves())
      dual_objective += market.tree.uncond_prob(l) * utility.conjugate(defl.y0[l]);
    const double stored = prev.at("dual").at("value").get<double>();
    check("dual_value_consistent", std::abs(dual_objective - stored) <= 1e-9 * std::max(1.0, std::abs(stored)),
          std::abs(dual_objective - stored));
  } else {
    throw std::runtime_error("verify: unsupported report command '" + command + "'");
  }

  (*report)["verified_report"] = cfg.report_path;
  (*report)["checks"] = checks;
  (*report)["ok"] = ok;
  return ok ? kOk : kCertificateFailure;
}

}  // namespace

RunResult run(const RunConfig& cfg) {
  RunResult result;
  json report;
  report["schema"] = 1;
  report["config"] = config_to_json(cfg);
  int code;
  try {
    if (cfg.command == "solve")
      code = run_solve(cfg, &report);
    else if (cfg.command == "dual")
      code = run_dual(cfg, &report);
    else if (cfg.command == "cps-check")
      code = run_cps_check(cfg, &report);
    else if (cfg.command == "shadow-check")
      code = run_shadow_check(cfg, &report);
    else if (cfg.command == "counterexample")
      code = run_counterexample(cfg, &report);
    else if (cfg.command == "verify")
      code = run_verify(cfg, &report);
    else
      throw std::invalid_argument("unknown command '" + cfg.command + "'");
  } catch (const std::invalid_argument& e) {
    result.exit_code = kInputError;
    result.message = e.what();
    return result;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    result.message = what;
    result.exit_code =
        what.find("did not") != std::string::npos || what.find("infeasible") != std::string::npos
            ? kNoConvergence
            : kInputError;
    return result;
  }
  result.exit_code = code;
  result.report_file = default_out_path(cfg);
  write_file(result.report_file, report.dump(2) + "\n");
  return result;
}

}  // namespace bidask
