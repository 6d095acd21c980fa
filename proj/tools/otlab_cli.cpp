// Command-line front end for the transport laboratory.
//
//   otlab run <scenario>       run one scenario (built-in name or JSON path)
//   otlab suite <dir|builtin>  run a directory of scenarios, or the built-ins
//   otlab classify ...         classify a tangent-cone pair given in degrees
//   otlab exponents ...        print the scaling-exponent table for (n,m,l,k)
//   otlab replay <bundle>      re-run diagnostics from a persisted run bundle
//
// Exit status: 0 when every diagnostic passes, 1 when any fails or errors,
// 2 on configuration or IO problems.

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otlab/lab.hpp"

namespace {

struct GlobalFlags {
  std::optional<unsigned long long> seed;
  std::string out_dir = "otlab_out";
  int jobs = 1;
  std::optional<double> slack;
  bool quiet = false;
};

otlab::RunOptions make_options(const GlobalFlags& g) {
  otlab::RunOptions opt;
  opt.out_dir = g.out_dir;
  opt.seed_override = g.seed;
  opt.slack_override = g.slack;
  opt.quiet = g.quiet;
  return opt;
}

void emit(const GlobalFlags& g, const std::string& text) {
  if (!g.quiet) std::cout << text;
}

int run_one(const GlobalFlags& g, const std::string& what) {
  otlab::Scenario sc = [&] {
    if (auto builtin = otlab::builtin_scenario(what)) return *builtin;
    return otlab::load_scenario_file(what);
  }();
  otlab::Report rep = otlab::run(sc, make_options(g));
  emit(g, rep.text());
  return rep.all_pass() ? 0 : 1;
}

int run_suite(const GlobalFlags& g, const std::string& what) {
  std::vector<otlab::Scenario> scenarios =
      what == "builtin" ? otlab::builtin_scenarios()
                        : otlab::load_scenario_dir(what);
  otlab::SuiteResult res = otlab::run_suite(scenarios, make_options(g),
                                            g.jobs);
  std::string digest;
  for (const auto& r : res.reports)
    digest += r.scenario_name + " " + (r.all_pass() ? "PASS" : "FAIL") + "\n";
  digest += std::string("suite: ") + (res.all_pass ? "PASS" : "FAIL") + "\n";
  emit(g, digest);
  return res.all_pass ? 0 : 1;
}

int run_classify(const GlobalFlags& g, double src_lo, double src_hi,
                 double tgt_lo, double tgt_hi) {
  auto rad = [](double d) { return d * otlab::kPi / 180.0; };
  otlab::ConePair pair(otlab::Sector::of(rad(src_lo), rad(src_hi)),
                       otlab::Sector::of(rad(tgt_lo), rad(tgt_hi)));
  otlab::Classification cl = otlab::classify(pair);
  std::string text = std::string("verdict: ") + otlab::to_string(cl.verdict) +
                     "\nfamily_dimension: " +
                     std::to_string(cl.family_dimension) + "\n";
  if (cl.witness) {
    const otlab::Mat2& q = cl.witness->Q;
    text += "witness_Q: [[" + otlab::fmt17(q.a) + ", " + otlab::fmt17(q.b) +
            "], [" + otlab::fmt17(q.c) + ", " + otlab::fmt17(q.d) + "]]\n";
  }
  emit(g, text);
  return 0;
}

int run_exponents(const GlobalFlags& g, double n, double m, double l,
                  double k) {
  otlab::ExponentTable t = otlab::exponents(n, m, l, k);
  std::string text = "alpha: " + otlab::fmt17(t.alpha) + "\n" +
                     "beta_u: " + otlab::fmt17(t.beta_u) + "\n" +
                     "beta_v: " + otlab::fmt17(t.beta_v) + "\n" +
                     "chi_exponent: " + otlab::fmt17(t.chi_exponent) + "\n" +
                     "kappa_star: " + otlab::fmt17(t.kappa_star) + "\n" +
                     "beta_flat: " + otlab::fmt17(t.beta_flat) + "\n" +
                     "beta_cone_u: " + otlab::fmt17(t.beta_cone_u) + "\n" +
                     "beta_cone_v: " + otlab::fmt17(t.beta_cone_v) + "\n" +
                     "gamma_vol: " + otlab::fmt17(t.gamma_vol) + "\n";
  emit(g, text);
  return 0;
}

int run_replay(const GlobalFlags& g, const std::string& bundle,
               const std::string& kind) {
  otlab::Report rep = otlab::replay_file(bundle, make_options(g), kind);
  emit(g, rep.text());
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-discrete optimal-transport laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalFlags g;
  unsigned long long seed_value = 0;
  double slack_value = 0.0;
  auto* seed_opt = app.add_option("--seed", seed_value,
                                  "override scenario RNG seeds");
  app.add_option("--out-dir", g.out_dir, "directory for reports and CSVs");
  app.add_option("--jobs", g.jobs, "parallel scenarios for suite runs")
      ->check(CLI::Range(1, 64));
  auto* slack_opt = app.add_option(
      "--slack", slack_value, "override the chi monotonicity slack fraction");
  app.add_flag("--quiet", g.quiet, "suppress stdout (exit status only)");

  std::string run_arg, suite_arg = "builtin", bundle_arg, kind_arg;
  double src_lo = 0.0, src_hi = 0.0, tgt_lo = 0.0, tgt_hi = 0.0;
  double exp_n = 2.0, exp_m = 0.0, exp_l = 0.0, exp_k = 0.0;

  CLI::App* cmd_run = app.add_subcommand(
      "run", "run one scenario (built-in name or JSON config path)");
  cmd_run->add_option("scenario", run_arg,
                      "built-in scenario name or config path")
      ->required();

  CLI::App* cmd_suite = app.add_subcommand(
      "suite", "run every scenario in a directory, or 'builtin'");
  cmd_suite->add_option("dir", suite_arg,
                        "scenario directory, or 'builtin' for the built-ins");

  CLI::App* cmd_classify = app.add_subcommand(
      "classify", "classify a source/target tangent-cone pair (degrees)");
  cmd_classify->add_option("src_lo", src_lo, "source cone low angle")
      ->required();
  cmd_classify->add_option("src_hi", src_hi, "source cone high angle")
      ->required();
  cmd_classify->add_option("tgt_lo", tgt_lo, "target cone low angle")
      ->required();
  cmd_classify->add_option("tgt_hi", tgt_hi, "target cone high angle")
      ->required();

  CLI::App* cmd_exp = app.add_subcommand(
      "exponents", "print section/chi scaling exponents for (n, m, l, k)");
  cmd_exp->add_option("--n", exp_n, "ambient dimension (default 2)");
  cmd_exp->add_option("--m", exp_m, "flat directions at the base point");
  cmd_exp->add_option("--l", exp_l, "source degeneracy exponent");
  cmd_exp->add_option("--k", exp_k, "target degeneracy exponent");

  CLI::App* cmd_replay = app.add_subcommand(
      "replay", "re-run diagnostics from a persisted <name>_run.json bundle");
  cmd_replay->add_option("bundle", bundle_arg, "path to the run bundle")
      ->required();
  cmd_replay->add_option("--kind", kind_arg,
                         "re-run only diagnostics of this kind");

  CLI11_PARSE(app, argc, argv);

  if (seed_opt->count()) g.seed = seed_value;
  if (slack_opt->count()) g.slack = slack_value;

  try {
    if (cmd_run->parsed()) return run_one(g, run_arg);
    if (cmd_suite->parsed()) return run_suite(g, suite_arg);
    if (cmd_classify->parsed())
      return run_classify(g, src_lo, src_hi, tgt_lo, tgt_hi);
    if (cmd_exp->parsed()) return run_exponents(g, exp_n, exp_m, exp_l, exp_k);
    if (cmd_replay->parsed()) return run_replay(g, bundle_arg, kind_arg);
  } catch (const otlab::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
