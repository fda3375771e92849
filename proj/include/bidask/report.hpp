#pragma once

#include <cstdint>
#include <string>

#include "bidask/counterexample.hpp"

namespace bidask {

// Exit codes of the command-line pipeline.
enum ExitCode : int {
  kOk = 0,
  kCertificateFailure = 1,
  kInputError = 2,
  kNoConvergence = 3,
};

struct RunConfig {
  std::string command;  // solve | dual | cps-check | shadow-check | counterexample | verify
  std::string market_path;
  std::string report_path;  // input report for `verify`
  std::string utility = "log";
  double x = 1.0;
  double y = 1.0;
  double lambda_prime = -1.0;  // < 0 selects the default lambda/2
  CounterexampleParams ce;
  std::string out_path;  // empty: derived from BIDASK_OUTPUT_DIR or cwd
  std::uint64_t seed = 0;
  int samples = 50;
  int shadow_samples = 100;
  double gap_tol = 1e-8;
  double cert_tol = 1e-9;
  double value_tol = 1e-7;
  double align_tol = 1e-8;
  double trade_tol = 1e-12;
};

struct RunResult {
  int exit_code = kOk;
  std::string report_file;
  std::string message;  // human-readable diagnostic for stderr
};

// Executes the pipeline for config.command and writes the report JSON
// (schema 1). Timings live under a separate key so reports are otherwise
// byte-identical for identical config and seed.
RunResult run(const RunConfig& config);

}  // namespace bidask
