#pragma once

// The gwspeed command line: subcommands speed, beta, verify and envdist with
// machine-readable JSON (or flat CSV) output. Identical configuration and
// seed give byte-identical output up to the timestamp field, for any worker
// count.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gws::cli {

struct RunConfig {
  std::string command;
  std::string law = "0:0.25,2:0.75";
  double lambda = 1.0;
  std::string method = "all";  // speed: formula|empirical|regen|drift|all
  std::string check = "all";   // verify: lemma31|lemma43|lemma21|prop32|green|envdist|all
  uint64_t steps = 20'000;
  uint64_t replicas = 400;
  uint64_t samples = 20'000;
  double beta_tol = 1e-3;
  int64_t tail_buffer = -1;  // -1: 10% of steps
  uint64_t budget = 2'000'000;
  uint64_t seed = 1;
  int workers = 1;
  std::string format = "json";  // json|csv
  std::string output;           // empty: stdout
  int bins = 20;                // beta histogram bins
  std::string tree_file;        // verify: fixture tree (one word per line)
  std::string word;             // verify: fixture vertex
  std::string dump_walk;        // speed: trajectory CSV path (debug)
};

// Runs the CLI. Exit codes: 0 success, 1 verify contract violation,
// 2 usage/regime/domain errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gws::cli
