#include "gwspeed/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "gwspeed/envlab.hpp"
#include "gwspeed/speed.hpp"

namespace gws::cli {

using nlohmann::json;

namespace {

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json config_echo(const RunConfig& cfg) {
  return json{
      {"command", cfg.command},   {"law", cfg.law},
      {"lambda", cfg.lambda},     {"method", cfg.method},
      {"check", cfg.check},       {"steps", cfg.steps},
      {"replicas", cfg.replicas}, {"samples", cfg.samples},
      {"beta_tol", cfg.beta_tol}, {"tail_buffer", cfg.tail_buffer},
      {"budget", cfg.budget},     {"seed", cfg.seed},
      {"workers", cfg.workers},   {"format", cfg.format},
      {"bins", cfg.bins},
  };
}

json estimate_json(const SpeedEstimate& e) {
  return json{{"method", e.method},
              {"value", e.value},
              {"stderr", e.stderr_},
              {"n_effective", e.n_effective},
              {"rejected_replicas", e.rejected_replicas}};
}

WalkParams walk_params(const RunConfig& cfg) {
  WalkParams wp;
  wp.horizon = cfg.steps;
  wp.replicas = cfg.replicas;
  wp.tail_buffer = cfg.tail_buffer < 0 ? SIZE_MAX : static_cast<size_t>(cfg.tail_buffer);
  return wp;
}

SampleParams sample_params(const RunConfig& cfg) {
  SampleParams sp;
  sp.n_samples = cfg.samples;
  sp.beta_tol = cfg.beta_tol;
  return sp;
}

// ---------------------------------------------------------------------------
// speed
// ---------------------------------------------------------------------------

json run_speed(const RunConfig& cfg) {
  const OffspringLaw law = OffspringLaw::parse(cfg.law);
  const Exec ex{cfg.seed, cfg.workers};
  const LawStats st = law_stats(law);

  std::vector<std::string> methods;
  if (cfg.method == "all") {
    methods = {"formula", "empirical", "regen", "drift"};
  } else {
    methods = {cfg.method};
  }
  json results = json::array();
  for (const std::string& m : methods) {
    SpeedEstimate e;
    if (m == "formula") {
      e = speed_formula(law, cfg.lambda, sample_params(cfg), ex);
    } else if (m == "empirical") {
      e = speed_empirical(law, cfg.lambda, walk_params(cfg), ex);
    } else if (m == "regen") {
      e = speed_regen(law, cfg.lambda, walk_params(cfg), ex);
    } else if (m == "drift") {
      e = speed_drift(law, cfg.lambda, walk_params(cfg), ex);
    } else {
      throw SimError("Usage", "unknown speed method '" + m + "'");
    }
    results.push_back(estimate_json(e));
  }

  if (!cfg.dump_walk.empty()) {
    TreeArena arena(law, mix64(cfg.seed, 0x64756d70ULL));
    ArenaSurface surface(arena);
    Rng rng(mix64(cfg.seed, 0x64756d7001ULL));
    const size_t n = std::min<size_t>(cfg.steps, 2000);
    const Trajectory traj =
        run_walk(surface, cfg.lambda, n, TreeArena::kRootParent, rng);
    std::ofstream f(cfg.dump_walk);
    if (!f) throw SimError("Io", "cannot write " + cfg.dump_walk);
    f << trajectory_csv(surface, traj);
  }

  return json{{"command", "speed"},
              {"config", config_echo(cfg)},
              {"law_stats", {{"m", st.m}, {"q", st.q}, {"lambda_c", st.lambda_c}}},
              {"results", results}};
}

// ---------------------------------------------------------------------------
// beta
// ---------------------------------------------------------------------------

json run_beta(const RunConfig& cfg) {
  const OffspringLaw law = OffspringLaw::parse(cfg.law);
  if (!(cfg.lambda > 0.0)) throw SimError("Usage", "--lambda must be positive");
  std::vector<double> values(cfg.samples);
  std::vector<uint8_t> zero(cfg.samples, 0);
  parallel_for(cfg.samples, cfg.workers, [&](size_t i) {
    Rng rng = Rng(mix64(mix64(mix64(cfg.seed, kStreamSample), 0x62657461ULL), i));
    values[i] = sample_beta(law, cfg.lambda, cfg.beta_tol, rng);
    zero[i] = values[i] == 0.0;
  });
  size_t zeros = 0;
  for (uint8_t z : zero) zeros += z;
  std::vector<size_t> hist(static_cast<size_t>(cfg.bins), 0);
  for (double v : values) {
    size_t bin = static_cast<size_t>(v * cfg.bins);
    if (bin >= hist.size()) bin = hist.size() - 1;
    ++hist[bin];
  }
  json edges = json::array();
  for (int i = 0; i <= cfg.bins; ++i)
    edges.push_back(static_cast<double>(i) / cfg.bins);
  return json{{"command", "beta"},
              {"config", config_echo(cfg)},
              {"law", cfg.law},
              {"lambda", cfg.lambda},
              {"samples", cfg.samples},
              {"mean", mean_stderr(values).mean},
              {"q_hat", static_cast<double>(zeros) / static_cast<double>(cfg.samples)},
              {"histogram", {{"edges", edges}, {"counts", hist}}}};
}

// ---------------------------------------------------------------------------
// envdist
// ---------------------------------------------------------------------------

json degree_law_json(const DegreeLaw& dl) {
  return json{{"k", dl.ks}, {"p", dl.ps}, {"provenance", dl.provenance}};
}

json run_envdist(const RunConfig& cfg) {
  const OffspringLaw law = OffspringLaw::parse(cfg.law);
  const Exec ex{cfg.seed, cfg.workers};
  const EmpiricalDegreeLaw emp =
      empirical_degree_law(law, cfg.lambda, cfg.steps, cfg.replicas, ex);
  const PredictedDegreeLaw pred =
      predicted_degree_law(law, cfg.lambda, cfg.samples, cfg.beta_tol, ex);
  return json{
      {"command", "envdist"},
      {"config", config_echo(cfg)},
      {"empirical", degree_law_json(emp.law)},
      {"predicted", degree_law_json(pred.law)},
      {"accepted_replicas", emp.accepted},
      {"rejected_replicas", emp.rejected},
      {"normalization",
       {{"value", pred.normalization}, {"rel_stderr", pred.normalization_rel_stderr}}},
      {"tv_distance", tv_distance(emp.law, pred.law)}};
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckOutcome {
  json report;
  bool passed = true;
};

CheckOutcome check_lemma31(const RunConfig& cfg) {
  CheckOutcome out;
  json details;
  if (!cfg.tree_file.empty()) {
    std::ifstream f(cfg.tree_file);
    if (!f) throw SimError("Io", "cannot read " + cfg.tree_file);
    std::stringstream ss;
    ss << f.rdbuf();
    const ExplicitTree tree = ExplicitTree::deserialize(ss.str());
    const Word x = word_parse(cfg.word.empty() ? "1" : cfg.word);
    // Random paths on the fixture tree.
    Rng rng(mix64(cfg.seed, 0x66697831ULL));
    double max_residual = 0.0;
    size_t made = 0;
    for (int attempt = 0; attempt < 4096 && made < 100; ++attempt) {
      std::vector<Site> path{Site::root_parent()};
      Word cur;
      bool okpath = false;
      for (size_t step = 0; step + 1 < 30; ++step) {
        path.push_back(Site::of(cur));
        if (cur == x) {
          okpath = true;
          break;
        }
        std::vector<Word> moves;
        if (!cur.empty()) moves.push_back(word_parent(cur));
        for (Letter j = 1; j <= tree.child_count(cur); ++j)
          moves.push_back(word_child(cur, j));
        if (moves.empty()) break;
        cur = moves[rng.next_below(moves.size())];
      }
      if (!okpath) continue;
      max_residual = std::max(max_residual,
                              time_reversal_residual(tree, x, path, cfg.lambda));
      ++made;
    }
    details["instances"] = made;
    details["max_residual"] = max_residual;
    out.passed = made > 0 && max_residual < 1e-12;
  } else {
    const SweepResult r = time_reversal_sweep(1000, cfg.seed);
    details["instances"] = r.instances;
    details["max_residual"] = r.max_residual;
    out.passed = r.max_residual < 1e-12;
  }
  details["threshold"] = 1e-12;
  out.report = json{{"name", "lemma31"}, {"passed", out.passed}, {"details", details}};
  return out;
}

CheckOutcome check_lemma43(const RunConfig& cfg) {
  const SweepResult r = reroot_crossing_sweep(1000, cfg.seed);
  CheckOutcome out;
  out.passed = r.max_residual < 1e-12;
  out.report = json{{"name", "lemma43"},
                    {"passed", out.passed},
                    {"details",
                     {{"instances", r.instances},
                      {"max_residual", r.max_residual},
                      {"threshold", 1e-12}}}};
  return out;
}

CheckOutcome check_lemma21(const RunConfig& cfg) {
  struct Case {
    const char* law;
    const char* x;
    int depth;
  };
  const Case cases[] = {
      {"0:0.25,2:0.75", "1.1", 3},
      {"0:0.25,2:0.75", "1", 2},
      {"1:0.5,3:0.5", "2", 2},
      {"2:1.0", "1.1", 3},
  };
  const double alpha = 0.001 / std::size(cases);  // Bonferroni across the battery
  const size_t samples = std::max<uint64_t>(cfg.samples, 10'000);
  CheckOutcome out;
  json rows = json::array();
  for (const Case& c : cases) {
    const ChiSquareResult r = backward_law_chi_square(
        OffspringLaw::parse(c.law), word_parse(c.x), c.depth, samples, cfg.seed);
    const bool ok = r.vacuous || r.p_value > alpha;
    out.passed = out.passed && ok;
    rows.push_back(json{{"law", c.law},
                        {"x", c.x},
                        {"depth", c.depth},
                        {"p_value", r.p_value},
                        {"statistic", r.statistic},
                        {"dof", r.dof},
                        {"vacuous", r.vacuous},
                        {"passed", ok}});
  }
  out.report = json{{"name", "lemma21"},
                    {"passed", out.passed},
                    {"details", {{"cases", rows}, {"alpha", alpha}, {"samples", samples}}}};
  return out;
}

CheckOutcome check_prop32(const RunConfig& cfg) {
  struct Case {
    const char* law;
    double lambda;
    int k;
    int max_epoch;
  };
  const Case cases[] = {
      {"2:1.0", 1.3, 1, 3},     {"2:1.0", 1.3, 2, 4},
      {"2:1.0", 0.7, 3, 5},     {"0:0.25,2:0.75", 0.8, 1, 3},
      {"0:0.25,2:0.75", 0.8, 2, 4},
  };
  CheckOutcome out;
  json rows = json::array();
  for (const Case& c : cases) {
    const double residual = fresh_reversal_residual(
        OffspringLaw::parse(c.law), c.lambda, c.k, c.max_epoch, cfg.budget);
    const bool ok = residual < 1e-10;
    out.passed = out.passed && ok;
    rows.push_back(json{{"law", c.law},
                        {"lambda", c.lambda},
                        {"k", c.k},
                        {"max_epoch", c.max_epoch},
                        {"residual", residual},
                        {"passed", ok}});
  }
  out.report = json{{"name", "prop32"},
                    {"passed", out.passed},
                    {"details", {{"cases", rows}, {"threshold", 1e-10}}}};
  return out;
}

CheckOutcome check_green(const RunConfig& cfg) {
  const std::pair<uint32_t, uint32_t> pairs[] = {{2, 2}, {3, 3}, {2, 3}};
  const Exec ex{cfg.seed, cfg.workers};
  CheckOutcome out;
  json rows = json::array();
  for (const auto& [bl, br] : pairs) {
    const GreenSumResult r = green_sum_check(bl, br, 1.0, 10'000, 10'000, ex);
    const double tol = std::max(0.05, 3.0 * r.mc_stderr);
    const bool ok = std::abs(r.mc - r.closed) < tol;
    out.passed = out.passed && ok;
    rows.push_back(json{{"b_left", bl},
                        {"b_right", br},
                        {"mc", r.mc},
                        {"mc_stderr", r.mc_stderr},
                        {"closed", r.closed},
                        {"decay", r.decay},
                        {"tolerance", tol},
                        {"passed", ok}});
  }
  out.report = json{{"name", "green"}, {"passed", out.passed}, {"details", {{"cases", rows}}}};
  return out;
}

CheckOutcome check_envdist(const RunConfig& cfg) {
  const OffspringLaw law = OffspringLaw::parse("0:0.25,2:0.75");
  const Exec ex{cfg.seed, cfg.workers};
  const EmpiricalDegreeLaw emp = empirical_degree_law(law, 0.8, 10'000, 10'000, ex);
  const PredictedDegreeLaw pred = predicted_degree_law(law, 0.8, 100'000, 1e-3, ex);
  const double tv = tv_distance(emp.law, pred.law);
  CheckOutcome out;
  out.passed = tv < 0.02;
  out.report = json{{"name", "envdist"},
                    {"passed", out.passed},
                    {"details",
                     {{"tv_distance", tv},
                      {"threshold", 0.02},
                      {"empirical", degree_law_json(emp.law)},
                      {"predicted", degree_law_json(pred.law)},
                      {"normalization_rel_stderr", pred.normalization_rel_stderr}}}};
  return out;
}

json run_verify(const RunConfig& cfg, bool& all_passed) {
  std::vector<std::string> checks;
  if (cfg.check == "all") {
    checks = {"lemma31", "lemma43", "lemma21", "prop32", "green", "envdist"};
  } else {
    checks = {cfg.check};
  }
  json reports = json::array();
  all_passed = true;
  for (const std::string& name : checks) {
    CheckOutcome out;
    if (name == "lemma31") {
      out = check_lemma31(cfg);
    } else if (name == "lemma43") {
      out = check_lemma43(cfg);
    } else if (name == "lemma21") {
      out = check_lemma21(cfg);
    } else if (name == "prop32") {
      out = check_prop32(cfg);
    } else if (name == "green") {
      out = check_green(cfg);
    } else if (name == "envdist") {
      out = check_envdist(cfg);
    } else {
      throw SimError("Usage", "unknown verify check '" + name + "'");
    }
    all_passed = all_passed && out.passed;
    reports.push_back(out.report);
  }
  return json{{"command", "verify"},
              {"config", config_echo(cfg)},
              {"checks", reports},
              {"all_passed", all_passed}};
}

// ---------------------------------------------------------------------------
// Output formatting
// ---------------------------------------------------------------------------

std::string to_csv(const json& doc) {
  std::ostringstream out;
  const std::string cmd = doc.at("command");
  if (cmd == "speed") {
    out << "method,value,stderr,n_effective,rejected_replicas\n";
    for (const auto& r : doc.at("results")) {
      out << r.at("method").get<std::string>() << ',' << r.at("value").dump() << ','
          << r.at("stderr").dump() << ',' << r.at("n_effective").dump() << ','
          << r.at("rejected_replicas").dump() << '\n';
    }
  } else if (cmd == "beta") {
    out << "field,value\n";
    out << "mean," << doc.at("mean").dump() << '\n';
    out << "q_hat," << doc.at("q_hat").dump() << '\n';
    const auto& counts = doc.at("histogram").at("counts");
    for (size_t i = 0; i < counts.size(); ++i)
      out << "bin_" << i << ',' << counts[i].dump() << '\n';
  } else if (cmd == "envdist") {
    out << "k,empirical,predicted\n";
    const auto& emp = doc.at("empirical");
    const auto& pred = doc.at("predicted");
    std::map<uint32_t, std::pair<double, double>> rows;
    for (size_t i = 0; i < emp.at("k").size(); ++i)
      rows[emp.at("k")[i].get<uint32_t>()].first = emp.at("p")[i].get<double>();
    for (size_t i = 0; i < pred.at("k").size(); ++i)
      rows[pred.at("k")[i].get<uint32_t>()].second = pred.at("p")[i].get<double>();
    for (const auto& [k, pq] : rows)
      out << k << ',' << pq.first << ',' << pq.second << '\n';
    out << "tv," << doc.at("tv_distance").dump() << ",\n";
  } else if (cmd == "verify") {
    out << "check,passed\n";
    for (const auto& c : doc.at("checks"))
      out << c.at("name").get<std::string>() << ','
          << (c.at("passed").get<bool>() ? "1" : "0") << '\n';
  }
  return out.str();
}

void emit(const RunConfig& cfg, json doc, std::ostream& out) {
  doc["timestamp"] = timestamp_utc();
  std::string text =
      cfg.format == "csv" ? to_csv(doc) : doc.dump(2) + "\n";
  if (cfg.output.empty()) {
    out << text;
  } else {
    std::ofstream f(cfg.output);
    if (!f) throw SimError("Io", "cannot write " + cfg.output);
    f << text;
  }
}

// ---------------------------------------------------------------------------
// Argument handling
// ---------------------------------------------------------------------------

// Flat key=value config file; flags override file values.
std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SimError("Io", "cannot read config file " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (!key.empty()) kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void apply_config_file(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
  const auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("law")) cfg.law = *v;
  if (const auto* v = get("lambda")) cfg.lambda = std::stod(*v);
  if (const auto* v = get("method")) cfg.method = *v;
  if (const auto* v = get("check")) cfg.check = *v;
  if (const auto* v = get("steps")) cfg.steps = std::stoull(*v);
  if (const auto* v = get("replicas")) cfg.replicas = std::stoull(*v);
  if (const auto* v = get("samples")) cfg.samples = std::stoull(*v);
  if (const auto* v = get("beta_tol")) cfg.beta_tol = std::stod(*v);
  if (const auto* v = get("tail_buffer")) cfg.tail_buffer = std::stoll(*v);
  if (const auto* v = get("budget")) cfg.budget = std::stoull(*v);
  if (const auto* v = get("seed")) cfg.seed = std::stoull(*v);
  if (const auto* v = get("workers")) cfg.workers = std::stoi(*v);
  if (const auto* v = get("format")) cfg.format = *v;
  if (const auto* v = get("output")) cfg.output = *v;
  if (const auto* v = get("bins")) cfg.bins = std::stoi(*v);
}

void add_common_options(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--law", cfg.law, "offspring law literal k:p,k:p,...");
  sub->add_option("--lambda", cfg.lambda, "bias parameter (> 0)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--seed", cfg.seed, "base seed")->envname("GWSPEED_SEED");
  sub->add_option("--workers", cfg.workers, "worker threads")
      ->check(CLI::PositiveNumber);
  sub->add_option("--format", cfg.format, "output format")
      ->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--output", cfg.output, "write the report to this path");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;

  // The config file provides defaults; flags parsed afterwards override it.
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      try {
        apply_config_file(cfg, load_config_file(args[i + 1]));
      } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
      }
    }
  }

  CLI::App app{"lambda-biased random walks on Galton-Watson trees"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key=value config file")
      ->expected(1);

  CLI::App* speed = app.add_subcommand("speed", "estimate the walk speed");
  add_common_options(speed, cfg);
  speed->add_option("--method", cfg.method, "formula|empirical|regen|drift|all")
      ->check(CLI::IsMember({"formula", "empirical", "regen", "drift", "all"}));
  speed->add_option("--steps", cfg.steps, "walk horizon per replica");
  speed->add_option("--replicas", cfg.replicas, "independent replicas");
  speed->add_option("--samples", cfg.samples, "formula-route sample count");
  speed->add_option("--beta-tol", cfg.beta_tol, "escape probability tolerance")
      ->check(CLI::PositiveNumber);
  speed->add_option("--tail-buffer", cfg.tail_buffer,
                    "censor window for regenerations (-1: 10% of steps)");
  speed->add_option("--dump-walk", cfg.dump_walk, "write one trajectory CSV here");

  CLI::App* beta = app.add_subcommand("beta", "sample escape probabilities");
  add_common_options(beta, cfg);
  beta->add_option("--samples", cfg.samples, "number of beta draws");
  beta->add_option("--beta-tol", cfg.beta_tol, "escape probability tolerance")
      ->check(CLI::PositiveNumber);
  beta->add_option("--bins", cfg.bins, "histogram bins")->check(CLI::PositiveNumber);

  CLI::App* verify = app.add_subcommand("verify", "run the identity checks");
  add_common_options(verify, cfg);
  verify->add_option("--check", cfg.check,
                     "lemma31|lemma43|lemma21|prop32|green|envdist|all")
      ->check(CLI::IsMember(
          {"lemma31", "lemma43", "lemma21", "prop32", "green", "envdist", "all"}));
  verify->add_option("--budget", cfg.budget, "enumeration budget");
  verify->add_option("--samples", cfg.samples, "statistical check sample count");
  verify->add_option("--tree", cfg.tree_file, "fixture tree file (one word per line)");
  verify->add_option("--word", cfg.word, "fixture vertex for --tree");

  CLI::App* envdist = app.add_subcommand(
      "envdist", "environment-at-the-walker degree law, simulated vs predicted");
  add_common_options(envdist, cfg);
  envdist->add_option("--steps", cfg.steps, "walk horizon per replica");
  envdist->add_option("--replicas", cfg.replicas, "independent replicas");
  envdist->add_option("--samples", cfg.samples, "importance sampling draws");
  envdist->add_option("--beta-tol", cfg.beta_tol, "escape probability tolerance")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    json doc;
    int code = 0;
    if (speed->parsed()) {
      cfg.command = "speed";
      doc = run_speed(cfg);
    } else if (beta->parsed()) {
      cfg.command = "beta";
      doc = run_beta(cfg);
    } else if (verify->parsed()) {
      cfg.command = "verify";
      bool all_passed = false;
      doc = run_verify(cfg, all_passed);
      code = all_passed ? 0 : 1;
    } else {
      cfg.command = "envdist";
      doc = run_envdist(cfg);
    }
    emit(cfg, std::move(doc), out);
    return code;
  } catch (const RegimeError& e) {
    json ej{{"error",
             {{"code", e.code()}, {"kind", e.kind_name()}, {"message", e.what()}}}};
    out << ej.dump(2) << "\n";
    return 2;
  } catch (const SimError& e) {
    json ej{{"error", {{"code", e.code()}, {"message", e.what()}}}};
    out << ej.dump(2) << "\n";
    return 2;
  }
}

}  // namespace gws::cli
