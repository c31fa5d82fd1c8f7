#pragma once

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "jointida/asymptotics.hpp"
#include "jointida/io.hpp"
#include "jointida/learn.hpp"
#include "jointida/opin.hpp"
#include "jointida/parentsets.hpp"
#include "jointida/pipeline.hpp"
#include "jointida/sem.hpp"
#include "jointida/validation.hpp"

namespace jointida::cli {

enum ExitCode { ok = 0, bad_config = 2, numerical_failure = 3, validation_failure = 4 };

struct RunConfig {
  std::string command;
  std::string graph_path;
  std::string data_path;
  std::string cov = "sample";  // effects: "true" (from the SEM in --graph) or "sample" (from --data)
  std::string output_path;     // stdout when empty
  std::string graph_output_path;
  std::string sem_output_path;
  double alpha = 0.01;
  Method method = Method::rrc;
  CorrKind corr_kind = CorrKind::pearson;
  std::vector<Node> targets;
  Node response = 0;
  std::size_t max_enum = 12;
  std::uint64_t seed = 1;
  long n = 1000;
  int p = 0;  // simulate without --graph: random SEM size
  double degree = 2.0;
  std::string transform = "identity";
  std::string format = "json";
  unsigned threads = 1;
  std::string suite = "quick";
  std::string parents;  // "5;3,4" = PA of first target {5}, of second {3,4}
  bool variance = false;

  void validate() const {
    if (!(alpha > 0 && alpha < 1)) throw InvalidInput("config", "alpha must lie in (0,1)");
    if (format != "json" && format != "tsv") throw InvalidInput("config", "format must be json or tsv");
    if (cov != "true" && cov != "sample") throw InvalidInput("config", "cov must be 'true' or 'sample'");
    if (command == "effects" || command == "jointida") {
      if (targets.empty()) throw InvalidInput("config", "--targets is required");
      if (response <= 0) throw InvalidInput("config", "--response is required");
      if (make_node_set(targets).size() != targets.size()) throw InvalidInput("config", "targets must be distinct");
      for (Node t : targets)
        if (t == response) throw InvalidInput("config", "response must not be one of the targets");
    }
  }
};

namespace detail {

inline std::vector<NodeSet> parse_parent_tuple(const std::string& s, std::size_t k) {
  std::vector<NodeSet> out;
  std::string part;
  std::istringstream is(s);
  while (std::getline(is, part, ';')) {
    std::vector<Node> nodes;
    std::string item;
    std::istringstream ps(part);
    while (std::getline(ps, item, ',')) {
      if (item.find_first_not_of(" \t") == std::string::npos) continue;
      nodes.push_back(jointida::detail::parse_int(item, "config", 0));
    }
    out.push_back(make_node_set(nodes));
  }
  if (!s.empty() && s.back() == ';') out.emplace_back();
  if (out.size() != k)
    throw InvalidInput("config", "--parents needs one ';'-separated set per target (" + std::to_string(k) + ")");
  return out;
}

inline std::ifstream open_input(const std::string& path, const std::string& what) {
  if (path.empty()) throw InvalidInput("config", what + " is required");
  std::ifstream in(path);
  if (!in) throw InvalidInput("config", "cannot open " + path);
  return in;
}

inline GraphSpec load_graph(const std::string& path) {
  auto in = open_input(path, "--graph");
  return read_graph(in);
}

inline DataMatrix load_data(const std::string& path) {
  auto in = open_input(path, "--data");
  return read_csv(in);
}

inline void check_nodes(int p, const RunConfig& cfg) {
  jointida::detail::check_targets(p, cfg.targets, cfg.response, "config");
}

// Writes to the output path or to `out`.
inline void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
  if (cfg.output_path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(cfg.output_path);
  if (!f) throw InvalidInput("config", "cannot write " + cfg.output_path);
  f << text;
}

inline std::string tuple_text(const std::vector<NodeSet>& tuple) {
  std::string s;
  for (std::size_t k = 0; k < tuple.size(); ++k) {
    if (k) s += ';';
    for (std::size_t q = 0; q < tuple[k].size(); ++q) s += (q ? "," : "") + std::to_string(tuple[k][q]);
  }
  return s;
}

inline std::string tsv(const EffectMultiset& m) {
  std::ostringstream os;
  os << "parent_sets\tmultiplicity";
  for (Node t : m.targets) os << "\ttheta_" << t;
  os << '\n';
  for (const auto& e : m.entries) {
    os << tuple_text(e.parent_sets) << '\t' << e.multiplicity;
    for (double v : e.values) os << '\t' << format_double(v);
    os << '\n';
  }
  return os.str();
}

inline Transform parse_transform(const std::string& s) {
  if (s == "identity") return {TransformKind::identity, {}, {}};
  if (s == "cubic") return {TransformKind::cubic, {}, {}};
  if (s == "exp") return {TransformKind::exp, {}, {}};
  if (s == "logistic") return {TransformKind::logistic, {}, {}};
  throw InvalidInput("config", "unknown transform '" + s + "' (expected identity, cubic, exp or logistic)");
}

inline int simulate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.n <= 0) throw InvalidInput("config", "--n must be positive");
  LinearSem sem;
  if (!cfg.graph_path.empty())
    sem = load_graph(cfg.graph_path).sem();
  else if (cfg.p > 0)
    sem = random_linear_sem(cfg.p, cfg.degree, cfg.seed);
  else
    throw InvalidInput("config", "simulate needs --graph or --p");
  DataMatrix x;
  if (cfg.transform == "identity") {
    x = sample(sem, cfg.n, cfg.seed);
  } else {
    sem = standardize(sem);
    const std::vector<Transform> tr(static_cast<std::size_t>(sem.num_nodes()), parse_transform(cfg.transform));
    x = npn_sample(NpnModel(sem, tr), cfg.n, cfg.seed);
  }
  if (!cfg.sem_output_path.empty()) {
    std::ofstream f(cfg.sem_output_path);
    if (!f) throw InvalidInput("config", "cannot write " + cfg.sem_output_path);
    write_sem(f, sem);
  }
  std::ostringstream os;
  write_csv(os, x);
  emit(cfg, out, os.str());
  return ok;
}

inline std::string graph_document(const Pdag& g, double alpha, Eigen::Index n, bool clipped) {
  std::ostringstream os;
  os << "# " << graph_metadata(alpha, n, clipped).dump() << '\n';
  write_graph(os, g);
  return os.str();
}

inline int learn(const RunConfig& cfg, std::ostream& out) {
  const DataMatrix x = load_data(cfg.data_path);
  CovMatrix s;
  bool clipped = false;
  if (cfg.corr_kind == CorrKind::pearson) {
    s = sample_covariance(x);
  } else {
    auto r = rank_correlation_matrix(x, cfg.corr_kind);
    s = std::move(r.corr);
    clipped = r.clipped;
  }
  CiTestConfig ci;
  ci.alpha = cfg.alpha;
  emit(cfg, out, graph_document(pc_cpdag(s, x.rows(), ci), cfg.alpha, x.rows(), clipped));
  return ok;
}

inline int effects(const RunConfig& cfg, std::ostream& out) {
  std::unique_ptr<GraphSpec> graph;
  if (!cfg.graph_path.empty()) graph = std::make_unique<GraphSpec>(load_graph(cfg.graph_path));
  DataMatrix data;
  CovMatrix s;
  if (cfg.cov == "true") {
    if (!graph) throw InvalidInput("config", "--cov true needs a weighted DAG in --graph");
    s = true_covariance(graph->sem());
  } else {
    data = load_data(cfg.data_path);
    s = sample_covariance(data);
  }
  const int p = static_cast<int>(s.size());
  if (graph && graph->p != p) throw InvalidInput("config", "graph and data disagree on the number of variables");
  check_nodes(p, cfg);
  if (cfg.variance && cfg.cov == "true") throw InvalidInput("config", "--variance needs --data");

  ParentMultiset pa{cfg.targets, {}, false};
  if (!cfg.parents.empty()) {
    pa.add(parse_parent_tuple(cfg.parents, cfg.targets.size()));
  } else if (graph && graph->undirected.empty()) {
    const Pdag g = graph->pdag();
    std::vector<NodeSet> tuple;
    for (Node t : cfg.targets) tuple.push_back(g.parents(t));
    pa.add(tuple);
  } else if (graph) {
    pa = jointly_valid_parent_sets(graph->pdag(), cfg.targets, cfg.max_enum);
  } else {
    throw InvalidInput("config", "effects needs --parents or --graph");
  }

  if (cfg.variance) {
    if (pa.distinct() != 1) throw InvalidInput("config", "--variance needs a single parent tuple");
    const auto tuple = pa.entries.begin()->first;
    const auto r = asymptotic_variance(data, cfg.method, ParentAssignment(cfg.targets, tuple), cfg.response);
    if (cfg.format == "tsv") {
      std::ostringstream os;
      os << "target\testimate";
      for (Node t : cfg.targets) os << "\tcov_" << t;
      os << '\n';
      for (std::size_t q = 0; q < cfg.targets.size(); ++q) {
        os << cfg.targets[q] << '\t' << format_double(r.estimate.values[q]);
        for (Eigen::Index b = 0; b < r.limit_covariance.cols(); ++b)
          os << '\t' << format_double(r.limit_covariance(static_cast<Eigen::Index>(q), b));
        os << '\n';
      }
      emit(cfg, out, os.str());
    } else {
      emit(cfg, out, to_json(r, cfg.method, tuple).dump(2) + "\n");
    }
    return ok;
  }

  const EffectMultiset m = effects_from_parents(s, pa, cfg.response, cfg.method, cfg.threads);
  if (cfg.format == "tsv") {
    emit(cfg, out, tsv(m));
  } else if (m.entries.size() == 1 && m.entries[0].multiplicity == 1 && !m.superset) {
    const auto& e = m.entries[0];
    emit(cfg, out, to_json(EffectVector{cfg.targets, cfg.response, e.values}, cfg.method, e.parent_sets).dump(2) + "\n");
  } else {
    json doc = {{"targets", m.targets}, {"response", m.response}, {"method", to_string(m.method)},
                {"multiset", to_json(m)}, {"superset", m.superset}};
    emit(cfg, out, doc.dump(2) + "\n");
  }
  return ok;
}

inline int joint_ida_command(const RunConfig& cfg, std::ostream& out) {
  const DataMatrix x = load_data(cfg.data_path);
  check_nodes(static_cast<int>(x.cols()), cfg);
  JointIdaConfig jc;
  jc.method = cfg.method;
  jc.ci.alpha = cfg.alpha;
  jc.corr_kind = cfg.corr_kind;
  jc.max_enum = cfg.max_enum;
  jc.threads = cfg.threads;
  const JointIdaResult r = joint_ida(x, cfg.targets, cfg.response, jc);
  if (!cfg.graph_output_path.empty()) {
    std::ofstream f(cfg.graph_output_path);
    if (!f) throw InvalidInput("config", "cannot write " + cfg.graph_output_path);
    f << graph_document(r.graph, cfg.alpha, r.n, r.clipped);
  }
  if (cfg.format == "tsv") {
    emit(cfg, out, tsv(r.effects));
  } else {
    json doc = joint_ida_document(r.effects, cfg.corr_kind, cfg.alpha, cfg.graph_output_path);
    doc["graph"] = graph_metadata(cfg.alpha, r.n, r.clipped);
    emit(cfg, out, doc.dump(2) + "\n");
  }
  return ok;
}

inline int validate_command(const RunConfig& cfg, std::ostream& out) {
  const auto suite = validation::parse_suite(cfg.suite);
  const bool tsv_out = cfg.format == "tsv";
  if (tsv_out) out << "id\tname\tresult\tseconds\tdetail\n";
  int failed = 0;
  validation::run_suite(suite, cfg.threads, [&](const validation::CriterionResult& r) {
    failed += !r.passed;
    if (tsv_out)
      out << r.id << '\t' << r.name << '\t' << (r.passed ? "pass" : "fail") << '\t' << std::fixed << std::setprecision(2)
          << r.seconds << '\t' << r.detail << '\n';
    else
      out << std::setw(3) << r.id << "  " << std::left << std::setw(48) << r.name << std::right << "  "
          << (r.passed ? "PASS" : "FAIL") << "  " << std::fixed << std::setprecision(1) << std::setw(7) << r.seconds
          << "s  " << r.detail << '\n';
    out << std::defaultfloat << std::flush;
  });
  if (!tsv_out) out << (failed ? std::to_string(failed) + " check(s) failed\n" : "all checks passed\n");
  return failed ? validation_failure : ok;
}

}  // namespace detail

/// Executes one command. Errors are reported on `err` with their stage;
/// the return value is the process exit code.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    if (cfg.command == "simulate") return detail::simulate(cfg, out);
    if (cfg.command == "learn") return detail::learn(cfg, out);
    if (cfg.command == "effects") return detail::effects(cfg, out);
    if (cfg.command == "jointida") return detail::joint_ida_command(cfg, out);
    if (cfg.command == "validate") return detail::validate_command(cfg, out);
    throw InvalidInput("config", "unknown command '" + cfg.command + "'");
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return numerical_failure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return bad_config;
  }
}

/// Parses the command line into a RunConfig and runs it.
inline int main_with(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"joint intervention effects in linear SEMs"};
  app.require_subcommand(1);
  RunConfig cfg;
  std::string method = "rrc", corr = "pearson", targets;

  auto add_common = [&](CLI::App* c) {
    c->add_option("-o,--output", cfg.output_path, "output file (default stdout)");
    c->add_option("--threads", cfg.threads, "worker threads, 0 = all cores");
  };
  auto add_estimation = [&](CLI::App* c) {
    c->add_option("--targets", targets, "comma-separated intervention nodes")->required();
    c->add_option("--response", cfg.response, "response node")->required();
    c->add_option("--method", method, "rrc or mcd");
    c->add_option("--format", cfg.format, "json or tsv");
    c->add_option("--max-enum", cfg.max_enum, "largest undirected component enumerated exactly");
  };

  auto* sim = app.add_subcommand("simulate", "draw data from a linear SEM");
  sim->add_option("--graph", cfg.graph_path, "weighted DAG file");
  sim->add_option("--p", cfg.p, "size of a random SEM when no graph is given");
  sim->add_option("--degree", cfg.degree, "expected degree of the random SEM");
  sim->add_option("--n", cfg.n, "sample size");
  sim->add_option("--seed", cfg.seed, "random seed");
  sim->add_option("--transform", cfg.transform, "identity, cubic, exp or logistic");
  sim->add_option("--sem-output", cfg.sem_output_path, "write the SEM in graph format");
  add_common(sim);

  auto* lrn = app.add_subcommand("learn", "estimate a CPDAG");
  lrn->add_option("--data", cfg.data_path, "CSV file")->required();
  lrn->add_option("--alpha", cfg.alpha, "CI test level");
  lrn->add_option("--corr", corr, "pearson, spearman or kendall");
  add_common(lrn);

  auto* eff = app.add_subcommand("effects", "OPIN estimates from given parent sets or a graph");
  eff->add_option("--graph", cfg.graph_path, "DAG or CPDAG file");
  eff->add_option("--data", cfg.data_path, "CSV file");
  eff->add_option("--cov", cfg.cov, "true or sample");
  eff->add_option("--parents", cfg.parents, "parent sets per target, e.g. \"5;3,4\"");
  eff->add_flag("--variance", cfg.variance, "add the delta-method limit covariance");
  add_estimation(eff);
  add_common(eff);

  auto* jida = app.add_subcommand("jointida", "end-to-end estimation from data");
  jida->add_option("--data", cfg.data_path, "CSV file")->required();
  jida->add_option("--alpha", cfg.alpha, "CI test level");
  jida->add_option("--corr", corr, "pearson, spearman or kendall");
  jida->add_option("--graph-output", cfg.graph_output_path, "write the learned CPDAG");
  add_estimation(jida);
  add_common(jida);

  auto* val = app.add_subcommand("validate", "run the built-in checks");
  val->add_option("--suite", cfg.suite, "paper-examples, quick or full");
  val->add_option("--format", cfg.format, "table (json) or tsv");
  val->add_option("--threads", cfg.threads, "worker threads, 0 = all cores");

  std::vector<const char*> argv{"jointida"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : bad_config;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  try {
    cfg.method = parse_method(method);
    cfg.corr_kind = parse_corr_kind(corr);
    if (!targets.empty()) {
      std::istringstream is(targets);
      std::string item;
      while (std::getline(is, item, ',')) cfg.targets.push_back(jointida::detail::parse_int(item, "config", 0));
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return bad_config;
  }
  return run(cfg, out, err);
}

}  // namespace jointida::cli
