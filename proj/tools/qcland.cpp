// qcland — command-line front end for the quantum-control landscape library.
//
// Subcommands:
//   run       gradient-flow search batch from a JSON config
//   sweep     batches along one swept parameter axis
//   topology  enumerate and classify the critical submanifolds of a landscape
//   distance  critical distances of a given final-time unitary
//
// Exit codes: 0 success, 2 bad config or arguments, 3 enumeration over the
// table cap, 4 (run only) no run converged.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qcl/distance.hpp"
#include "qcl/harness.hpp"
#include "qcl/topology.hpp"

namespace {

std::vector<double> parse_csv_doubles(const std::string& text, const char* what) {
  std::vector<double> out;
  std::string token;
  std::stringstream stream(text);
  while (std::getline(stream, token, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(token, &used);
      while (used < token.size() && std::isspace(static_cast<unsigned char>(token[used]))) ++used;
      if (used != token.size()) throw std::invalid_argument("trailing characters");
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string(what) + ": cannot parse '" + token + "' as a number");
    }
  }
  if (out.empty()) throw std::invalid_argument(std::string(what) + ": no values given");
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file: " + path);
  return nlohmann::json::parse(in);
}

// 2 N^2 whitespace/comma separated doubles, row-major interleaved re,im
Eigen::MatrixXcd load_unitary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read unitary file: " + path);
  std::vector<double> vals;
  std::string token;
  while (in >> token) {
    std::stringstream cell(token);
    std::string piece;
    while (std::getline(cell, piece, ',')) {
      if (piece.empty()) continue;
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(piece, &used));
        if (used != piece.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw std::invalid_argument("unitary file: cannot parse '" + piece + "' as a number");
      }
    }
  }
  const auto count = vals.size();
  const int n = static_cast<int>(std::lround(std::sqrt(count / 2.0)));
  if (count == 0 || static_cast<std::size_t>(n) * n * 2 != count)
    throw std::invalid_argument(
        "unitary file must hold 2 N^2 numbers (row-major, interleaved re,im)");
  Eigen::MatrixXcd u(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t base = 2 * (static_cast<std::size_t>(i) * n + j);
      u(i, j) = std::complex<double>(vals[base], vals[base + 1]);
    }
  return u;
}

void print_tables_human(const std::vector<qcl::ContingencyTable>& tables,
                        const std::vector<double>* distances) {
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& t = tables[i];
    std::printf("#%-6d %-7s J=%-22.17g", t.index, qcl::table_class_name(t.classification).c_str(),
                t.value);
    if (distances) std::printf(" D=%-22.17g", (*distances)[i]);
    std::printf("[");
    for (int j = 0; j < t.rows; ++j) {
      for (int k = 0; k < t.cols; ++k) std::printf(k + 1 == t.cols ? "%d" : "%d ", t.at(j, k));
      std::printf(j + 1 == t.rows ? "]" : "; ");
    }
    if (t.tied_extreme) std::printf("  (value ties an extreme)");
    std::printf("\n");
  }
}

struct RunArgs {
  std::string config;
  std::string out;
  int workers = 1;
};

struct SweepArgs : RunArgs {
  std::string axis;
  std::string values;
};

struct TopologyArgs {
  std::string rho;
  std::string theta;
  double tol = 1e-9;
  bool json = false;
};

struct DistanceArgs : TopologyArgs {
  std::string unitary;
};

int do_run(const RunArgs& args) {
  const qcl::CaseSpec spec = qcl::case_spec_from_json(load_config(args.config));
  const qcl::BatchSummary summary = qcl::run_batch(spec, args.out, args.workers);
  std::cout << qcl::batch_summary_to_json(summary).dump(2) << "\n";
  return summary.n_converged == 0 ? 4 : 0;
}

int do_sweep(const SweepArgs& args) {
  const qcl::CaseSpec base = qcl::case_spec_from_json(load_config(args.config));
  const std::vector<double> values = parse_csv_doubles(args.values, "--values");
  const qcl::SweepResult result = qcl::run_sweep(base, args.axis, values, args.out, args.workers);
  std::cout << qcl::sweep_result_to_json(result).dump(2) << "\n";
  return 0;
}

int do_topology(const TopologyArgs& args) {
  const Eigen::VectorXd rho = to_vector(parse_csv_doubles(args.rho, "--rho"));
  const Eigen::VectorXd theta = to_vector(parse_csv_doubles(args.theta, "--theta"));
  if (rho.size() != theta.size())
    throw std::invalid_argument("--rho and --theta must have the same length");
  const qcl::DiagonalSpectrum rho_spec = qcl::spectrum_from_diagonal(rho, args.tol);
  const qcl::DiagonalSpectrum theta_spec = qcl::spectrum_from_diagonal(theta, args.tol);
  std::vector<qcl::ContingencyTable> tables = qcl::enumerate_tables(rho_spec, theta_spec);
  qcl::classify_tables(tables, rho_spec, theta_spec);
  const auto [j_max, j_min] = qcl::objective_range(rho, theta);
  // pairwise distances only for landscapes small enough to print whole
  const bool with_pairs = tables.size() <= 64;
  if (args.json) {
    nlohmann::json j;
    j["count"] = tables.size();
    j["j_max"] = j_max;
    j["j_min"] = j_min;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : tables) arr.push_back(qcl::table_to_json(t));
    j["tables"] = std::move(arr);
    if (with_pairs) {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& a : tables) {
        nlohmann::json row = nlohmann::json::array();
        for (const auto& b : tables) row.push_back(qcl::table_distance(a, b));
        rows.push_back(std::move(row));
      }
      j["pairwise_distances"] = std::move(rows);
    }
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("%zu critical submanifolds, J in [%.17g, %.17g]\n", tables.size(), j_min, j_max);
    print_tables_human(tables, nullptr);
    if (with_pairs && tables.size() > 1) {
      std::printf("pairwise table distances:\n");
      for (std::size_t i = 0; i < tables.size(); ++i)
        for (std::size_t k = i + 1; k < tables.size(); ++k)
          std::printf("  D(#%zu, #%zu) = %d\n", i + 1, k + 1,
                      qcl::table_distance(tables[i], tables[k]));
    }
  }
  return 0;
}

int do_distance(const DistanceArgs& args) {
  const Eigen::VectorXd rho = to_vector(parse_csv_doubles(args.rho, "--rho"));
  const Eigen::VectorXd theta = to_vector(parse_csv_doubles(args.theta, "--theta"));
  const Eigen::MatrixXcd unitary = load_unitary(args.unitary);
  if (rho.size() != theta.size() || rho.size() != unitary.rows())
    throw std::invalid_argument("--rho, --theta, and the unitary must share one dimension");
  const qcl::DiagonalSpectrum rho_spec = qcl::spectrum_from_diagonal(rho, args.tol);
  const qcl::DiagonalSpectrum theta_spec = qcl::spectrum_from_diagonal(theta, args.tol);
  std::vector<qcl::ContingencyTable> tables = qcl::enumerate_tables(rho_spec, theta_spec);
  qcl::classify_tables(tables, rho_spec, theta_spec);
  const Eigen::MatrixXcd sorted =
      qcl::to_sorted_frame(unitary, qcl::descending_order(theta), qcl::descending_order(rho));
  const std::vector<double> dist =
      qcl::all_distances(qcl::block_singular_values(sorted, rho_spec, theta_spec), tables);
  if (args.json) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < tables.size(); ++i) {
      nlohmann::json j = qcl::table_to_json(tables[i]);
      j["distance"] = dist[i];
      arr.push_back(std::move(j));
    }
    std::cout << arr.dump(2) << "\n";
  } else {
    print_tables_human(tables, &dist);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum-control landscape toolkit"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "run a batch of gradient-flow searches");
  run_cmd->add_option("--config", run_args.config, "JSON config file")->required();
  run_cmd->add_option("--out", run_args.out, "directory for config/summary/trace artifacts");
  run_cmd->add_option("--workers", run_args.workers, "worker threads, 0 = hardware concurrency");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "run batches along one parameter axis");
  sweep_cmd->add_option("--config", sweep_args.config, "JSON config file for the base case")
      ->required();
  sweep_cmd->add_option("--axis", sweep_args.axis, "d | F0 | N | tau | observable")->required();
  sweep_cmd->add_option("--values", sweep_args.values, "comma-separated axis values")->required();
  sweep_cmd->add_option("--out", sweep_args.out, "directory for per-batch artifacts");
  sweep_cmd->add_option("--workers", sweep_args.workers, "worker threads, 0 = hardware");

  TopologyArgs topo_args;
  auto* topo_cmd = app.add_subcommand("topology", "enumerate critical submanifolds");
  topo_cmd->add_option("--rho", topo_args.rho, "comma-separated rho0 diagonal")->required();
  topo_cmd->add_option("--theta", topo_args.theta, "comma-separated theta diagonal")->required();
  topo_cmd->add_option("--tol", topo_args.tol, "eigenvalue grouping tolerance");
  topo_cmd->add_flag("--json", topo_args.json, "JSON output");

  DistanceArgs dist_args;
  auto* dist_cmd = app.add_subcommand("distance", "critical distances of a final-time unitary");
  dist_cmd->add_option("--unitary", dist_args.unitary,
                       "file of 2 N^2 numbers, row-major interleaved re,im")
      ->required();
  dist_cmd->add_option("--rho", dist_args.rho, "comma-separated rho0 diagonal")->required();
  dist_cmd->add_option("--theta", dist_args.theta, "comma-separated theta diagonal")->required();
  dist_cmd->add_option("--tol", dist_args.tol, "eigenvalue grouping tolerance");
  dist_cmd->add_flag("--json", dist_args.json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run_cmd->parsed()) return do_run(run_args);
    if (sweep_cmd->parsed()) return do_sweep(sweep_args);
    if (topo_cmd->parsed()) return do_topology(topo_args);
    return do_distance(dist_args);
  } catch (const qcl::TableCapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
