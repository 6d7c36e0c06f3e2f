#include "cotd/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include "CLI11.hpp"
#include "json.hpp"

#include "cotd/intrinsic_dim.hpp"
#include "cotd/learner.hpp"
#include "cotd/random.hpp"
#include "cotd/stats.hpp"
#include "cotd/taskgen.hpp"
#include "cotd/theory.hpp"
#include "cotd/trie.hpp"

namespace cotd::cli {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

/// Writes files under one directory, each prefixed by the run header.
class Output {
 public:
  Output(fs::path dir, std::string_view command, std::uint64_t seed, const ordered_json& config)
      : dir_(std::move(dir)) {
    const auto text = config.dump();
    header_ = fmt::format("# cotd {}\n# seed: {}\n# config_hash: {:016x}\n# config: {}\n", command,
                          seed, fnv1a64(text), text);
  }

  template <typename Fn>
  void write(const std::string& name, Fn&& body) {
    fs::create_directories(dir_);
    std::ostringstream ss;
    ss << header_;
    body(ss);
    const auto path = dir_ / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << ss.str();
    if (!f) throw std::runtime_error("failed writing " + path.string());
    written_.push_back(path.string());
  }

  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  std::string header_;
  std::vector<std::string> written_;
};

// "lo:hi:step" or a single value.
std::vector<double> parse_range(const std::string& text, const std::string& flag) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    require(!item.empty() && used == item.size() && std::isfinite(v),
            flag + ": bad number '" + item + "'");
    parts.push_back(v);
  }
  if (parts.size() == 1) return parts;
  require(parts.size() == 3, flag + " must be 'lo:hi:step' or a single value");
  require(parts[2] > 0.0 && parts[1] >= parts[0], flag + " needs lo <= hi and step > 0");
  require((parts[1] - parts[0]) / parts[2] < 1e6, flag + " has too many points");
  return theory::linear_range(parts[0], parts[1], parts[2]);
}

ordered_json list_json(const std::vector<std::size_t>& v) { return ordered_json(v); }

// -- theory-grid -------------------------------------------------------------

struct TheoryGridArgs {
  std::string kind = "reasoning";
  double d = 3.0;
  double prefactor = 1e-12;
  std::string m_range = "1:10:0.25";
  std::string n_range = "1:10:0.25";
  std::string r_range = "1:4:0.25";
  double n = 3.0;
  double task_size = 1e6;
};

void run_theory_grid(const TheoryGridArgs& a, const fs::path& dir, std::uint64_t seed,
                     std::ostream& out) {
  require(a.d > 0.0 && std::isfinite(a.d), "--d must be positive");
  require(a.prefactor > 0.0 && std::isfinite(a.prefactor), "--prefactor must be positive");
  const bool reasoning = a.kind == "reasoning";
  const auto m_axis = parse_range(a.m_range, "--m-range");
  require(m_axis.front() >= 1.0, "--m-range values must be >= 1");
  const auto second = reasoning ? parse_range(a.n_range, "--n-range") : parse_range(a.r_range, "--r-range");
  require(second.front() >= 1.0, reasoning ? "--n-range values must be >= 1" : "--r-range values must be >= 1");
  if (!reasoning) require(a.n >= 1.0, "--n must be >= 1");
  if (reasoning) require(a.task_size > 1.0, "--task-size must be > 1");

  const theory::ErrorModelParams params(a.d, a.prefactor);
  const auto grid = reasoning ? theory::reasoning_gain_grid(m_axis, second, params)
                              : theory::thinking_gain_grid(m_axis, second, a.n, params);

  ordered_json config{{"kind", a.kind}, {"d", a.d}, {"prefactor", a.prefactor}, {"m-range", a.m_range}};
  if (reasoning) {
    config["n-range"] = a.n_range;
    config["task-size"] = a.task_size;
  } else {
    config["r-range"] = a.r_range;
    config["n"] = a.n;
  }
  Output files(dir, "theory-grid", seed, config);
  const auto axis = grid.second_axis_name();
  files.write("gain_grid.csv", [&](std::ostream& os) {
    os << "m," << axis << ",gain\n";
    for (std::size_t i = 0; i < grid.m_axis.size(); ++i) {
      for (std::size_t j = 0; j < grid.second_axis.size(); ++j) {
        os << num(grid.m_axis[i]) << ',' << num(grid.second_axis[j]) << ',' << num(grid.at(i, j)) << '\n';
      }
    }
  });
  files.write("zero_boundary.csv", [&](std::ostream& os) {
    os << "m," << axis << '\n';
    for (const auto& p : theory::zero_gain_boundary(grid, a.d)) os << num(p.m) << ',' << num(p.value) << '\n';
  });
  files.write("optimal_curve.csv", [&](std::ostream& os) {
    os << "m," << axis << '\n';
    for (const auto& p : theory::optimal_curve(grid, a.d)) os << num(p.m) << ',' << num(p.value) << '\n';
  });
  if (reasoning) {
    const double lo = m_axis.front(), hi = m_axis.back();
    files.write("fixed_size_gain.csv", [&](std::ostream& os) {
      os << "m,depth,gain\n";
      for (double m : m_axis) {
        if (m <= 1.0) continue;
        os << num(m) << ',' << num(std::log(a.task_size) / std::log(m)) << ','
           << num(theory::constant_degree_gain(a.task_size, m, params)) << '\n';
      }
    });
    if (hi > lo && hi > 1.0) {
      const double argmax = theory::argmax_constant_degree(a.task_size, params, std::max(lo, 1.01), hi, 0.01);
      files.write("fixed_size_argmax.csv", [&](std::ostream& os) {
        os << "task_size,d,argmax_m,optimal_degree\n";
        os << num(a.task_size) << ',' << num(a.d) << ',' << num(argmax) << ','
           << num(theory::optimal_degree(a.d)) << '\n';
      });
    }
  }
  for (const auto& f : files.written()) out << f << '\n';
}

// -- best-profile ------------------------------------------------------------

struct BestProfileArgs {
  std::uint64_t task_size = 64;
  double d = 2.0;
  std::string search = "factorizations";
  std::uint64_t max_factorizations = 10'000'000;
};

void run_best_profile(const BestProfileArgs& a, const fs::path& dir, std::uint64_t seed,
                      std::ostream& out) {
  require(a.task_size >= 2, "--task-size must be >= 2");
  require(a.d > 0.0 && std::isfinite(a.d), "--d must be positive");
  const auto mode = a.search == "constant" ? theory::ProfileSearch::constant_degree
                                           : theory::ProfileSearch::factorizations;
  const auto best = theory::best_profile(a.task_size, a.d, mode, a.max_factorizations);
  ordered_json config{{"task-size", a.task_size}, {"d", a.d}, {"search", a.search},
                      {"max-factorizations", a.max_factorizations}};
  Output files(dir, "best-profile", seed, config);
  files.write("best_profile.csv", [&](std::ostream& os) {
    os << "task_size,d,search,degrees,cost,depth\n";
    std::string degrees;
    for (std::size_t i = 0; i < best.degrees.size(); ++i) degrees += (i ? "x" : "") + std::to_string(best.degrees[i]);
    os << a.task_size << ',' << num(a.d) << ',' << a.search << ',' << degrees << ',' << num(best.cost) << ','
       << best.degrees.size() << '\n';
  });
  for (const auto& f : files.written()) out << f << '\n';
}

// -- taskgen -----------------------------------------------------------------

struct TaskgenArgs {
  std::uint32_t m = 2;
  std::uint32_t n = 2;
  std::optional<std::uint32_t> structure_k;
  std::string mode = "reasoning";
  std::optional<double> r;
  std::optional<std::size_t> count;
  std::size_t context_dim = 10;
};

void run_taskgen(const TaskgenArgs& a, const fs::path& dir, std::uint64_t seed, std::ostream& out) {
  using namespace cotd::taskgen;
  const Mode mode = parse_mode(a.mode);
  require(a.m >= 1, "--m must be >= 1");
  require(a.n >= 1, "--n must be >= 1");
  require(a.context_dim >= 1, "--context-dim must be >= 1");
  const std::uint32_t k = a.structure_k.value_or(a.n);
  require(k >= 1 && k <= a.n, "--structure-k must lie in [1, n]");
  require(!a.count || *a.count >= 1, "--count must be >= 1");
  require(!a.r || mode == Mode::thinking, "--r is only valid with --mode thinking");
  if (mode == Mode::thinking) {
    require(a.r.has_value(), "--mode thinking needs --r");
    require(k == a.n, "--mode thinking needs a balanced tree (--structure-k = n)");
    try {
      augmented_depth(*a.r, a.n);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--r: ") + e.what());
    }
  }
  Degrees profile;
  try {
    profile = structure_profile(a.m, a.n, k);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const std::size_t count = a.count.value_or(
      mode == Mode::thinking ? kDefaultThinkingDatasetSize : default_reasoning_dataset_size(a.n));

  ordered_json config{{"m", a.m}, {"n", a.n}, {"structure-k", k}, {"mode", a.mode}};
  if (a.r) config["r"] = *a.r;
  config["count"] = count;
  config["context-dim"] = a.context_dim;

  const auto tree = ReasoningTree::generate(profile, a.context_dim, derive_seed(seed, "cli.taskgen.tree"));
  Output files(dir, "taskgen", seed, config);
  files.write("tree.txt", [&](std::ostream& os) { write_tree(os, tree); });
  if (mode == Mode::thinking) {
    const auto aug = augment_tree(tree, *a.r, derive_seed(seed, "cli.taskgen.augment"));
    const auto report = verify_consistency(aug);
    if (!report.consistent) {
      const auto& c = *report.counterexample;
      throw std::runtime_error(fmt::format("augmented tree is inconsistent at deep leaf {} (root bit {})",
                                           aug.label(c.deep_leaf), c.root_bit));
    }
    files.write("augmented_tree.txt", [&](std::ostream& os) { write_augmented(os, aug); });
    const auto data = sample_thinking_dataset(aug, count, derive_seed(seed, "cli.taskgen.dataset"));
    files.write("dataset.jsonl", [&](std::ostream& os) { write_jsonl(os, data); });
  } else {
    const auto data = sample_dataset(tree, count, mode, derive_seed(seed, "cli.taskgen.dataset"));
    files.write("dataset.jsonl", [&](std::ostream& os) { write_jsonl(os, data); });
  }
  for (const auto& f : files.written()) out << f << '\n';
}

// -- scaling-sweep -----------------------------------------------------------

std::vector<std::size_t> default_m_list() {
  // 8 log-spaced values from 8 to 256.
  std::vector<std::size_t> ms;
  for (int i = 0; i < 8; ++i) ms.push_back(static_cast<std::size_t>(std::lround(8.0 * std::pow(32.0, i / 7.0))));
  return ms;
}

struct SweepArgs {
  std::vector<std::size_t> d_list{2, 4, 8};
  std::vector<std::size_t> m_list = default_m_list();
  std::vector<std::size_t> sample_counts{4096};
  std::size_t replicates = 10;
  std::size_t test_count = 2000;
  std::string decode = "greedy";
  bool kernel = false;
  std::optional<double> bandwidth;
  bool unbalanced = false;
  std::size_t max_cells = 100'000;
  bool cifar_fixture = false;
};

void run_cifar_fixture(const fs::path& dir, std::uint64_t seed, std::ostream& out) {
  const std::vector<double> ms{5, 10, 20, 25, 50, 100};
  std::vector<learner::Point2> pts;
  for (double m : ms) pts.push_back({m, 0.036 * std::pow(m, 0.31) + 0.02});
  const auto fit = learner::fit_power_law_free(pts);
  Output files(dir, "scaling-sweep", seed, ordered_json{{"cifar-fixture", true}});
  files.write("cifar_points.csv", [&](std::ostream& os) {
    os << "m,error\n";
    for (const auto& p : pts) os << num(p.x) << ',' << num(p.y) << '\n';
  });
  files.write("cifar_fit.csv", [&](std::ostream& os) { learner::write_fit_csv(os, std::span(&fit, 1)); });
  for (const auto& f : files.written()) out << f << '\n';
}

void run_scaling_sweep(const SweepArgs& a, const fs::path& dir, std::uint64_t seed, std::ostream& out,
                       std::ostream& err, int& status) {
  if (a.cifar_fixture) return run_cifar_fixture(dir, seed, out);
  require(!a.d_list.empty() && !a.m_list.empty() && !a.sample_counts.empty(), "sweep lists must be non-empty");
  for (auto d : a.d_list) require(d >= 2, "--d-list values must be >= 2");
  for (auto m : a.m_list) require(m >= 1, "--m-list values must be >= 1");
  for (auto n : a.sample_counts) {
    for (auto m : a.m_list) require(n >= m, "every --sample-counts value must be >= every m");
  }
  require(a.replicates >= 1, "--replicates must be >= 1");
  require(a.test_count >= 1, "--test-count must be >= 1");
  require(!a.bandwidth || (*a.bandwidth > 0.0 && a.kernel), "--bandwidth needs --kernel and must be positive");

  learner::SweepSpec spec;
  spec.d_list = a.d_list;
  spec.m_list = a.m_list;
  spec.sample_counts = a.sample_counts;
  spec.replicates = a.replicates;
  spec.test_count = a.test_count;
  spec.decode = learner::parse_decode(a.decode);
  spec.seed = seed;
  spec.options.balanced = !a.unbalanced;
  spec.options.kernel = a.kernel;
  spec.options.bandwidth = a.bandwidth;
  spec.max_cells = a.max_cells;
  const std::size_t cells = a.d_list.size() * a.m_list.size() * a.sample_counts.size() * a.replicates;
  require(cells <= a.max_cells, fmt::format("sweep has {} cells, limit is {} (--max-cells)", cells, a.max_cells));

  ordered_json config{{"d-list", list_json(a.d_list)},
                      {"m-list", list_json(a.m_list)},
                      {"sample-counts", list_json(a.sample_counts)},
                      {"replicates", a.replicates},
                      {"test-count", a.test_count},
                      {"decode", a.decode},
                      {"kernel", a.kernel},
                      {"unbalanced", a.unbalanced},
                      {"max-cells", a.max_cells}};
  if (a.bandwidth) config["bandwidth"] = *a.bandwidth;
  Output files(dir, "scaling-sweep", seed, config);

  const auto rows = learner::sweep(spec);
  files.write("sweep.csv", [&](std::ostream& os) { learner::write_sweep_csv(os, rows); });

  // Mean error per (d, D, m) cell over replicates.
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<double>> cell;
  for (const auto& r : rows) cell[{r.d, r.sample_count, r.m}].push_back(r.error);
  const auto mean_error = [&](std::size_t d, std::size_t n, std::size_t m) {
    return mean(cell.at({d, n, m}));
  };

  std::vector<std::size_t> ms = a.m_list;
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  std::vector<std::size_t> ns = a.sample_counts;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());

  if (ns.size() >= 2) {
    files.write("trend_D.csv", [&](std::ostream& os) {
      os << "d,m,spearman_error_vs_D\n";
      for (auto d : a.d_list) {
        for (auto m : ms) {
          std::vector<double> x, y;
          for (auto n : ns) {
            x.push_back(static_cast<double>(n));
            y.push_back(mean_error(d, n, m));
          }
          const auto rho = spearman(x, y);
          os << d << ',' << m << ',' << (rho ? num(*rho) : "undefined") << '\n';
        }
      }
    });
  }

  if (ms.size() < 3) {
    err << "power-law fit skipped: it needs at least 3 distinct m values\n";
    status = kExitRuntime;
    for (const auto& f : files.written()) out << f << '\n';
    return;
  }
  files.write("fits.csv", [&](std::ostream& os) {
    os << "a,b,exponent,d_estimate,residual,r2,d,D,exponent_mode,spearman_error_vs_m\n";
    for (auto d : a.d_list) {
      for (auto n : ns) {
        std::vector<learner::Point2> pts;
        std::vector<double> x, y;
        for (auto m : ms) {
          pts.push_back({static_cast<double>(m), mean_error(d, n, m)});
          x.push_back(static_cast<double>(m));
          y.push_back(pts.back().y);
        }
        const auto rho = spearman(x, y);
        const std::string rho_text = rho ? num(*rho) : "undefined";
        const auto emit = [&](const char* label, auto&& fitter) {
          try {
            const auto f = fitter();
            os << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", num(f.a), num(f.b), num(f.exponent),
                              num(f.d_estimate), num(f.residual), num(f.r2), d, n, label, rho_text);
          } catch (const std::invalid_argument& e) {
            err << fmt::format("fit d={} D={} ({}) failed: {}\n", d, n, label, e.what());
            status = kExitRuntime;
          }
        };
        emit("fixed", [&] { return learner::fit_power_law_fixed(pts, 2.0 / static_cast<double>(d)); });
        emit("free", [&] { return learner::fit_power_law_free(pts); });
      }
    }
  });
  for (const auto& f : files.written()) out << f << '\n';
}

// -- trie-analysis -----------------------------------------------------------

struct TrieArgs {
  std::vector<std::uint32_t> m_list{2, 3, 4, 5, 6, 7, 8};
  std::uint32_t n = 2;
  std::size_t vocab_size = 500;
  std::size_t trace_cap = 4096;
  std::size_t context_dim = 10;
  std::size_t replicates = 1;
};

void run_trie_analysis(const TrieArgs& a, const fs::path& dir, std::uint64_t seed, std::ostream& out) {
  require(!a.m_list.empty(), "--m-list must be non-empty");
  for (auto m : a.m_list) require(m >= 1, "--m-list values must be >= 1");
  require(a.n >= 1, "--n must be >= 1");
  require(a.trace_cap >= 1, "--trace-cap must be >= 1");
  require(a.replicates >= 1, "--replicates must be >= 1");
  require(a.context_dim >= 1, "--context-dim must be >= 1");
  double leaves = 1.0;
  for (auto m : a.m_list) leaves = std::max(leaves, std::pow(static_cast<double>(m), a.n));
  require(leaves <= static_cast<double>(taskgen::kMaxTreeNodes), "task tree would be too large");

  ordered_json config{{"m-list", a.m_list},           {"n", a.n},
                      {"vocab-size", a.vocab_size},   {"trace-cap", a.trace_cap},
                      {"context-dim", a.context_dim}, {"replicates", a.replicates}};
  Output files(dir, "trie-analysis", seed, config);

  struct Run {
    std::size_t replicate;
    std::string tokenizer;
    trie::TaskTrieResult result;
  };
  std::vector<Run> runs;
  for (std::size_t rep = 0; rep < a.replicates; ++rep) {
    const auto rep_seed = derive_seed(seed, "cli.trie", {rep});
    for (bool tokenize : {true, false}) {
      trie::TaskTrieOptions opts;
      opts.depth = a.n;
      opts.vocab_size = a.vocab_size;
      opts.trace_cap = a.trace_cap;
      opts.context_dim = a.context_dim;
      opts.tokenize = tokenize;
      runs.push_back({rep, tokenize ? "bpe" : "bytes", trie::task_vs_trie_degree(a.m_list, opts, rep_seed)});
    }
  }
  files.write("trie_degree.csv", [&](std::ostream& os) {
    os << "task_degree,trie_mean_degree,trie_geo_mean,depth,per_depth_mean,replicate,tokenizer,traces,capped\n";
    for (const auto& run : runs) {
      for (const auto& row : run.result.rows) {
        const auto& r = row.report;
        for (std::size_t depth = 0; depth < r.per_depth.size(); ++depth) {
          os << row.task_degree << ',' << num(r.mean_degree) << ',' << num(r.geo_mean_degree) << ',' << depth
             << ',' << num(r.per_depth[depth]) << ',' << run.replicate << ',' << run.tokenizer << ','
             << row.traces << ',' << (row.capped ? 1 : 0) << '\n';
        }
      }
    }
  });
  files.write("trie_correlation.csv", [&](std::ostream& os) {
    os << "replicate,tokenizer,spearman\n";
    std::map<std::string, std::vector<double>> by_tok;
    for (const auto& run : runs) {
      const auto& rho = run.result.spearman;
      os << run.replicate << ',' << run.tokenizer << ',' << (rho ? num(*rho) : "undefined") << '\n';
      if (rho) by_tok[run.tokenizer].push_back(*rho);
    }
    for (const char* tok : {"bpe", "bytes"}) {
      const auto it = by_tok.find(tok);
      os << "median," << tok << ',' << (it != by_tok.end() ? num(median(it->second)) : "undefined") << '\n';
    }
  });
  for (const auto& f : files.written()) out << f << '\n';
}

// -- dim-estimate ------------------------------------------------------------

struct DimArgs {
  std::vector<std::string> inputs;
  std::string estimator = "all";
  double threshold = 0.8;
  std::size_t k = 10;
};

void run_dim_estimate(const DimArgs& a, const fs::path& dir, std::uint64_t seed, std::ostream& out) {
  require(!a.inputs.empty(), "--input is required");
  require(a.threshold > 0.0 && a.threshold <= 1.0, "--threshold must lie in (0, 1]");
  require(a.k >= 2, "--k must be >= 2");
  std::vector<dim::Estimator> estimators;
  if (a.estimator == "all") {
    estimators = {dim::Estimator::pca, dim::Estimator::mle, dim::Estimator::two_nn};
  } else {
    try {
      estimators = {dim::parse_estimator(a.estimator)};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  std::vector<dim::EmbeddingMatrix> mats;
  for (const auto& in : a.inputs) {
    auto m = dim::read_matrix_file(in);
    m.position = fs::path(in).stem().string();
    mats.push_back(std::move(m));
  }
  dim::EstimatorParams params{a.threshold, a.k};
  std::vector<dim::ProfileRow> rows;
  for (auto e : estimators) {
    auto part = dim::dim_profile(mats, e, params);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  ordered_json config{{"input", a.inputs}, {"estimator", a.estimator}, {"threshold", a.threshold}, {"k", a.k}};
  Output files(dir, "dim-estimate", seed, config);
  files.write("dim_profile.csv", [&](std::ostream& os) { dim::write_profile_csv(os, rows); });
  for (const auto& f : files.written()) out << f << '\n';
}

// -- config file -------------------------------------------------------------

bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& s) {
    return s == flag || s.rfind(flag + "=", 0) == 0;
  });
}

std::optional<std::string> flag_value(const std::vector<std::string>& args, const std::string& flag) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == flag && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind(flag + "=", 0) == 0) return args[i].substr(flag.size() + 1);
  }
  return std::nullopt;
}

void inject(std::vector<std::string>& args, const std::vector<std::string>& present, const std::string& key,
            const nlohmann::json& value) {
  const std::string flag = "--" + key;
  if (has_flag(present, flag)) return;
  if (value.is_boolean()) {
    if (value.get<bool>()) args.push_back(flag);
    return;
  }
  std::string text;
  if (value.is_array()) {
    // Repeatable options take one token per element; lists use commas.
    for (std::size_t i = 0; i < value.size(); ++i) {
      const auto& v = value[i];
      text += (i ? "," : "") + (v.is_string() ? v.get<std::string>() : v.dump());
    }
  } else if (value.is_string()) {
    text = value.get<std::string>();
  } else if (value.is_number()) {
    text = value.dump();
  } else {
    throw UsageError("config key '" + key + "' has an unsupported value");
  }
  args.push_back(flag);
  args.push_back(text);
}

// Flags from the config file are appended only when absent on the command
// line, so explicit flags win.
std::vector<std::string> apply_config(const std::vector<std::string>& args,
                                      const std::vector<std::string>& subcommands) {
  const auto path = flag_value(args, "--config");
  if (!path) return args;
  std::ifstream f(*path);
  if (!f) throw UsageError("cannot open config file '" + *path + "'");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(f, nullptr, true, true);
  } catch (const std::exception& e) {
    throw UsageError("config file '" + *path + "': " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
  std::string sub;
  for (const auto& a : args) {
    if (std::find(subcommands.begin(), subcommands.end(), a) != subcommands.end()) {
      sub = a;
      break;
    }
  }
  std::vector<std::string> result = args;
  for (const auto& [key, value] : cfg.items()) {
    if (key == "seed" || key == "out-dir") {
      inject(result, args, key, value);
    } else if (std::find(subcommands.begin(), subcommands.end(), key) != subcommands.end()) {
      if (!value.is_object()) throw UsageError("config section '" + key + "' must be an object");
      if (key != sub) continue;
      for (const auto& [k2, v2] : value.items()) inject(result, args, k2, v2);
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  return result;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chain-of-thought decomposition toolkit: closed-form error bounds, synthetic reasoning "
               "tasks, scaling sweeps, trie degree analysis and intrinsic-dimension estimates.",
               "cotd"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string config_path;
  app.add_option("--seed", seed, "Master seed; every random stream derives from it")->capture_default_str();
  app.add_option("--out-dir", out_dir, "Directory that receives all output files")->capture_default_str();
  app.add_option("--config", config_path,
                 "JSON file with defaults: {\"seed\":..,\"out-dir\":..,\"<subcommand>\":{\"flag\":value}}; "
                 "command-line flags take precedence");

  TheoryGridArgs tg;
  auto* theory_cmd = app.add_subcommand(
      "theory-grid",
      "Gain of decomposing a task into reasoning steps (kind=reasoning, over degree m and depth n) or of "
      "deeper thinking trees (kind=thinking, over m and depth factor r). Writes the gain grid, its "
      "zero-gain boundary and optimal curve; for reasoning also the gain at fixed task size, whose argmax "
      "is the optimal degree e^(d/2).");
  theory_cmd->add_option("--kind", tg.kind, "reasoning or thinking")
      ->check(CLI::IsMember({"reasoning", "thinking"}))
      ->capture_default_str();
  theory_cmd->add_option("--d", tg.d, "Intrinsic dimension")->capture_default_str();
  theory_cmd->add_option("--prefactor", tg.prefactor, "Error prefactor c D^(-1/d)")->capture_default_str();
  theory_cmd->add_option("--m-range", tg.m_range, "Degree axis lo:hi:step")->capture_default_str();
  auto* n_range = theory_cmd->add_option("--n-range", tg.n_range, "Depth axis lo:hi:step (reasoning)")
                      ->capture_default_str();
  auto* r_range = theory_cmd->add_option("--r-range", tg.r_range, "Depth-factor axis lo:hi:step (thinking)")
                      ->capture_default_str();
  auto* base_n = theory_cmd->add_option("--n", tg.n, "Base depth for thinking grids")->capture_default_str();
  auto* task_size = theory_cmd->add_option("--task-size", tg.task_size, "Task size N for the fixed-size curve")
                        ->capture_default_str();

  BestProfileArgs bp;
  auto* best_cmd = app.add_subcommand(
      "best-profile",
      "Exhaustive search over ordered integer factorizations of N for the degree profile with the "
      "smallest decomposed error bound (sum of m_k^(2/d)).");
  best_cmd->add_option("--task-size", bp.task_size, "Task size N")->capture_default_str();
  best_cmd->add_option("--d", bp.d, "Intrinsic dimension")->capture_default_str();
  best_cmd->add_option("--search", bp.search, "factorizations or constant")
      ->check(CLI::IsMember({"factorizations", "constant"}))
      ->capture_default_str();
  best_cmd->add_option("--max-factorizations", bp.max_factorizations, "Enumeration guard")->capture_default_str();

  TaskgenArgs tga;
  auto* taskgen_cmd = app.add_subcommand(
      "taskgen",
      "Synthetic logical-deduction task: a random tree of IDENTITY/NOT edges whose root bit is "
      "1[v.w > 0], with direct, reasoning-trace or thinking (redundant deeper tree) datasets. Writes the "
      "tree descriptor and a JSONL dataset.");
  taskgen_cmd->add_option("--m", tga.m, "Degree")->capture_default_str();
  taskgen_cmd->add_option("--n", tga.n, "Depth")->capture_default_str();
  taskgen_cmd->add_option("--structure-k", tga.structure_k, "Structure k/n (default n: balanced tree)");
  taskgen_cmd->add_option("--mode", tga.mode, "direct, reasoning or thinking")
      ->check(CLI::IsMember({"direct", "reasoning", "thinking"}))
      ->capture_default_str();
  taskgen_cmd->add_option("--r", tga.r, "Depth factor (thinking only); r*n must be an integer");
  taskgen_cmd->add_option("--count", tga.count, "Samples (default 15000 n^0.7, or 50000 for thinking)");
  taskgen_cmd->add_option("--context-dim", tga.context_dim, "Dimension of v and w")->capture_default_str();

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand(
      "scaling-sweep",
      "Student-teacher scaling experiment: Voronoi teacher on the sphere, memorizing student. Sweeps "
      "d, m and D, then fits error = a m^p + b with p = 2/d and with p free. --cifar-fixture instead fits "
      "the reference curve 0.036 m^0.31 + 0.02.");
  sweep_cmd->add_option("--d-list", sw.d_list, "Input dimensions")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--m-list", sw.m_list, "Class counts")->delimiter(',')->capture_default_str();
  sweep_cmd->add_option("--sample-counts", sw.sample_counts, "Training set sizes D")
      ->delimiter(',')
      ->capture_default_str();
  sweep_cmd->add_option("--replicates", sw.replicates, "Replicates per cell")->capture_default_str();
  sweep_cmd->add_option("--test-count", sw.test_count, "Test points per cell")->capture_default_str();
  sweep_cmd->add_option("--decode", sw.decode, "greedy or sample")
      ->check(CLI::IsMember({"greedy", "sample"}))
      ->capture_default_str();
  sweep_cmd->add_flag("--kernel", sw.kernel, "Kernel memorizer instead of 1-NN");
  sweep_cmd->add_option("--bandwidth", sw.bandwidth, "Kernel width (default: median pairwise distance)");
  sweep_cmd->add_flag("--unbalanced", sw.unbalanced, "Plain uniform training sets (no D/m balancing)");
  sweep_cmd->add_option("--max-cells", sw.max_cells, "Resource guard on sweep size")->capture_default_str();
  sweep_cmd->add_flag("--cifar-fixture", sw.cifar_fixture, "Fit the fixed reference curve only");

  TrieArgs tr;
  auto* trie_cmd = app.add_subcommand(
      "trie-analysis",
      "Task degree versus prefix-trie degree: enumerates reasoning traces of degree-m trees, trains a "
      "byte-level BPE tokenizer on them, builds the token trie and reports branching and the Spearman "
      "correlation across m (with a one-token-per-byte control).");
  trie_cmd->add_option("--m-list", tr.m_list, "Task degrees")->delimiter(',')->capture_default_str();
  trie_cmd->add_option("--n", tr.n, "Tree depth")->capture_default_str();
  trie_cmd->add_option("--vocab-size", tr.vocab_size, "BPE vocabulary size")->capture_default_str();
  trie_cmd->add_option("--trace-cap", tr.trace_cap, "Max traces per task (sampled above)")->capture_default_str();
  trie_cmd->add_option("--context-dim", tr.context_dim, "Dimension of v and w")->capture_default_str();
  trie_cmd->add_option("--replicates", tr.replicates, "Independent seeds")->capture_default_str();

  DimArgs da;
  auto* dim_cmd = app.add_subcommand(
      "dim-estimate",
      "Intrinsic dimension of embedding matrices (PCA variance threshold, MLE, TwoNN); one position per "
      "input file, giving a dimension-versus-position profile.");
  dim_cmd->add_option("--input", da.inputs, "Matrix files (.bin binary, otherwise CSV); repeatable")
      ->delimiter(',')
      ->check(CLI::ExistingFile);
  dim_cmd->add_option("--estimator", da.estimator, "pca, mle, twonn or all")
      ->check(CLI::IsMember({"pca", "mle", "twonn", "all"}))
      ->capture_default_str();
  dim_cmd->add_option("--threshold", da.threshold, "PCA explained-variance fraction")->capture_default_str();
  dim_cmd->add_option("--k", da.k, "MLE neighbor count")->capture_default_str();

  std::vector<std::string> subcommands;
  for (const auto* s : app.get_subcommands({})) subcommands.push_back(s->get_name());

  int status = kExitOk;
  try {
    auto args = apply_config(raw_args, subcommands);
    std::reverse(args.begin(), args.end());
    app.parse(args);

    const fs::path dir(out_dir);
    if (*theory_cmd) {
      const bool reasoning = tg.kind == "reasoning";
      require(!(reasoning && (*r_range || *base_n)), "--r-range and --n are for --kind thinking");
      require(!(!reasoning && (*n_range || *task_size)), "--n-range and --task-size are for --kind reasoning");
      run_theory_grid(tg, dir, seed, out);
    } else if (*best_cmd) {
      run_best_profile(bp, dir, seed, out);
    } else if (*taskgen_cmd) {
      run_taskgen(tga, dir, seed, out);
    } else if (*sweep_cmd) {
      run_scaling_sweep(sw, dir, seed, out, err, status);
    } else if (*trie_cmd) {
      run_trie_analysis(tr, dir, seed, out);
    } else if (*dim_cmd) {
      run_dim_estimate(da, dir, seed, out);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return status;
}

}  // namespace cotd::cli
