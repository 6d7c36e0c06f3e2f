// Acceptance checks 1-11. One PASS/FAIL line per criterion; the exit code is
// nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "../fixtures.hpp"
#include "cotd/cli.hpp"
#include "cotd/intrinsic_dim.hpp"
#include "cotd/learner.hpp"
#include "cotd/random.hpp"
#include "cotd/stats.hpp"
#include "cotd/taskgen.hpp"
#include "cotd/theory.hpp"
#include "cotd/trie.hpp"

namespace fs = std::filesystem;
using namespace cotd;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) o.require(false, fmt::format("runtime {:.2f} s over the {:.0f} s limit", secs, limit_s));
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << name << fmt::format(" ({:.2f} s)", secs);
  if (!o.detail.empty()) std::cout << ": " << o.detail;
  std::cout << std::endl;
}

// -- 1 -----------------------------------------------------------------------

Outcome optimal_degree_check() {
  Outcome o;
  std::string vals;
  for (double d : {1.0, 2.0, 3.0, 6.45, 10.0}) {
    const theory::ErrorModelParams params(d, 1.0);
    const double arg = theory::argmax_constant_degree(1e6, params, 1.01, 200.0, 0.01);
    const double target = std::exp(d / 2.0);
    o.require(std::abs(arg - target) <= 0.01, fmt::format("d={} argmax {} vs {}", d, arg, target));
    vals += fmt::format("{}{:g}->{:.2f}", vals.empty() ? "" : " ", d, arg);
  }
  if (o.pass) o.detail = vals;
  return o;
}

// -- 2 -----------------------------------------------------------------------

// Integer m with m^n == N for n >= 2, if any.
std::vector<std::pair<std::uint64_t, std::size_t>> integer_powers(std::uint64_t N) {
  std::vector<std::pair<std::uint64_t, std::size_t>> out;
  for (std::uint64_t m = 2; m * m <= N; ++m) {
    std::uint64_t p = m;
    std::size_t n = 1;
    while (p < N) {
      p *= m;
      ++n;
    }
    if (p == N) out.emplace_back(m, n);
  }
  return out;
}

Outcome equal_degree_check() {
  Outcome o;
  const std::vector<double> ds{1.0, 2.0, 3.0, 6.0};
  std::size_t checked = 0, literal_counterexamples = 0;
  std::string first_counterexample;
  for (std::uint64_t N = 2; N <= 4096; ++N) {
    const auto powers = integer_powers(N);
    // best[d][length] and the global best per d
    std::vector<std::map<std::size_t, double>> best(ds.size());
    std::vector<double> global(ds.size(), INFINITY);
    theory::for_each_ordered_factorization(N, 100'000'000, [&](std::span<const std::uint64_t> f) {
      for (std::size_t i = 0; i < ds.size(); ++i) {
        double s = 0.0;
        for (auto m : f) s += std::pow(static_cast<double>(m), 2.0 / ds[i]);
        auto [it, fresh] = best[i].try_emplace(f.size(), s);
        if (!fresh) it->second = std::min(it->second, s);
        global[i] = std::min(global[i], s);
      }
    });
    for (std::size_t i = 0; i < ds.size(); ++i) {
      double best_constant = INFINITY;
      for (const auto& [m, n] : powers) {
        const double c = static_cast<double>(n) * std::pow(static_cast<double>(m), 2.0 / ds[i]);
        best_constant = std::min(best_constant, c);
        ++checked;
        o.require(best[i].at(n) >= c * (1 - 1e-12),
                  fmt::format("N={} d={} length {} beats the constant profile", N, ds[i], n));
      }
      if (!powers.empty() && global[i] < best_constant * (1 - 1e-12)) {
        ++literal_counterexamples;
        if (first_counterexample.empty()) first_counterexample = fmt::format("N={} d={}", N, ds[i]);
      }
    }
  }

  // The documented tie.
  double c2x6 = 0, c4x3 = 0, global64 = INFINITY;
  std::vector<std::vector<std::uint64_t>> minimizers;
  theory::for_each_ordered_factorization(64, 1'000'000, [&](std::span<const std::uint64_t> f) {
    const double s = theory::profile_cost(f, 2.0);
    if (s < global64 - 1e-12) {
      global64 = s;
      minimizers.clear();
    }
    if (std::abs(s - global64) <= 1e-12) minimizers.emplace_back(f.begin(), f.end());
  });
  const std::vector<std::uint64_t> six_twos(6, 2), three_fours(3, 4);
  c2x6 = theory::profile_cost(six_twos, 2.0);
  c4x3 = theory::profile_cost(three_fours, 2.0);
  o.require(c2x6 == 12.0 && c4x3 == 12.0, fmt::format("tie costs {} and {}", c2x6, c4x3));
  const auto has = [&](const std::vector<std::uint64_t>& f) {
    return std::find(minimizers.begin(), minimizers.end(), f) != minimizers.end();
  };
  o.require(global64 == 12.0 && has(six_twos) && has(three_fours),
            fmt::format("d=2 N=64 minimum {} is not attained by both constant profiles", global64));
  const auto bp = theory::best_profile(64, 2.0, theory::ProfileSearch::factorizations);
  o.require(bp.degrees == three_fours, "best_profile(64, d=2) did not break the tie to [4,4,4]");
  if (o.pass) {
    o.detail = fmt::format(
        "{} (N, d, depth) cases: constant profile optimal at its depth; d=2 N=64 tie [2x6]=[4x3]=12 reproduced "
        "({} minimizing orderings of 2s and 4s, best_profile picks [4,4,4]). "
        "Note: across all depths a non-constant profile can win ({} cases, first {})",
        checked, minimizers.size(), literal_counterexamples, first_counterexample);
  }
  return o;
}

// -- 3 -----------------------------------------------------------------------

Outcome thinking_sign_check() {
  Outcome o;
  const theory::ErrorModelParams p(2.0, 0.01);
  const double g2 = theory::thinking_gain(2, 3, 2, p);
  const double g16 = theory::thinking_gain(16, 3, 2, p);
  o.require(g2 < 0, fmt::format("gain(m=2) = {}", g2));
  o.require(g16 > 0, fmt::format("gain(m=16) = {}", g16));
  double worst_r1 = 0.0;
  for (double m = 1.0; m <= 64.0; m += 0.25)
    for (double n = 1.0; n <= 10.0; n += 0.5) worst_r1 = std::max(worst_r1, std::abs(theory::thinking_gain(m, n, 1.0, p)));
  o.require(worst_r1 <= 1e-15, fmt::format("|gain(r=1)| up to {}", worst_r1));

  const auto ms = theory::linear_range(1.0, 60.0, 0.5);
  const auto rs = theory::linear_range(1.0, 4.0, 0.25);
  for (double d : {1.0, 2.0, 3.0}) {
    const theory::ErrorModelParams pd(d, 0.01);
    const auto grid = theory::thinking_gain_grid(ms, rs, 3.0, pd);
    const auto curve = theory::optimal_curve(grid, d);
    o.require(!curve.empty(), "empty optimal curve");
    for (const auto& c : curve) {
      const double want = 2.0 / d * std::log(c.m);
      o.require(std::abs(c.value - want) <= 1e-10, fmt::format("curve at m={} is {} vs {}", c.m, c.value, want));
      // The curve point minimizes the thinking error along r.
      const double e0 = theory::think_error(c.m, 3.0, c.value, pd);
      if (c.value > 1.001) {
        o.require(e0 <= theory::think_error(c.m, 3.0, c.value - 1e-3, pd) &&
                      e0 <= theory::think_error(c.m, 3.0, c.value + 1e-3, pd),
                  fmt::format("r={} is not a minimum at m={}", c.value, c.m));
      }
    }
  }
  if (o.pass) o.detail = fmt::format("gain(2)={:.4g} gain(16)={:.4g}", g2, g16);
  return o;
}

// -- 4 -----------------------------------------------------------------------

Outcome optimal_depth_check() {
  Outcome o;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double d = 0.5 + 0.5 * i;
    const double m = std::exp(d / 2.0);
    for (int n = 1; n <= 20; ++n) {
      const double N = std::pow(m, n);
      const double got = theory::optimal_depth(N, d);
      worst = std::max(worst, std::abs(got - n) / n);
    }
  }
  o.require(worst <= 1e-10, fmt::format("worst relative error {}", worst));
  if (o.pass) o.detail = fmt::format("400 cases, worst relative error {:.2e}", worst);
  return o;
}

// -- 5 -----------------------------------------------------------------------

Outcome consistency_check() {
  Outcome o;
  Rng rng(derive_seed(2024, "acceptance.consistency"));
  int passed = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const auto m = static_cast<std::uint32_t>(2 + rng.below(3));
    const auto n = static_cast<std::uint32_t>(2 + rng.below(2));
    const std::size_t rn = n + rng.below(6 - n + 1);
    const double r = static_cast<double>(rn) / n;
    const auto base = taskgen::ReasoningTree::generate(taskgen::Degrees(n, m), 4, rng.next_u64());
    const auto aug = taskgen::augment_tree(base, r, rng.next_u64());
    const bool ok = aug.deep_depth() == rn && taskgen::verify_consistency(aug).consistent;
    o.require(ok, fmt::format("m={} n={} r={} failed", m, n, r));
    passed += ok;
  }
  if (o.pass) o.detail = fmt::format("{}/100 configurations consistent", passed);
  return o;
}

// -- 6 -----------------------------------------------------------------------

Outcome golden_strings_check() {
  Outcome o;
  const auto tree = fixtures::small_tree();
  const std::vector<double> v(tree.w());
  o.require(taskgen::root_bit(tree, v) == 1, "root bit is not 1");
  const auto direct = taskgen::render_sample(tree, v, "X5", taskgen::Mode::direct).output_text;
  const auto reason = taskgen::render_sample(tree, v, "X5", taskgen::Mode::reasoning).output_text;
  o.require(direct == "X5=1", "direct: " + direct);
  o.require(reason == "X2=0 X5=1", "reasoning: " + reason);

  const auto aug = fixtures::small_augmented();
  o.require(taskgen::verify_consistency(aug).consistent, "thinking fixture inconsistent");
  const auto deep = aug.deep_leaves_for(*tree.find("X5"));
  std::vector<std::string> outs;
  for (auto leaf : deep) outs.push_back(taskgen::render_thinking_sample(aug, v, leaf).output_text);
  o.require(outs == std::vector<std::string>{"Y1=0 Y4=1 X5=1", "Y2=1 Y6=0 X5=1"},
            "thinking outputs differ");
  return o;
}

// -- 7 -----------------------------------------------------------------------

Outcome fitter_check() {
  Outcome o;
  std::vector<learner::Point2> pts;
  for (double m : {5.0, 10.0, 20.0, 25.0, 50.0, 100.0}) pts.push_back({m, 0.036 * std::pow(m, 0.31) + 0.02});
  const auto f = learner::fit_power_law_free(pts);
  o.require(std::abs(f.a - 0.036) <= 1e-6, fmt::format("a={}", f.a));
  o.require(std::abs(f.b - 0.02) <= 1e-6, fmt::format("b={}", f.b));
  o.require(std::abs(f.exponent - 0.31) <= 1e-6, fmt::format("p={}", f.exponent));
  o.require(std::abs(f.d_estimate - 2.0 / 0.31) <= 1e-4, fmt::format("d_estimate={}", f.d_estimate));
  if (o.pass) o.detail = fmt::format("a={:.8f} b={:.8f} p={:.8f} d_estimate={:.6f}", f.a, f.b, f.exponent, f.d_estimate);
  return o;
}

// -- 8 -----------------------------------------------------------------------

Outcome scaling_trend_check() {
  Outcome o;
  learner::SweepSpec spec;
  spec.d_list = {2, 4, 8};
  spec.m_list = {8, 13, 22, 35, 58, 95, 156, 256};
  spec.sample_counts = {4096};
  spec.replicates = 10;
  spec.test_count = 2000;
  spec.decode = learner::Decode::greedy;
  spec.seed = 0;
  const auto rows = learner::sweep(spec);

  std::string summary;
  for (auto d : spec.d_list) {
    std::vector<double> xs, ys;
    std::vector<learner::Point2> pts;
    for (auto m : spec.m_list) {
      double s = 0.0;
      std::size_t c = 0;
      for (const auto& r : rows)
        if (r.d == d && r.m == m) {
          s += r.error;
          ++c;
        }
      xs.push_back(static_cast<double>(m));
      ys.push_back(s / static_cast<double>(c));
      pts.push_back({xs.back(), ys.back()});
    }
    const auto rho = spearman(xs, ys);
    const auto fit = learner::fit_power_law_fixed(pts, 2.0 / static_cast<double>(d));
    o.require(rho && *rho >= 0.9, fmt::format("d={} rho(error, m)={}", d, rho ? *rho : NAN));
    o.require(fit.r2 >= 0.9, fmt::format("d={} fixed-exponent R2={}", d, fit.r2));
    summary += fmt::format("d={}: rho={:.3f} R2={:.3f}; ", d, rho ? *rho : NAN, fit.r2);
  }

  learner::SweepSpec dspec = spec;
  dspec.d_list = {4};
  dspec.m_list = {16};
  dspec.sample_counts.clear();
  for (int k = 6; k <= 14; ++k) dspec.sample_counts.push_back(std::size_t{1} << k);
  const auto drows = learner::sweep(dspec);
  std::vector<double> xs, ys;
  for (auto D : dspec.sample_counts) {
    double s = 0.0;
    for (const auto& r : drows)
      if (r.sample_count == D) s += r.error;
    xs.push_back(static_cast<double>(D));
    ys.push_back(s / static_cast<double>(dspec.replicates));
  }
  const auto rho_d = spearman(xs, ys);
  o.require(rho_d && *rho_d <= -0.9, fmt::format("rho(error, D)={}", rho_d ? *rho_d : NAN));
  summary += fmt::format("D-sweep rho={:.3f}", rho_d ? *rho_d : NAN);
  if (o.pass) o.detail = summary;
  return o;
}

// -- 9 -----------------------------------------------------------------------

Outcome trie_correlation_check() {
  Outcome o;
  const std::vector<std::uint32_t> ms{2, 3, 4, 5, 6, 7, 8};
  trie::TaskTrieOptions opts;
  opts.depth = 2;
  opts.vocab_size = 500;
  std::vector<double> rhos;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto res = trie::task_vs_trie_degree(ms, opts, derive_seed(s, "cli.trie", {0}));
    rhos.push_back(res.spearman ? *res.spearman : 0.0);
  }
  const double med = median(rhos);
  o.require(med > 0.0, fmt::format("median rho {}", med));
  if (o.pass) o.detail = fmt::format("median rho over 5 seeds = {:.3f}", med);
  return o;
}

// -- 10 ----------------------------------------------------------------------

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

Eigen::MatrixXd rotation(Rng& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian(rng, n, n));
  return qr.householderQ();
}

Outcome dimension_check() {
  Outcome o;
  Rng rng(derive_seed(2024, "acceptance.dimension"));
  std::string summary;
  for (Eigen::Index r : {1, 3, 8}) {
    const dim::EmbeddingMatrix x{gaussian(rng, 500, r) * gaussian(rng, r, 64), std::nullopt};
    const auto k = dim::pca_dim(x, 1.0);
    o.require(k == static_cast<std::size_t>(r), fmt::format("pca rank {} gave {}", r, k));
  }
  const std::vector<std::pair<Eigen::Index, Eigen::Index>> cubes{{1, 10}, {2, 32}, {4, 64}};
  for (const auto& [d, ambient] : cubes) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5000, ambient);
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < d; ++j) x(i, j) = rng.uniform();
    const dim::EmbeddingMatrix m{x * rotation(rng, ambient), std::nullopt};
    const double mle = dim::mle_dim(m).dimension;
    const double tnn = dim::two_nn_dim(m).dimension;
    const double dd = static_cast<double>(d);
    o.require(std::abs(mle - dd) <= 0.2 * dd, fmt::format("mle on {}-cube gave {}", d, mle));
    o.require(std::abs(tnn - dd) <= 0.2 * dd, fmt::format("twonn on {}-cube gave {}", d, tnn));
    summary += fmt::format("{}-cube mle={:.3f} twonn={:.3f}; ", d, mle, tnn);

    if (d == 2) {
      const dim::EmbeddingMatrix scaled{m.data * 13.0, std::nullopt};
      const dim::EmbeddingMatrix rotated{m.data * rotation(rng, ambient), std::nullopt};
      for (const auto* t : {&scaled, &rotated}) {
        const double a = dim::mle_dim(*t).dimension, b = dim::two_nn_dim(*t).dimension;
        o.require(std::abs(a - mle) <= 1e-9 * mle && std::abs(b - tnn) <= 1e-9 * tnn,
                  "nearest-neighbor estimate changed under scaling or rotation");
        o.require(dim::pca_dim(*t) == dim::pca_dim(m), "pca changed under scaling or rotation");
      }
    }
  }
  if (o.pass) o.detail = summary + "invariance holds";
  return o;
}

// -- 11 ----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

Outcome determinism_check() {
  Outcome o;
  const auto root = fs::temp_directory_path() / "cotd_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    Rng rng(5);
    std::ofstream f(root / "layer.csv");
    f << "200,6\n";
    for (int i = 0; i < 200; ++i) {
      for (int j = 0; j < 6; ++j) f << (j ? "," : "") << fmt::format("{:.17g}", rng.normal());
      f << '\n';
    }
  }
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"theory-grid", {"theory-grid"}},
      {"theory-grid-thinking", {"theory-grid", "--kind", "thinking"}},
      {"best-profile", {"best-profile", "--task-size", "720", "--d", "3"}},
      {"taskgen", {"taskgen", "--m", "2", "--n", "2", "--mode", "reasoning", "--count", "200"}},
      {"taskgen-thinking", {"taskgen", "--m", "2", "--n", "2", "--mode", "thinking", "--r", "1.5", "--count", "200"}},
      {"scaling-sweep",
       {"scaling-sweep", "--d-list", "2,4", "--m-list", "4,8,16", "--sample-counts", "128,256", "--replicates", "2",
        "--test-count", "100"}},
      {"scaling-sweep-cifar", {"scaling-sweep", "--cifar-fixture"}},
      {"trie-analysis", {"trie-analysis", "--replicates", "2"}},
      {"dim-estimate", {"dim-estimate", "--input", (root / "layer.csv").string(), "--estimator", "all"}},
  };
  std::size_t files = 0;
  for (const auto& [name, args] : commands) {
    std::vector<fs::path> dirs;
    for (const char* run : {"a", "b"}) {
      const auto dir = root / name / run;
      std::vector<std::string> full{"--seed", "42", "--out-dir", dir.string()};
      full.insert(full.end(), args.begin(), args.end());
      std::ostringstream out, err;
      const int code = cli::run(full, out, err);
      o.require(code == 0, fmt::format("{} exited {}: {}", name, code, err.str()));
      dirs.push_back(dir);
    }
    if (!fs::exists(dirs[0])) continue;
    std::size_t here = 0;
    for (const auto& e : fs::directory_iterator(dirs[0])) {
      const auto other = dirs[1] / e.path().filename();
      o.require(fs::exists(other) && slurp(e.path()) == slurp(other),
                fmt::format("{}: {} differs between runs", name, e.path().filename().string()));
      ++here;
    }
    std::size_t there = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dirs[1])) ++there;
    o.require(here == there && here > 0, fmt::format("{}: file sets differ", name));
    files += here;
  }
  fs::remove_all(root);
  if (o.pass) o.detail = fmt::format("{} subcommand runs, {} files byte-identical", commands.size(), files);
  return o;
}

}  // namespace

int main() {
  criterion(1, "optimal degree e^(d/2)", 1.0, optimal_degree_check);
  criterion(2, "equal-degree optimum over ordered factorizations", 30.0, equal_degree_check);
  criterion(3, "thinking-gain sign structure", 1.0, thinking_sign_check);
  criterion(4, "optimal depth", 1.0, optimal_depth_check);
  criterion(5, "augmented-tree consistency", 10.0, consistency_check);
  criterion(6, "trace serialization", 0.0, golden_strings_check);
  criterion(7, "power-law fitter", 1.0, fitter_check);
  criterion(8, "empirical scaling trend", 300.0, scaling_trend_check);
  criterion(9, "trie correlation", 120.0, trie_correlation_check);
  criterion(10, "dimension estimators", 120.0, dimension_check);
  criterion(11, "CLI determinism", 0.0, determinism_check);
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
