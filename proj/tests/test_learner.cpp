#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "cotd/learner.hpp"
#include "cotd/random.hpp"
#include "cotd/stats.hpp"

using namespace cotd;
using namespace cotd::learner;

namespace {

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// Oracle: nearest prototype by chord distance.
std::size_t label_by_distance(const VoronoiTask& t, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < t.m; ++i) {
    double s = 0.0;
    for (std::size_t c = 0; c < t.d; ++c) s += (t.prototypes[i][c] - x[c]) * (t.prototypes[i][c] - x[c]);
    if (s < best_d) {
      best_d = s;
      best = i;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("prototypes are unit vectors and deterministic") {
  const auto t = make_task(5, 20, 3);
  REQUIRE(t.prototypes.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(norm(t.prototypes[i]) - 1.0) < 1e-9);
  CHECK(make_task(5, 20, 3).prototypes.coords == t.prototypes.coords);
  CHECK(make_task(5, 20, 4).prototypes.coords != t.prototypes.coords);
  CHECK_THROWS(make_task(1, 3, 0));
  CHECK_THROWS(make_task(3, 0, 0));
}

TEST_CASE("single class labels everything 0") {
  const auto t = make_task(3, 1, 1);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) CHECK(label(t, uniform_on_sphere(rng, 3)) == 0);
  CHECK(measure_error(3, 1, 10, 50, Decode::greedy, 1).error == 0.0);
}

TEST_CASE("labels match the distance oracle") {
  const auto t = make_task(4, 17, 8);
  Rng rng(4);
  for (int i = 0; i < 10000; ++i) {
    const auto x = uniform_on_sphere(rng, 4);
    REQUIRE(label(t, x) == label_by_distance(t, x));
  }
  for (std::size_t j = 0; j < t.m; ++j) CHECK(label(t, t.prototypes[j]) == j);
}

TEST_CASE("antipodal prototypes") {
  VoronoiTask t{2, 2, PointSet{2, {1.0, 0.0, -1.0, 0.0}}};
  CHECK(label(t, std::vector<double>{-1.0, 0.0}) == 1);
  CHECK(label(t, std::vector<double>{1.0, 0.0}) == 0);
}

TEST_CASE("every Voronoi cell is occupied") {
  const auto t = make_task(3, 8, 5);
  Rng rng(6);
  std::vector<std::size_t> counts(8, 0);
  for (int i = 0; i < 1000000; ++i) ++counts[label(t, uniform_on_sphere(rng, 3))];
  for (auto c : counts) CHECK(c > 0);
}

TEST_CASE("memorizer interpolates its training set") {
  const auto t = make_task(3, 10, 1);
  const auto model = build_memorizer(t, 300, 2, {});
  REQUIRE(model.train_y.size() == 300);
  for (std::size_t i = 0; i < model.train_y.size(); ++i) {
    CHECK(predict(model, model.train_x[i], Decode::greedy, 0) == model.train_y[i]);
    CHECK(predict(model, model.train_x[i], Decode::sample, 0) == model.train_y[i]);
    CHECK(model.train_y[i] == label(t, model.train_x[i]));
  }
}

TEST_CASE("balanced training sets hit the quota") {
  const auto t = make_task(3, 7, 2);
  std::size_t under = 99;
  const auto model = build_memorizer(t, 703, 3, {}, &under);
  CHECK(under == 0);
  std::vector<std::size_t> counts(7, 0);
  for (auto y : model.train_y) ++counts[y];
  // 703 = 7 * 100 + 3: the first three classes take one extra.
  for (std::size_t c = 0; c < 7; ++c) CHECK(counts[c] == (c < 3 ? 101u : 100u));
}

TEST_CASE("an impossible balance is reported and topped up") {
  // Class 1 sits between two close neighbours and owns a sliver of the circle.
  VoronoiTask t{2, 3, PointSet{2, {1.0, 0.0, std::cos(1e-4), std::sin(1e-4), std::cos(2e-4), std::sin(2e-4)}}};
  ErrorOptions opts;
  opts.balance_budget = 2;
  std::size_t under = 0;
  const auto model = build_memorizer(t, 99, 1, opts, &under);
  CHECK(under == 1);
  CHECK(model.train_y.size() == 99);
}

TEST_CASE("small-bandwidth greedy kernel equals 1-NN") {
  const auto t = make_task(3, 6, 9);
  ErrorOptions kernel;
  kernel.kernel = true;
  kernel.bandwidth = 1e-3;
  const auto km = build_memorizer(t, 200, 4, kernel);
  Memorizer nn = km;
  nn.bandwidth.reset();
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    const auto x = uniform_on_sphere(rng, 3);
    REQUIRE(predict(km, x, Decode::greedy, 0) == predict(nn, x, Decode::greedy, 0));
  }
}

TEST_CASE("one training point always wins") {
  Memorizer m{PointSet{2, {1.0, 0.0}}, {3}, 5, 0.5};
  Rng rng(1);
  for (int i = 0; i < 50; ++i) CHECK(predict(m, uniform_on_sphere(rng, 2), Decode::sample, rng) == 3);
  Memorizer empty{PointSet{2, {}}, {}, 2, std::nullopt};
  CHECK_THROWS(predict(empty, std::vector<double>{1, 0}, Decode::greedy, 0));
}

TEST_CASE("kernel probabilities sum to one") {
  const auto t = make_task(4, 5, 1);
  ErrorOptions kernel;
  kernel.kernel = true;
  const auto model = build_memorizer(t, 100, 2, kernel);
  REQUIRE(model.bandwidth);
  CHECK(*model.bandwidth > 0.0);
  Rng rng(3);
  const auto p = class_probabilities(model, uniform_on_sphere(rng, 4));
  double s = 0.0;
  for (double v : p) s += v;
  CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("median pairwise distance by hand") {
  // Points 0, 1, 3 on a line: distances 1, 2, 3.
  PointSet p{1, {0.0, 1.0, 3.0}};
  CHECK(median_pairwise_distance(p) == doctest::Approx(2.0));
  PointSet q{1, {0.0, 1.0, 3.0, 7.0}};  // 1 2 3 4 6 7 -> (3 + 4) / 2
  CHECK(median_pairwise_distance(q) == doctest::Approx(3.5));
}

TEST_CASE("greedy decoding beats sampling for the kernel memorizer") {
  ErrorOptions kernel;
  kernel.kernel = true;
  double greedy = 0.0, sample = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    greedy += measure_error(3, 16, 512, 500, Decode::greedy, s, kernel).error;
    sample += measure_error(3, 16, 512, 500, Decode::sample, s, kernel).error;
  }
  CHECK(greedy < sample);
}

TEST_CASE("error falls with more data") {
  std::vector<double> xs, ys;
  for (int k = 6; k <= 14; ++k) {
    double e = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s) e += measure_error(4, 16, 1u << k, 1000, Decode::greedy, s).error;
    xs.push_back(k);
    ys.push_back(e / 10);
  }
  const auto rho = spearman(xs, ys);
  REQUIRE(rho);
  CHECK(*rho < 0.0);
}

TEST_CASE("measure_error preconditions") {
  CHECK_THROWS(measure_error(3, 10, 5, 10, Decode::greedy, 0));
  CHECK_THROWS(measure_error(3, 2, 5, 0, Decode::greedy, 0));
}

TEST_CASE("sweep shape and replay") {
  SweepSpec spec;
  spec.d_list = {2, 3};
  spec.m_list = {2, 4, 8};
  spec.sample_counts = {64, 128};
  spec.replicates = 2;
  spec.test_count = 50;
  spec.seed = 5;
  const auto rows = sweep(spec);
  CHECK(rows.size() == 2 * 3 * 2 * 2);
  std::ostringstream a, b;
  write_sweep_csv(a, rows);
  write_sweep_csv(b, sweep(spec));
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("d,m,D,replicate,seed,decode,error\n", 0) == 0);

  SweepSpec one = spec;
  one.d_list = {3};
  one.m_list = {4};
  one.sample_counts = {64};
  one.replicates = 1;
  const auto single = sweep(one);
  REQUIRE(single.size() == 1);
  CHECK(single[0].error == measure_error(3, 4, 64, 50, Decode::greedy, single[0].seed).error);

  spec.max_cells = 5;
  CHECK_THROWS_AS(sweep(spec), std::length_error);
}

TEST_CASE("fixed-exponent fit is the normal-equations solution") {
  std::vector<Point2> pts{{1, 2.0}, {2, 2.9}, {4, 4.2}, {8, 5.1}, {16, 7.3}};
  const auto f = fit_power_law_fixed(pts, 0.5);
  double r1 = 0.0, r0 = 0.0;
  for (const auto& p : pts) {
    const double e = p.y - (f.a * std::sqrt(p.x) + f.b);
    r1 += e * std::sqrt(p.x);
    r0 += e;
  }
  CHECK(std::abs(r1) < 1e-10);
  CHECK(std::abs(r0) < 1e-10);
  CHECK(f.d_estimate == doctest::Approx(4.0));
  CHECK(f.residual >= 0.0);
  CHECK(f.r2 <= 1.0);
}

TEST_CASE("constant data gives zero amplitude") {
  std::vector<Point2> pts{{1, 3.0}, {2, 3.0}, {5, 3.0}};
  const auto f = fit_power_law_fixed(pts, 1.0);
  CHECK(std::abs(f.a) < 1e-12);
  CHECK(f.b == doctest::Approx(3.0));
  CHECK(f.r2 == 1.0);
}

TEST_CASE("free-exponent fit recovers known curves") {
  std::vector<Point2> pts;
  for (double x : {1.0, 2.0, 3.0, 5.0, 8.0}) pts.push_back({x, 3.0 * x * x + 1.0});
  const auto f = fit_power_law_free(pts);
  CHECK(std::abs(f.exponent - 2.0) < 1e-6);
  CHECK(std::abs(f.a - 3.0) < 1e-6);
  CHECK(std::abs(f.b - 1.0) < 1e-6);

  std::vector<Point2> cifar;
  for (double m : {5.0, 10.0, 20.0, 25.0, 50.0, 100.0}) cifar.push_back({m, 0.036 * std::pow(m, 0.31) + 0.02});
  const auto g = fit_power_law_free(cifar);
  CHECK(std::abs(g.a - 0.036) < 1e-6);
  CHECK(std::abs(g.b - 0.02) < 1e-6);
  CHECK(std::abs(g.exponent - 0.31) < 1e-6);
  CHECK(std::abs(g.d_estimate - 2.0 / 0.31) < 1e-4);
}

TEST_CASE("fit preconditions") {
  std::vector<Point2> two{{1, 1}, {2, 2}};
  CHECK_THROWS(fit_power_law_fixed(two, 1.0));
  std::vector<Point2> neg{{-1, 1}, {2, 2}, {3, 3}};
  CHECK_THROWS(fit_power_law_free(neg));
  std::vector<Point2> same{{2, 1}, {2, 2}, {2, 3}};
  CHECK_THROWS(fit_power_law_fixed(same, 1.0));
  CHECK_THROWS(fit_power_law_free(same));
  std::ostringstream os;
  const PowerLawFit f{};
  write_fit_csv(os, std::span(&f, 1));
  CHECK(os.str().rfind("a,b,exponent,d_estimate,residual,r2\n", 0) == 0);
}

TEST_CASE("decode names") {
  CHECK(parse_decode("greedy") == Decode::greedy);
  CHECK(to_string(Decode::sample) == "sample");
  CHECK_THROWS(parse_decode("beam"));
}
