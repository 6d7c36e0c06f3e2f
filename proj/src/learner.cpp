#include "cotd/learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace cotd::learner {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

void append(PointSet& set, std::span<const double> x) {
  set.coords.insert(set.coords.end(), x.begin(), x.end());
}

std::size_t nearest(const PointSet& points, std::span<const double> x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double dd = squared_distance(points[i], x);
    if (dd < best_d) {
      best_d = dd;
      best = i;
    }
  }
  return best;
}

}  // namespace

VoronoiTask make_task(std::size_t d, std::size_t m, std::uint64_t seed) {
  if (d < 2) throw std::invalid_argument("input dimension d must be >= 2");
  if (m < 1) throw std::invalid_argument("class count m must be >= 1");
  VoronoiTask task{d, m, PointSet{d, {}}};
  task.prototypes.coords.reserve(d * m);
  Rng rng = Rng::for_purpose(seed, "learner.prototypes");
  while (task.prototypes.size() < m) {
    const auto p = uniform_on_sphere(rng, d);
    bool duplicate = false;
    for (std::size_t i = 0; i < task.prototypes.size() && !duplicate; ++i) {
      duplicate = squared_distance(task.prototypes[i], p) < 1e-24;
    }
    if (!duplicate) append(task.prototypes, p);  // otherwise redraw
  }
  return task;
}

std::size_t label(const VoronoiTask& task, std::span<const double> x) {
  if (x.size() != task.d) throw std::invalid_argument("input dimension mismatch");
  std::size_t best = 0;
  double best_dot = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < task.m; ++i) {
    const double s = dot(task.prototypes[i], x);
    if (s > best_dot) {
      best_dot = s;
      best = i;
    }
  }
  return best;
}

std::string_view to_string(Decode decode) {
  return decode == Decode::greedy ? "greedy" : "sample";
}

Decode parse_decode(std::string_view text) {
  if (text == "greedy") return Decode::greedy;
  if (text == "sample") return Decode::sample;
  throw std::invalid_argument("unknown decode '" + std::string(text) + "'");
}

double median_pairwise_distance(const PointSet& points) {
  const std::size_t n = points.size();
  if (n < 2) throw std::invalid_argument("median pairwise distance needs two points");
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) dists.push_back(squared_distance(points[i], points[j]));
  }
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double med = std::sqrt(*mid);
  if (dists.size() % 2 == 0) {
    med = 0.5 * (med + std::sqrt(*std::max_element(dists.begin(), mid)));
  }
  return med;
}

std::vector<double> class_probabilities(const Memorizer& model, std::span<const double> x) {
  if (model.train_y.empty()) throw std::invalid_argument("memorizer has no training points");
  std::vector<double> p(model.classes, 0.0);
  if (!model.bandwidth) {
    p[model.train_y[nearest(model.train_x, x)]] = 1.0;
    return p;
  }
  const double h2 = *model.bandwidth * *model.bandwidth;
  std::vector<double> d2(model.train_y.size());
  double min_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d2.size(); ++i) {
    d2[i] = squared_distance(model.train_x[i], x);
    min_d2 = std::min(min_d2, d2[i]);
  }
  // Shifted by the smallest distance so the nearest point has weight 1.
  double total = 0.0;
  for (std::size_t i = 0; i < d2.size(); ++i) {
    const double w = std::exp(-(d2[i] - min_d2) / h2);
    p[model.train_y[i]] += w;
    total += w;
  }
  for (double& v : p) v /= total;
  return p;
}

std::size_t predict(const Memorizer& model, std::span<const double> x, Decode decode, Rng& rng) {
  if (model.train_y.empty()) throw std::invalid_argument("memorizer has no training points");
  if (!model.bandwidth) return model.train_y[nearest(model.train_x, x)];
  const auto p = class_probabilities(model, x);
  if (decode == Decode::greedy) {
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }
  double u = rng.uniform();
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (u < p[c]) return c;
    u -= p[c];
  }
  // Rounding left u just above the total; return the last supported class.
  for (std::size_t c = p.size(); c-- > 0;) {
    if (p[c] > 0.0) return c;
  }
  return 0;
}

std::size_t predict(const Memorizer& model, std::span<const double> x, Decode decode,
                    std::uint64_t seed) {
  Rng rng(seed);
  return predict(model, x, decode, rng);
}

Memorizer build_memorizer(const VoronoiTask& task, std::size_t sample_count, std::uint64_t seed,
                          const ErrorOptions& options, std::size_t* underfilled) {
  if (sample_count < 1) throw std::invalid_argument("training set size D must be >= 1");
  Memorizer model;
  model.classes = task.m;
  model.train_x.dim = task.d;
  model.train_x.coords.reserve(sample_count * task.d);
  model.train_y.reserve(sample_count);
  Rng rng = Rng::for_purpose(seed, "learner.train");

  const auto push = [&](const std::vector<double>& x, std::size_t y) {
    append(model.train_x, x);
    model.train_y.push_back(y);
  };

  std::vector<std::size_t> counts(task.m, 0);
  if (options.balanced) {
    // Quota of D/m per class; the first D % m classes take one extra.
    std::vector<std::size_t> quota(task.m, sample_count / task.m);
    for (std::size_t c = 0; c < sample_count % task.m; ++c) ++quota[c];
    std::size_t missing = sample_count;
    const std::size_t budget = options.balance_budget * sample_count;
    std::vector<std::pair<std::vector<double>, std::size_t>> spare;
    for (std::size_t draw = 0; draw < budget && missing > 0; ++draw) {
      auto x = uniform_on_sphere(rng, task.d);
      const std::size_t y = label(task, x);
      if (counts[y] < quota[y]) {
        ++counts[y];
        --missing;
        push(x, y);
      } else if (spare.size() < sample_count) {
        spare.emplace_back(std::move(x), y);
      }
    }
    std::size_t short_classes = 0;
    for (std::size_t c = 0; c < task.m; ++c) short_classes += counts[c] < quota[c];
    if (underfilled) *underfilled = short_classes;
    // Top up from the surplus (then fresh draws) so the set still has D points.
    for (std::size_t i = 0; missing > 0; ++i, --missing) {
      if (i < spare.size()) {
        push(spare[i].first, spare[i].second);
      } else {
        const auto x = uniform_on_sphere(rng, task.d);
        push(x, label(task, x));
      }
    }
  } else {
    for (std::size_t i = 0; i < sample_count; ++i) {
      const auto x = uniform_on_sphere(rng, task.d);
      const std::size_t y = label(task, x);
      ++counts[y];
      push(x, y);
    }
    if (underfilled) {
      *underfilled = static_cast<std::size_t>(std::count(counts.begin(), counts.end(), 0u));
    }
  }

  if (options.kernel) {
    model.bandwidth = options.bandwidth ? *options.bandwidth
                                        : median_pairwise_distance(model.train_x);
    if (!(*model.bandwidth > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
  }
  return model;
}

ErrorResult measure_error(std::size_t d, std::size_t m, std::size_t sample_count,
                          std::size_t test_count, Decode decode, std::uint64_t seed,
                          const ErrorOptions& options) {
  if (sample_count < m) throw std::invalid_argument("training set size D must be >= m");
  if (test_count < 1) throw std::invalid_argument("test count must be >= 1");
  const auto task = make_task(d, m, derive_seed(seed, "learner.task"));
  ErrorResult result;
  const auto model = build_memorizer(task, sample_count, derive_seed(seed, "learner.train_set"),
                                     options, &result.underfilled_classes);
  Rng test_rng = Rng::for_purpose(seed, "learner.test");
  Rng decode_rng = Rng::for_purpose(seed, "learner.decode");
  std::size_t wrong = 0;
  for (std::size_t t = 0; t < test_count; ++t) {
    const auto x = uniform_on_sphere(test_rng, d);
    wrong += predict(model, x, decode, decode_rng) != label(task, x);
  }
  result.error = static_cast<double>(wrong) / static_cast<double>(test_count);
  return result;
}

std::vector<SweepRow> sweep(const SweepSpec& spec) {
  if (spec.d_list.empty() || spec.m_list.empty() || spec.sample_counts.empty()) {
    throw std::invalid_argument("sweep lists must be non-empty");
  }
  if (spec.replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  const std::size_t cells =
      spec.d_list.size() * spec.m_list.size() * spec.sample_counts.size() * spec.replicates;
  if (cells > spec.max_cells) {
    throw std::length_error(fmt::format("sweep has {} cells, limit is {}", cells, spec.max_cells));
  }
  std::vector<SweepRow> rows;
  rows.reserve(cells);
  for (std::size_t d : spec.d_list) {
    for (std::size_t m : spec.m_list) {
      for (std::size_t n : spec.sample_counts) {
        for (std::size_t rep = 0; rep < spec.replicates; ++rep) {
          const std::uint64_t cell_seed = derive_seed(spec.seed, "learner.sweep.cell", {d, m, n, rep});
          const auto res = measure_error(d, m, n, spec.test_count, spec.decode, cell_seed, spec.options);
          rows.push_back({d, m, n, rep, cell_seed, spec.decode, res.error});
        }
      }
    }
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "d,m,D,replicate,seed,decode,error\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{:.17g}\n", r.d, r.m, r.sample_count, r.replicate, r.seed,
                       to_string(r.decode), r.error);
  }
}

}  // namespace cotd::learner
