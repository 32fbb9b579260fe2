#include "fixedrank/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "fixedrank/matrix_market.hpp"
#include "fixedrank/random.hpp"

#ifndef FIXEDRANK_VERSION
#define FIXEDRANK_VERSION "unknown"
#endif

namespace fixedrank {

std::string_view to_string(GeometryKind g) { return g == GeometryKind::kBalanced ? "balanced" : "stiefel"; }
std::string_view to_string(ObjectiveKind o) { return o == ObjectiveKind::kApprox ? "approx" : "completion"; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ParseError("bad value for " + key + ": '" + value + "'", 0);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ParseError("bad value for " + key + ": '" + value + "'", 0);
}

std::string format_double(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string_view to_string(IterationKind k) {
  switch (k) {
    case IterationKind::kInitial: return "initial";
    case IterationKind::kNewton: return "newton";
    case IterationKind::kDampedNewton: return "damped";
  }
  return "?";
}

// Positions of a uniformly random subset of ⌈ratio·m·n⌉ entries, column-major.
std::vector<Eigen::Index> sample_positions(Random& rng, Eigen::Index m, Eigen::Index n, double ratio) {
  const Eigen::Index total = m * n;
  const auto count = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(ratio * total)), 1, total);
  std::vector<Eigen::Index> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates from our own uniform draws, so the subset does not
  // depend on the standard library's shuffle.
  for (Eigen::Index k = 0; k < count; ++k) {
    const auto j = k + std::min<Eigen::Index>(total - k - 1, static_cast<Eigen::Index>(rng.uniform() * (total - k)));
    std::swap(idx[k], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct RunOutput {
  NewtonStatus status;
  std::vector<IterationRecord> records;
  std::vector<Matrix> products;
  int warm;
  Matrix product;
};

template <class G>
RunOutput run_newton(std::shared_ptr<const EuclideanOracle> oracle, const FactorPair& start, NewtonConfig nc) {
  nc.keep_iterates = true;
  const NewtonProblem<G> prob(std::move(oracle));
  auto res = newton_run<G>(prob, G::make_point(start), nc);
  RunOutput out{res.status, std::move(res.records), {}, res.warmstart_steps_taken, res.point.product()};
  for (const FactorPair& f : res.iterates) out.products.push_back(product(f));
  return out;
}

RunOutput run_newton(GeometryKind g, std::shared_ptr<const EuclideanOracle> oracle, const FactorPair& start,
                     const NewtonConfig& nc) {
  return g == GeometryKind::kBalanced ? run_newton<BalancedGeometry>(std::move(oracle), start, nc)
                                      : run_newton<StiefelGeometry>(std::move(oracle), start, nc);
}

void fill_common(ExperimentResult& r, const ExperimentConfig& cfg, const NewtonConfig& nc, RunOutput&& run) {
  r.status = run.status;
  r.warmstart_steps = run.warm;
  r.newton_iterations = static_cast<int>(run.records.size()) - 1;
  r.final_grad = run.records.back().riemannian_grad_norm;
  r.final_f = run.records.back().f_value;
  r.product = std::move(run.product);
  r.iterates = std::move(run.products);
  r.log.header = config_echo(cfg);
  r.log.header.insert(r.log.header.begin(), {{"tool", "fixedrank"}, {"version", FIXEDRANK_VERSION}});
  r.log.header.emplace_back("warmstart_steps_taken", std::to_string(run.warm));
  r.log.header.emplace_back("step_policy",
                            nc.step_policy == StepPolicy::kFullNewton ? "full_newton" : "armijo_damped");
  std::string kinds;
  for (std::size_t k = 1; k < run.records.size(); ++k) {
    kinds += (k > 1 ? "," : "");
    kinds += to_string(run.records[k].kind);
  }
  r.log.header.emplace_back("step_kinds", kinds);
  r.log.header.emplace_back("status", std::string(to_string(run.status)));
  r.log.rows = std::move(run.records);
}

ExperimentResult run_approx(const ExperimentConfig& cfg, Random& rng, NewtonConfig nc) {
  Matrix a;
  if (!cfg.input.empty()) {
    a = load_dense(cfg.input);
  } else if (cfg.rank > 0) {
    a = rng.gaussian(cfg.m, cfg.rank) * rng.gaussian(cfg.rank, cfg.n);
    if (cfg.noise > 0.0) a += cfg.noise * rng.gaussian(cfg.m, cfg.n);
  } else {
    a = rng.gaussian(cfg.m, cfg.n);
  }
  if (cfg.p > std::min(a.rows(), a.cols())) throw DimensionError("p exceeds min(m, n) of the input");

  const FactorPair best = truncated_svd_factors(a, cfg.p);
  const Matrix target = product(best);
  const FactorPair start = best + cfg.perturbation * rng.unit_pair(a.rows(), a.cols(), cfg.p);
  RunOutput run = run_newton(cfg.geometry, approx_oracle({a}), start, nc);

  ExperimentResult r;
  for (const Matrix& x : run.products) r.errors.push_back((x - target).norm());
  r.oracle_distance = (run.product - target).norm();
  const double floor = 1e2 * std::numeric_limits<double>::epsilon() * std::max(1.0, target.norm());
  for (std::size_t k = 0; k + 1 < r.errors.size(); ++k) {
    const double e0 = r.errors[k], e1 = r.errors[k + 1];
    if (e0 > 0.0 && e0 < 1.0 && e1 > 0.0) r.log_ratios.push_back(std::log(e1) / std::log(e0));
    if (e0 > 0.0 && e1 > floor) r.fitted_c = std::max(r.fitted_c.value_or(0.0), e1 / (e0 * e0));
  }
  fill_common(r, cfg, nc, std::move(run));
  return r;
}

ExperimentResult run_completion(const ExperimentConfig& cfg, Random& rng, NewtonConfig nc) {
  std::vector<Entry> observed;
  std::optional<Matrix> truth;
  Eigen::Index m = cfg.m, n = cfg.n;
  auto observe = [&](const Matrix& values, const std::vector<Eigen::Index>& positions) {
    for (Eigen::Index pos : positions) observed.push_back({pos % m, pos / m, values(pos % m, pos / m)});
  };

  if (!cfg.input.empty()) {
    MatrixMarketContent content = load_matrix_market(cfg.input);
    if (auto* s = std::get_if<SparseEntries>(&content)) {
      if (!cfg.mask.empty()) throw DimensionError("--mask applies to a dense (array) input only");
      m = s->rows;
      n = s->cols;
      observed = std::move(s->entries);
    } else {
      truth = std::get<Matrix>(std::move(content));
      m = truth->rows();
      n = truth->cols();
      if (!cfg.mask.empty()) {
        MatrixMarketContent mask = load_matrix_market(cfg.mask);
        const auto* s = std::get_if<SparseEntries>(&mask);
        if (s == nullptr) throw DimensionError("mask file must be in coordinate format");
        if (s->rows != m || s->cols != n) throw DimensionError("mask and input dimensions differ");
        for (const Entry& e : s->entries) observed.push_back({e.row, e.col, (*truth)(e.row, e.col)});
      } else {
        observe(*truth, sample_positions(rng, m, n, cfg.sampling));
      }
    }
  } else {
    const Eigen::Index r = cfg.rank > 0 ? cfg.rank : cfg.p;
    truth = rng.gaussian(m, r) * rng.gaussian(n, r).transpose();
    Matrix values = *truth;
    if (cfg.noise > 0.0) values += cfg.noise * rng.gaussian(m, n);
    observe(values, sample_positions(rng, m, n, cfg.sampling));
  }
  if (cfg.p > std::min(m, n)) throw DimensionError("p exceeds min(m, n) of the input");

  CompletionObjective objective(m, n, observed);
  Matrix zero_filled = Matrix::Zero(m, n);
  for (const Entry& e : objective.entries()) zero_filled(e.row, e.col) = e.value;
  const double ratio = static_cast<double>(objective.size()) / static_cast<double>(m * n);
  // Spectral start: best rank-p approximation of the rescaled zero-filled data.
  const FactorPair start = truncated_svd_factors(zero_filled / ratio, cfg.p);
  RunOutput run = run_newton(cfg.geometry, completion_oracle(objective), start, nc);

  ExperimentResult r;
  double res = 0.0, data = 0.0;
  for (const Entry& e : objective.entries()) {
    res += std::pow(run.product(e.row, e.col) - e.value, 2);
    data += e.value * e.value;
  }
  r.training_residual = data > 0.0 ? std::sqrt(res / data) : std::sqrt(res);
  if (truth && objective.size() < static_cast<std::size_t>(m * n)) {
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m, n, false);
    for (const Entry& e : objective.entries()) seen(e.row, e.col) = true;
    double sq = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < m; ++i)
        if (!seen(i, j)) {
          sq += std::pow(run.product(i, j) - (*truth)(i, j), 2);
          ++count;
        }
    r.heldout_rmse = std::sqrt(sq / static_cast<double>(count));
  }
  fill_common(r, cfg, nc, std::move(run));
  return r;
}

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "geometry") {
    if (value == "balanced") cfg.geometry = GeometryKind::kBalanced;
    else if (value == "stiefel") cfg.geometry = GeometryKind::kStiefel;
    else throw ParseError("geometry must be balanced or stiefel, got '" + value + "'", 0);
  } else if (key == "objective") {
    if (value == "approx") cfg.objective = ObjectiveKind::kApprox;
    else if (value == "completion" || value == "complete") cfg.objective = ObjectiveKind::kCompletion;
    else throw ParseError("objective must be approx or completion, got '" + value + "'", 0);
  } else if (key == "m") {
    cfg.m = parse_number<Eigen::Index>(key, value);
  } else if (key == "n") {
    cfg.n = parse_number<Eigen::Index>(key, value);
  } else if (key == "p") {
    cfg.p = parse_number<Eigen::Index>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "rank") {
    cfg.rank = parse_number<Eigen::Index>(key, value);
  } else if (key == "noise") {
    cfg.noise = parse_number<double>(key, value);
  } else if (key == "sampling") {
    cfg.sampling = parse_number<double>(key, value);
  } else if (key == "perturbation") {
    cfg.perturbation = parse_number<double>(key, value);
  } else if (key == "input") {
    cfg.input = value;
  } else if (key == "mask") {
    cfg.mask = value;
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "warmstart") {
    cfg.warmstart = parse_number<int>(key, value);
  } else if (key == "max_outer") {
    cfg.newton.max_outer = parse_number<int>(key, value);
  } else if (key == "grad_tol") {
    cfg.newton.grad_tol = parse_number<double>(key, value);
  } else if (key == "damped") {
    cfg.newton.step_policy = parse_bool(key, value) ? StepPolicy::kArmijoDamped : StepPolicy::kFullNewton;
  } else if (key == "krylov_tol") {
    cfg.newton.krylov_tol = parse_number<double>(key, value);
  } else if (key == "krylov_max") {
    cfg.newton.krylov_max = parse_number<int>(key, value);
  } else {
    throw ParseError("unknown config key '" + key + "'", 0);
  }
}

void read_config(std::istream& in, ExperimentConfig& cfg) {
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", number);
    const std::string key = trim(body.substr(0, eq)), value = trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key", number);
    try {
      set_config_value(cfg, key, value);
    } catch (const ParseError& e) {
      throw ParseError(e.what(), number);
    }
  }
}

void load_config(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  try {
    read_config(in, cfg);
  } catch (const ParseError& e) {
    throw ParseError(path + ":" + std::to_string(e.line()) + ": " + e.what(), e.line());
  }
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.input.empty()) {
    if (cfg.m <= 0 || cfg.n <= 0 || cfg.p <= 0) throw DimensionError("m, n and p must be positive");
    if (cfg.p > std::min(cfg.m, cfg.n)) throw DimensionError("p must not exceed min(m, n)");
  } else if (cfg.p <= 0) {
    throw DimensionError("p must be positive");
  }
  if (!(cfg.sampling > 0.0 && cfg.sampling <= 1.0)) throw DimensionError("sampling must lie in (0, 1]");
  if (cfg.noise < 0.0 || cfg.perturbation < 0.0) throw DimensionError("noise and perturbation must be nonnegative");
  if (!cfg.mask.empty() && cfg.input.empty()) throw DimensionError("mask requires an input file");
}

std::vector<std::pair<std::string, std::string>> config_echo(const ExperimentConfig& cfg) {
  const NewtonConfig& nc = cfg.newton;
  return {
      {"geometry", std::string(to_string(cfg.geometry))},
      {"objective", std::string(to_string(cfg.objective))},
      {"m", std::to_string(cfg.m)},
      {"n", std::to_string(cfg.n)},
      {"p", std::to_string(cfg.p)},
      {"seed", std::to_string(cfg.seed)},
      {"rank", std::to_string(cfg.rank)},
      {"noise", format_double(cfg.noise)},
      {"sampling", format_double(cfg.sampling)},
      {"perturbation", format_double(cfg.perturbation)},
      {"input", cfg.input},
      {"mask", cfg.mask},
      {"out", cfg.out},
      {"warmstart", std::to_string(cfg.warmstart)},
      {"max_outer", std::to_string(nc.max_outer)},
      {"grad_tol", format_double(nc.grad_tol)},
      {"damped", nc.step_policy == StepPolicy::kArmijoDamped ? "true" : "false"},
      {"krylov_tol", format_double(nc.krylov_tol)},
      {"krylov_max", std::to_string(nc.krylov_max)},
  };
}

void write_log(std::ostream& out, const ConvergenceLog& log) {
  for (const auto& [k, v] : log.header) out << "# " << k << '=' << v << '\n';
  out << kLogColumns << '\n';
  for (const IterationRecord& r : log.rows) {
    out << r.index << ',' << format_double(r.f_value) << ',' << format_double(r.riemannian_grad_norm) << ','
        << format_double(r.step_norm) << ',' << r.krylov_iterations << ',' << format_double(r.residual_of_newton_eq)
        << ',' << format_double(r.wall_time_ms) << '\n';
  }
}

FactorPair truncated_svd_factors(const Matrix& a, Eigen::Index p) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector root = svd.singularValues().head(p).cwiseSqrt();
  return {svd.matrixU().leftCols(p) * root.asDiagonal(), svd.matrixV().leftCols(p) * root.asDiagonal()};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  Random rng(cfg.seed);
  NewtonConfig nc = cfg.newton;
  const bool completion = cfg.objective == ObjectiveKind::kCompletion;
  nc.warmstart_steps = cfg.warmstart >= 0 ? cfg.warmstart : (completion ? 10 : 0);
  ExperimentResult r = completion ? run_completion(cfg, rng, nc) : run_approx(cfg, rng, nc);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace fixedrank
