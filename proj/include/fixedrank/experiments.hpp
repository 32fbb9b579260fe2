#pragma once

// Desk-scale experiment drivers behind `fixedrank approx` and
// `fixedrank complete`, their flat key=value configuration format, and the
// CSV convergence log.
//
// Config files hold one `key = value` per line; `#` starts a comment.
// Keys (defaults in parentheses):
//   geometry      balanced | stiefel                 (balanced)
//   objective     approx | completion                (approx)
//   m, n, p       dimensions                         (20, 15, 3)
//   seed          RNG seed                           (1)
//   rank          rank of synthetic truth, 0 = dense (0 for approx, p for completion)
//   noise         std. dev. of additive noise        (0)
//   sampling      fraction of observed entries       (0.35)
//   perturbation  size of the start perturbation    (0.01)
//   input, mask   MatrixMarket files                 (none)
//   out           CSV log path                       (none)
//   warmstart     gradient steps before Newton      (0 for approx, 10 for completion)
//   max_outer, grad_tol, damped, krylov_tol, krylov_max
//                 Newton overrides

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fixedrank/newton.hpp"

namespace fixedrank {

enum class GeometryKind { kBalanced, kStiefel };
enum class ObjectiveKind { kApprox, kCompletion };

std::string_view to_string(GeometryKind g);
std::string_view to_string(ObjectiveKind o);

struct ExperimentConfig {
  GeometryKind geometry = GeometryKind::kBalanced;
  ObjectiveKind objective = ObjectiveKind::kApprox;
  Eigen::Index m = 20, n = 15, p = 3;
  std::uint64_t seed = 1;
  Eigen::Index rank = -1;  // -1: objective default
  double noise = 0.0;
  double sampling = 0.35;
  double perturbation = 1e-2;
  std::string input;
  std::string mask;
  std::string out;
  int warmstart = -1;  // -1: objective default; overrides newton.warmstart_steps
  NewtonConfig newton;
};

/// Applies one key/value pair. Throws ParseError (line 0) on an unknown key
/// or a malformed value.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Reads a config file over `cfg`. Errors carry the 1-based line.
void read_config(std::istream& in, ExperimentConfig& cfg);
void load_config(const std::string& path, ExperimentConfig& cfg);

/// Throws DimensionError if p > min(m, n), a dimension is not positive, or
/// sampling is outside (0, 1].
void validate(const ExperimentConfig& cfg);

/// Every key with its current value, in a form read_config accepts.
std::vector<std::pair<std::string, std::string>> config_echo(const ExperimentConfig& cfg);

struct ConvergenceLog {
  std::vector<std::pair<std::string, std::string>> header;
  std::vector<IterationRecord> rows;
};

inline constexpr const char* kLogColumns = "iter,f,grad_norm,step_norm,krylov_iters,newton_residual,time_ms";

/// `# key=value` header lines, the column line, then one row per record.
/// Doubles are written in shortest round-trip form.
void write_log(std::ostream& out, const ConvergenceLog& log);

struct ExperimentResult {
  ConvergenceLog log;
  NewtonStatus status = NewtonStatus::kMaxIter;
  int warmstart_steps = 0;
  int newton_iterations = 0;
  double final_grad = 0.0;
  double final_f = 0.0;
  Matrix product;
  std::vector<Matrix> iterates;  // Xₖ for every log row
  double seconds = 0.0;

  // approx
  std::optional<double> oracle_distance;
  std::vector<double> errors;      // ‖Xₖ − X*‖_F per iterate
  std::vector<double> log_ratios;  // log(e_{k+1}) / log(e_k)
  std::optional<double> fitted_c;  // max e_{k+1}/e_k² above the rounding floor

  // completion
  std::optional<double> training_residual;  // ‖P_Ω(X − A)‖ / ‖P_Ω(A)‖
  std::optional<double> heldout_rmse;

  bool converged() const { return status == NewtonStatus::kConverged; }
};

/// Runs the experiment described by cfg (validated first). Synthetic data
/// and the start perturbation draw from one generator seeded by cfg.seed.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Best rank-p approximation of a (truncated SVD), as balanced factors
/// U√Σ, V√Σ.
FactorPair truncated_svd_factors(const Matrix& a, Eigen::Index p);

}  // namespace fixedrank
