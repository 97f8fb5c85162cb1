#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "advrl/envs/mdp_spec.hpp"
#include "advrl/policy/policy.hpp"

namespace advrl::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kConfigError = 3,
  kNumericAbort = 4,
  kVerifyFailed = 5,
  kLoadError = 6,
};

/// Output directories given as relative paths are placed under this
/// environment variable when it is set.
inline constexpr const char* kOutputRootVar = "ADVRL_OUTPUT_ROOT";

/// Entry point of the `advrl` binary. Never throws; returns an ExitCode.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct LoadedModel {
  policy::PolicyNet policy;
  /// {id, params} of the environment the model was trained on.
  nlohmann::json env;
};

/// Reads the policy from a trainer checkpoint. Throws LoadError.
LoadedModel load_model(const std::string& path);

struct VerifyOptions {
  std::vector<double> entropy_floors{0.1, 0.3, 0.6};
  double epsilon = 0.1;
  double grid_pitch = 0.01;
  std::uint64_t seed = 0;
  std::size_t certificate_samples = 200;
  /// Test hook: reverses every Q row handed to the critic objective.
  bool corrupt_q = false;
};

struct PropertyResult {
  std::string name;
  bool passed = false;
  /// Worst observed value of the checked quantity.
  double value = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Softmax fixed point, temperature inverse, local optimality and
/// critic/policy attack equivalence on an enumerated MDP, once per floor.
std::vector<PropertyResult> verify_suite(const envs::MdpSpec& mdp, const VerifyOptions& opts);

/// Brute-force argmax sets of the critic objective (with `q_row`) and the
/// CE objective intersect for `net` at `obs`.
bool attack_argmax_sets_intersect(const policy::PolicyNet& net, const std::vector<double>& obs,
                                  const std::vector<double>& q_row, double epsilon, double grid_pitch);

/// Net with 2-D input whose clean logits at `obs` are q_row / mu (up to a
/// shift), built from `base` by adjusting the output bias.
policy::PolicyNet softmax_consistent_net(policy::PolicyNet base, const std::vector<double>& obs,
                                         const std::vector<double>& q_row, double mu);

}  // namespace advrl::cli
