#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "advlab/losses.hpp"
#include "advlab/matrix.hpp"
#include "advlab/mlp.hpp"
#include "advlab/rng.hpp"

namespace advlab {

enum class AttackInit { natural, uniform, gaussian };

std::string_view to_string(AttackInit init);
AttackInit parse_attack_init(std::string_view text);

/// l_inf threat model and PGD parameters.
struct AttackSpec {
  double epsilon = 8.0 / 255.0;
  double alpha = 2.0 / 255.0;
  int steps = 10;
  AttackInit init = AttackInit::natural;
  double gaussian_std = 0.001;  // gamma, used when init == gaussian
  LossKind loss = LossKind::ce;
  bool clamp = true;  // keep iterates inside [0,1]^d

  /// Throws ConfigError on non-finite or out-of-range fields. epsilon = 0
  /// and alpha = 0 are accepted (degenerate attacks).
  void validate() const;

  static AttackSpec pgd(double epsilon, double alpha, int steps);
  static AttackSpec cw(double epsilon, double alpha, int steps);
  static AttackSpec fgsm(double epsilon, double alpha);
  static AttackSpec trades(double epsilon, double alpha, int steps, double gamma);
};

/// Elementwise clip into [origin - eps, origin + eps], then into [0,1] when
/// `clamp` is set.
DenseMatrix project(const DenseMatrix& x_adv, const DenseMatrix& x_origin, double epsilon, bool clamp);

/// Per-call knobs that are not part of the threat model.
struct AttackContext {
  StreamKey rng;  // row i draws from rng.child(row_offset + i)
  std::size_t row_offset = 0;
  std::size_t threads = 1;
  /// When set, receives for every row the number of iterates x^(0..K-1)
  /// classified as argmax(label) (GAIRAT's kappa).
  std::vector<int>* steps_correct = nullptr;
};

/// K projected sign-gradient ascent steps on CE or CW-margin loss against
/// (possibly soft) labels.
DenseMatrix pgd_attack(const MlpModel& model, const DenseMatrix& x, const DenseMatrix& soft_labels,
                       const AttackSpec& spec, const AttackContext& ctx = {});

/// FastAT attack: uniform start in the eps-ball, one projected sign step.
DenseMatrix fgsm_random(const MlpModel& model, const DenseMatrix& x, const DenseMatrix& soft_labels,
                        const AttackSpec& spec, const AttackContext& ctx = {});

/// TRADES inner maximisation: Gaussian start, K projected sign steps on
/// KL(softmax f(x) || softmax f(x_adv)) with f(x) frozen.
DenseMatrix trades_attack(const MlpModel& model, const DenseMatrix& x, const AttackSpec& spec,
                          const AttackContext& ctx = {});

/// Dispatches on spec.loss (ce / cw_margin -> pgd, kl -> trades).
DenseMatrix run_attack(const MlpModel& model, const DenseMatrix& x, const DenseMatrix& soft_labels,
                       const AttackSpec& spec, const AttackContext& ctx = {});

/// Throws ContractError unless |x_adv - x|_inf <= eps + 1e-12 and, with
/// clamp, x_adv lies in [0,1]^d.
void check_attack_output(const DenseMatrix& x_adv, const DenseMatrix& x, const AttackSpec& spec);

}  // namespace advlab
