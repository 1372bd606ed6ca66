#include <Eigen/Dense>
#include <random>

#include "metalab/errors.hpp"
#include "metalab/meta.hpp"

namespace metalab {

void ChainSpec::validate() const {
  const int m = size();
  if (m < 1) throw SchemaError("chain needs at least one state");
  for (int k = 0; k + 1 < m; ++k)
    if (gammas[k] < gammas[k + 1])
      throw SchemaError("chain exponents must be sorted descending");
  for (double g : gammas)
    if (!(g > 0)) throw SchemaError("chain exponents must be positive");
  if (q.rows() != m || q.cols() != m)
    throw SchemaError("q must be m x m");
  if (p0.size() != m) throw SchemaError("p0 must have m entries");
  double total = 0;
  for (int i = 0; i < m; ++i) {
    if (p0[i] < 0) throw SchemaError("p0 must be nonnegative");
    total += p0[i];
    double row = 0;
    for (int j = 0; j < m; ++j) {
      if (q(i, j) < 0) throw SchemaError("q must be nonnegative");
      if (i == j && q(i, j) != 0)
        throw SchemaError("q must have a zero diagonal");
      row += q(i, j);
    }
    if (m > 1 && std::fabs(row - 1.0) > 1e-9)
      throw SchemaError("q rows must sum to 1");
  }
  if (std::fabs(total - 1.0) > 1e-12)
    throw SchemaError("p0 must sum to 1 (1e-12)");
}

Eigen::VectorXd chain_hitting_distribution(const ChainSpec& chain, int l) {
  chain.validate();
  const int m = chain.size();
  if (l < 1 || l > m) throw SchemaError("l must be in [1, m]");
  Eigen::VectorXd out = chain.p0.head(l);
  const int nt = m - l;  // transient states l..m-1
  if (nt == 0) return out;

  // First-step analysis: absorption probabilities B = (I - Q_TT)^-1 Q_TA.
  Eigen::MatrixXd ident_minus_q =
      Eigen::MatrixXd::Identity(nt, nt) - chain.q.block(l, l, nt, nt);
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(ident_minus_q);
  Eigen::MatrixXd absorb = lu.solve(chain.q.block(l, 0, nt, l));
  if (!absorb.allFinite())
    throw AbsorptionFailure("transient block is singular to working precision");
  // Guard against a spectral radius >= 1 (defective q).
  double residual =
      (ident_minus_q * absorb - chain.q.block(l, 0, nt, l)).cwiseAbs().maxCoeff();
  if (residual > 1e-8)
    throw AbsorptionFailure("absorbing solve residual " +
                            std::to_string(residual));
  out += absorb.transpose() * chain.p0.tail(nt);
  return out;
}

Eigen::VectorXd chain_simulate(const ChainSpec& chain, int l, long n_samples,
                               std::uint64_t seed) {
  chain.validate();
  const int m = chain.size();
  if (l < 1 || l > m) throw SchemaError("l must be in [1, m]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](const Eigen::VectorXd& weights) {
    double r = u(rng) * weights.sum();
    for (int k = 0; k < weights.size(); ++k) {
      r -= weights[k];
      if (r <= 0) return k;
    }
    return static_cast<int>(weights.size() - 1);
  };
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(l);
  for (long s = 0; s < n_samples; ++s) {
    int state = draw(chain.p0);
    long guard = 0;
    while (state >= l) {
      state = draw(chain.q.row(state));
      if (++guard > 1000000)
        throw AbsorptionFailure("chain failed to absorb within 1e6 steps");
    }
    counts[state] += 1;
  }
  return counts / static_cast<double>(n_samples);
}

}  // namespace metalab
