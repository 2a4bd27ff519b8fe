#pragma once

#include <span>
#include <vector>

namespace qrac::dist {

// Uniform Dirac mixture: N adjustable atom locations, each carrying mass 1/N.
// Atoms are unordered; network outputs are unconstrained.
struct QuantileDistribution {
    std::vector<double> atoms;
};

// Fixed quantile midpoints (2i-1)/(2N), i = 1..N.
std::vector<double> quantile_midpoints(int n);

double mean_of(const QuantileDistribution& d);

// Exact 1-Wasserstein distance between two equal-count uniform Dirac
// mixtures: mean absolute difference of sorted atoms.
double wasserstein1(const QuantileDistribution& a, const QuantileDistribution& b);

struct QuantileHuberResult {
    double loss = 0.0;
    std::vector<double> grad_atoms; // d loss / d predicted atom
};

// Asymmetric Huber quantile loss, averaged over the N x M atom/target grid:
//   rho^k_tau(u) = |tau - 1{u < 0}| * L_k(u) / k,  u = target - atom.
QuantileHuberResult quantile_huber_loss(std::span<const double> predicted_atoms,
                                        std::span<const double> target_samples,
                                        std::span<const double> midpoints, double kappa);

// n-step distributional target samples: sum_k gamma^k r_k, plus gamma^n times
// each bootstrap atom unless the trajectory terminated.
std::vector<double> nstep_target(std::span<const double> rewards, double gamma,
                                 std::span<const double> bootstrap_atoms, bool terminal);

} // namespace qrac::dist
