#include "qrac/distributional.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qrac::dist {

std::vector<double> quantile_midpoints(int n) {
    if (n < 1) throw std::invalid_argument("atom count must be >= 1");
    std::vector<double> tau(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        tau[i] = (2.0 * i + 1.0) / (2.0 * n);
    }
    return tau;
}

double mean_of(const QuantileDistribution& d) {
    double sum = 0.0;
    for (double a : d.atoms) sum += a;
    return sum / static_cast<double>(d.atoms.size());
}

double wasserstein1(const QuantileDistribution& a, const QuantileDistribution& b) {
    if (a.atoms.size() != b.atoms.size()) {
        throw std::logic_error("wasserstein1 requires equal atom counts");
    }
    std::vector<double> sa = a.atoms;
    std::vector<double> sb = b.atoms;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    double acc = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) acc += std::fabs(sa[i] - sb[i]);
    return acc / static_cast<double>(sa.size());
}

QuantileHuberResult quantile_huber_loss(std::span<const double> predicted_atoms,
                                        std::span<const double> target_samples,
                                        std::span<const double> midpoints, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be > 0");
    if (target_samples.empty()) throw std::invalid_argument("need at least one target sample");
    const std::size_t n = predicted_atoms.size();
    const std::size_t m = target_samples.size();
    QuantileHuberResult result;
    result.grad_atoms.assign(n, 0.0);
    const double inv_nm = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
    for (std::size_t i = 0; i < n; ++i) {
        const double tau = midpoints[i];
        for (std::size_t j = 0; j < m; ++j) {
            const double u = target_samples[j] - predicted_atoms[i];
            const double weight = std::fabs(tau - (u < 0.0 ? 1.0 : 0.0));
            double huber, dhuber; // L_k(u) and L_k'(u)
            if (std::fabs(u) <= kappa) {
                huber = 0.5 * u * u;
                dhuber = u;
            } else {
                huber = kappa * (std::fabs(u) - 0.5 * kappa);
                dhuber = kappa * (u > 0.0 ? 1.0 : -1.0);
            }
            result.loss += weight * huber / kappa * inv_nm;
            result.grad_atoms[i] -= weight * dhuber / kappa * inv_nm;
        }
    }
    return result;
}

std::vector<double> nstep_target(std::span<const double> rewards, double gamma,
                                 std::span<const double> bootstrap_atoms, bool terminal) {
    double discounted = 0.0;
    double g = 1.0;
    for (double r : rewards) {
        discounted += g * r;
        g *= gamma;
    }
    std::vector<double> target(bootstrap_atoms.size(), discounted);
    if (!terminal) {
        for (std::size_t j = 0; j < target.size(); ++j) {
            target[j] += g * bootstrap_atoms[j];
        }
    }
    return target;
}

} // namespace qrac::dist
