#pragma once

// Discrete brute-force checks relating mutual information between an identity
// embedding h and an observation z to the minimum mean-squared error of
// estimating h from z.

#include <string>
#include <vector>

namespace arfp {

using Vec = std::vector<double>;

inline constexpr int kMaxAlphabet = 64;

struct DiscreteJoint {
    std::vector<Vec> h;  // support points h_i, all of dimension d
    int nz = 0;          // size of the z alphabet
    std::vector<double> p;  // row-major p(i, j), i over h, j over z

    int nh() const { return static_cast<int>(h.size()); }
    int dim() const { return h.empty() ? 0 : static_cast<int>(h[0].size()); }
    double prob(int i, int j) const { return p[static_cast<std::size_t>(i) * nz + j]; }
    // Throws invalid_argument unless p >= 0, sums to 1 within 1e-12, and shapes agree.
    void validate() const;
    Vec h_marginal() const;
    Vec z_marginal() const;
};

// est[j] is the estimate returned when z_j is observed.
using Estimator = std::vector<Vec>;

double estimator_risk(const DiscreteJoint& joint, const Estimator& est);
Estimator optimal_estimator(const DiscreteJoint& joint);
double mmse(const DiscreteJoint& joint);
double mutual_information(const DiscreteJoint& joint);  // bits

double total_variance(const DiscreteJoint& joint);             // E||h - E h||^2
double conditional_mean_variance(const DiscreteJoint& joint);  // E||E[h|z] - E h||^2

// h uniform over the anchors; z is h's index sent through a symmetric channel
// that keeps it with probability coupling and otherwise redraws uniformly, so
// p(z != i | h_i) = (1 - coupling)(K - 1)/K and the h-marginal never changes.
DiscreteJoint symmetric_channel_joint(const std::vector<Vec>& anchors, double coupling);

struct LeakageRow {
    double coupling;
    double mi_bits;
    double mmse;
};

// Couplings 1, 1 - 1/(points-1), ..., 0 over two anchor vectors in R^2.
std::vector<LeakageRow> leakage_demo(int points = 11);
std::vector<LeakageRow> leakage_demo(const std::vector<Vec>& anchors, int points);
std::string leakage_csv(const std::vector<LeakageRow>& rows);

}  // namespace arfp
