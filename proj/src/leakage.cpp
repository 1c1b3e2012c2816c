#include "arfp/leakage.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace arfp {

namespace {

double sq_dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

Vec mean_h(const DiscreteJoint& j) {
    const Vec ph = j.h_marginal();
    Vec m(static_cast<std::size_t>(j.dim()), 0.0);
    for (int i = 0; i < j.nh(); ++i)
        for (int k = 0; k < j.dim(); ++k) m[static_cast<std::size_t>(k)] += ph[static_cast<std::size_t>(i)] * j.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
    return m;
}

}  // namespace

void DiscreteJoint::validate() const {
    if (h.empty() || nz <= 0) throw std::invalid_argument("joint: empty support");
    if (nh() > kMaxAlphabet || nz > kMaxAlphabet) throw std::invalid_argument("joint: alphabet larger than 64 symbols");
    const std::size_t d = h[0].size();
    if (d == 0) throw std::invalid_argument("joint: zero-dimensional support points");
    for (const Vec& v : h)
        if (v.size() != d) throw std::invalid_argument("joint: support points of unequal dimension");
    if (p.size() != h.size() * static_cast<std::size_t>(nz)) throw std::invalid_argument("joint: table size mismatch");
    double s = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("joint: negative or non-finite probability");
        s += v;
    }
    if (std::fabs(s - 1.0) > 1e-12) throw std::invalid_argument("joint: probabilities do not sum to 1");
}

Vec DiscreteJoint::h_marginal() const {
    Vec m(h.size(), 0.0);
    for (int i = 0; i < nh(); ++i)
        for (int j = 0; j < nz; ++j) m[static_cast<std::size_t>(i)] += prob(i, j);
    return m;
}

Vec DiscreteJoint::z_marginal() const {
    Vec m(static_cast<std::size_t>(nz), 0.0);
    for (int i = 0; i < nh(); ++i)
        for (int j = 0; j < nz; ++j) m[static_cast<std::size_t>(j)] += prob(i, j);
    return m;
}

double estimator_risk(const DiscreteJoint& joint, const Estimator& est) {
    joint.validate();
    if (static_cast<int>(est.size()) != joint.nz)
        throw std::invalid_argument("estimator does not cover the z support");
    for (const Vec& v : est)
        if (static_cast<int>(v.size()) != joint.dim()) throw std::invalid_argument("estimator output dimension mismatch");
    double r = 0.0;
    for (int i = 0; i < joint.nh(); ++i)
        for (int j = 0; j < joint.nz; ++j)
            r += joint.prob(i, j) * sq_dist(est[static_cast<std::size_t>(j)], joint.h[static_cast<std::size_t>(i)]);
    return r;
}

Estimator optimal_estimator(const DiscreteJoint& joint) {
    joint.validate();
    const Vec pz = joint.z_marginal();
    Estimator est(static_cast<std::size_t>(joint.nz), Vec(static_cast<std::size_t>(joint.dim()), 0.0));
    for (int j = 0; j < joint.nz; ++j) {
        if (pz[static_cast<std::size_t>(j)] <= 0.0)
            throw std::invalid_argument("optimal_estimator: z symbol " + std::to_string(j) + " has zero probability");
        for (int i = 0; i < joint.nh(); ++i) {
            const double w = joint.prob(i, j) / pz[static_cast<std::size_t>(j)];
            for (int k = 0; k < joint.dim(); ++k)
                est[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] += w * joint.h[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        }
    }
    return est;
}

double mmse(const DiscreteJoint& joint) { return estimator_risk(joint, optimal_estimator(joint)); }

double mutual_information(const DiscreteJoint& joint) {
    joint.validate();
    const Vec ph = joint.h_marginal(), pz = joint.z_marginal();
    double mi = 0.0;
    for (int i = 0; i < joint.nh(); ++i)
        for (int j = 0; j < joint.nz; ++j) {
            const double pij = joint.prob(i, j);
            if (pij > 0.0) mi += pij * std::log2(pij / (ph[static_cast<std::size_t>(i)] * pz[static_cast<std::size_t>(j)]));
        }
    return mi < 0.0 ? 0.0 : mi;
}

double total_variance(const DiscreteJoint& joint) {
    joint.validate();
    const Vec m = mean_h(joint);
    const Vec ph = joint.h_marginal();
    double v = 0.0;
    for (int i = 0; i < joint.nh(); ++i) v += ph[static_cast<std::size_t>(i)] * sq_dist(joint.h[static_cast<std::size_t>(i)], m);
    return v;
}

double conditional_mean_variance(const DiscreteJoint& joint) {
    const Estimator est = optimal_estimator(joint);
    const Vec m = mean_h(joint);
    const Vec pz = joint.z_marginal();
    double v = 0.0;
    for (int j = 0; j < joint.nz; ++j) v += pz[static_cast<std::size_t>(j)] * sq_dist(est[static_cast<std::size_t>(j)], m);
    return v;
}

DiscreteJoint symmetric_channel_joint(const std::vector<Vec>& anchors, double coupling) {
    if (anchors.size() < 2) throw std::invalid_argument("symmetric channel needs at least two anchors");
    if (!(coupling >= 0.0 && coupling <= 1.0)) throw std::invalid_argument("coupling must lie in [0, 1]");
    const int K = static_cast<int>(anchors.size());
    DiscreteJoint j;
    j.h = anchors;
    j.nz = K;
    j.p.assign(static_cast<std::size_t>(K * K), 0.0);
    for (int i = 0; i < K; ++i)
        for (int z = 0; z < K; ++z)
            j.p[static_cast<std::size_t>(i * K + z)] = (1.0 / K) * (coupling * (i == z ? 1.0 : 0.0) + (1.0 - coupling) / K);
    j.validate();
    return j;
}

std::vector<LeakageRow> leakage_demo(int points) { return leakage_demo({{1.0, 0.0}, {0.0, 1.0}}, points); }

std::vector<LeakageRow> leakage_demo(const std::vector<Vec>& anchors, int points) {
    if (points < 2) throw std::invalid_argument("leakage_demo needs at least two coupling points");
    std::vector<LeakageRow> rows;
    for (int t = 0; t < points; ++t) {
        const double c = 1.0 - static_cast<double>(t) / (points - 1);
        const DiscreteJoint j = symmetric_channel_joint(anchors, c);
        rows.push_back({c, mutual_information(j), mmse(j)});
    }
    return rows;
}

std::string leakage_csv(const std::vector<LeakageRow>& rows) {
    std::string out = "coupling,MI_bits,MMSE\n";
    char buf[128];
    for (const LeakageRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.4f,%.12f,%.12f\n", r.coupling, r.mi_bits, r.mmse);
        out += buf;
    }
    return out;
}

}  // namespace arfp
