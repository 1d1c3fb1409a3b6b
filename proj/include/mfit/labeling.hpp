#pragma once

// Multi-structure labeling energy and alpha-expansion with label costs.
//
//   E(f) = alpha sum_i D(i, f_i) + beta sum_{(i,j) in N} [f_i != f_j] + gamma #{structures used}
//
// D(i, l) = r_il for a structure label l >= 1 and D(i, 0) = sigma_{l*} with
// l* = argmin_l r_il (ties to the lower label). In scale-normalized units
// every cost is divided by the scale of the structure it refers to, so
// D(i, l) = r_il / sigma_l and D(i, 0) = 1.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mfit/delaunay.hpp"
#include "mfit/errors.hpp"
#include "mfit/maxflow.hpp"

namespace mfit {

struct EnergyWeights {
    double alpha = 1.0;
    double beta = 0.01;
    double gamma = 0.0;
};

enum class CostUnits { raw, scale_normalized };

struct Labeling {
    std::vector<int> labels;  // 0 = outlier, l = structure l
    double energy = 0.0;
};

/// Residuals r_il for N data and L structures (row-major, N x L) with the
/// structure scales.
struct LabelingProblem {
    int N = 0;
    int L = 0;
    std::vector<double> residuals;
    std::vector<double> scales;
    std::vector<Edge> edges;
    EnergyWeights weights;
    CostUnits units = CostUnits::raw;

    double r(int i, int l) const { return residuals[static_cast<std::size_t>(i) * L + (l - 1)]; }

    void validate() const {
        if (static_cast<int>(residuals.size()) != N * L) throw InputError("residual table has the wrong size");
        if (static_cast<int>(scales.size()) != L) throw InputError("one scale per structure is required");
        for (const auto& [a, b] : edges)
            if (a < 0 || b < 0 || a >= N || b >= N || a == b) throw InputError("invalid neighbor edge");
        if (weights.alpha < 0 || weights.beta < 0 || weights.gamma < 0) throw InputError("weights must be nonnegative");
        if (units == CostUnits::scale_normalized)
            for (double s : scales)
                if (!(s > 0.0)) throw InputError("normalized costs need positive scales");
    }
};

inline double data_cost(const LabelingProblem& p, int i, int label) {
    const bool unit = p.units == CostUnits::scale_normalized;
    if (label > 0) return unit ? p.r(i, label) / p.scales[label - 1] : p.r(i, label);
    if (p.L == 0) throw InputError("outlier cost needs at least one structure");
    if (unit) return 1.0;
    int best = 1;
    for (int l = 2; l <= p.L; ++l)
        if (p.r(i, l) < p.r(i, best)) best = l;
    return p.scales[best - 1];
}

inline double total_energy(const LabelingProblem& p, std::span<const int> f) {
    if (static_cast<int>(f.size()) != p.N) throw InputError("labeling length differs from data count");
    double data = 0.0;
    for (int i = 0; i < p.N; ++i) {
        if (f[i] < 0 || f[i] > p.L) throw InputError("label out of range");
        data += data_cost(p, i, f[i]);
    }
    double smooth = 0.0;
    for (const auto& [a, b] : p.edges) smooth += f[a] != f[b] ? 1.0 : 0.0;
    std::vector<bool> used(p.L + 1, false);
    for (int l : f) used[l] = true;
    int structures = 0;
    for (int l = 1; l <= p.L; ++l) structures += used[l];
    return p.weights.alpha * data + p.weights.beta * smooth + p.weights.gamma * structures;
}

/// Pseudo-boolean energy of binary variables, reduced to an s-t cut with
/// x = 0 on the source side and x = 1 on the sink side.
class BinaryEnergy {
public:
    explicit BinaryEnergy(int vars) : g_(vars + 2), e0_(vars, 0.0), e1_(vars, 0.0) {
        s_ = vars;
        t_ = vars + 1;
    }

    int add_var() {
        const int v = g_.add_node();
        // keep terminals at the end of the unary tables
        e0_.push_back(0.0);
        e1_.push_back(0.0);
        return v;
    }

    void add_unary(int v, double E0, double E1) {
        e0_[idx(v)] += E0;
        e1_[idx(v)] += E1;
    }

    /// Requires E00 + E11 <= E01 + E10.
    void add_pairwise(int i, int j, double E00, double E01, double E10, double E11) {
        const double C = E01 + E10 - E00 - E11;
        if (C < -1e-12) throw AlgorithmError("non-submodular pairwise term");
        constant_ += E00;
        add_unary(i, 0.0, E10 - E00);
        add_unary(j, 0.0, E11 - E10);
        if (C > 0.0) g_.add_edge(i, j, C);
    }

    /// Minimizes; returns x per variable and the minimum energy.
    std::vector<int> minimize(double* energy = nullptr) {
        double c = constant_;
        for (std::size_t k = 0; k < e0_.size(); ++k) {
            const int v = node(static_cast<int>(k));
            const double m = std::min(e0_[k], e1_[k]);
            c += m;
            if (e1_[k] - m > 0) g_.add_edge(s_, v, e1_[k] - m);
            if (e0_[k] - m > 0) g_.add_edge(v, t_, e0_[k] - m);
        }
        const double flow = g_.max_flow(s_, t_);
        const auto src = g_.source_side(s_);
        std::vector<int> x(e0_.size());
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = src[node(static_cast<int>(k))] ? 0 : 1;
        if (energy) *energy = c + flow;
        return x;
    }

private:
    // variables 0..vars-1 are graph nodes 0..vars-1; variables added later
    // follow the two terminals
    std::size_t idx(int node) const {
        return node < s_ ? static_cast<std::size_t>(node) : static_cast<std::size_t>(node - 2);
    }
    int node(int k) const { return k < s_ ? k : k + 2; }

    FlowGraph g_;
    int s_, t_;
    std::vector<double> e0_, e1_;
    double constant_ = 0.0;
};

struct ExpansionStats {
    int cycles = 0;
    int accepted_moves = 0;
    std::vector<double> move_energies;  // energy after each accepted move
    double initial_energy = 0.0;
};

/// Alpha-expansion over labels 0, 1, ..., L in fixed order, with the label
/// cost handled by auxiliary variables. A move is kept only when the exact
/// energy drops; stops after a full cycle without change.
inline Labeling alpha_expansion(const LabelingProblem& p, std::vector<int> f, ExpansionStats* stats = nullptr,
                                int max_cycles = 100) {
    p.validate();
    if (f.empty()) f.assign(p.N, 0);
    double E = total_energy(p, f);
    if (stats) stats->initial_energy = E;
    const auto& w = p.weights;
    std::vector<std::vector<int>> nbr(p.N);
    for (const auto& [a, b] : p.edges) nbr[a].push_back(b), nbr[b].push_back(a);

    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        bool changed = false;
        if (stats) stats->cycles = cycle + 1;
        for (int a = 0; a <= p.L; ++a) {
            // variables: data not already labeled a
            std::vector<int> var(p.N, -1), datum;
            for (int i = 0; i < p.N; ++i)
                if (f[i] != a) var[i] = static_cast<int>(datum.size()), datum.push_back(i);
            if (datum.empty()) continue;
            BinaryEnergy be(static_cast<int>(datum.size()));
            for (int k = 0; k < static_cast<int>(datum.size()); ++k) {
                const int i = datum[k];
                be.add_unary(k, w.alpha * data_cost(p, i, f[i]), w.alpha * data_cost(p, i, a));
            }
            for (const auto& [i, j] : p.edges) {
                if (var[i] >= 0 && var[j] >= 0) {
                    be.add_pairwise(var[i], var[j], w.beta * (f[i] != f[j]), w.beta * (f[i] != a),
                                    w.beta * (a != f[j]), 0.0);
                } else if (var[i] >= 0) {
                    be.add_unary(var[i], w.beta * (f[i] != a), 0.0);
                } else if (var[j] >= 0) {
                    be.add_unary(var[j], w.beta * (f[j] != a), 0.0);
                }
            }
            if (w.gamma > 0.0) {
                std::vector<std::vector<int>> members(p.L + 1);
                for (int i = 0; i < p.N; ++i) members[f[i]].push_back(i);
                for (int l = 1; l <= p.L; ++l) {
                    if (l == a || members[l].empty()) continue;
                    // gamma unless every datum of l switches to a
                    const int z = be.add_var();
                    be.add_unary(z, w.gamma, 0.0);
                    for (int i : members[l]) be.add_pairwise(z, var[i], 0.0, 0.0, w.gamma, 0.0);
                }
                if (a > 0 && members[a].empty()) {
                    // gamma if any datum switches to a
                    const int v = be.add_var();
                    be.add_unary(v, 0.0, w.gamma);
                    for (int k = 0; k < static_cast<int>(datum.size()); ++k)
                        be.add_pairwise(v, k, 0.0, w.gamma, 0.0, 0.0);
                }
            }
            const auto x = be.minimize();
            std::vector<int> g = f;
            bool any = false;
            for (int k = 0; k < static_cast<int>(datum.size()); ++k)
                if (x[k] == 1) g[datum[k]] = a, any = true;
            if (!any) continue;
            const double Eg = total_energy(p, g);
            if (Eg < E - 1e-12 * std::max(1.0, std::abs(E))) {
                f = std::move(g);
                E = Eg;
                changed = true;
                if (stats) {
                    ++stats->accepted_moves;
                    stats->move_energies.push_back(E);
                }
            }
        }
        if (!changed) break;
    }
    return {std::move(f), E};
}

}  // namespace mfit
