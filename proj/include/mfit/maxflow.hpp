#pragma once

// Shortest-augmenting-path (Edmonds-Karp) max flow.

#include <algorithm>
#include <limits>
#include <queue>
#include <vector>

#include "mfit/errors.hpp"

namespace mfit {

class FlowGraph {
public:
    explicit FlowGraph(int nodes = 0) : adj_(nodes) {}

    int add_node() {
        adj_.emplace_back();
        return static_cast<int>(adj_.size()) - 1;
    }
    int node_count() const { return static_cast<int>(adj_.size()); }

    /// Directed edge u -> v with capacity cap, and v -> u with rev_cap.
    void add_edge(int u, int v, double cap, double rev_cap = 0.0) {
        if (cap < 0.0 || rev_cap < 0.0) throw InputError("negative capacity");
        if (u == v) return;
        adj_[u].push_back(static_cast<int>(arcs_.size()));
        arcs_.push_back({v, cap});
        adj_[v].push_back(static_cast<int>(arcs_.size()));
        arcs_.push_back({u, rev_cap});
    }

    /// Maximum s-t flow. Augments along BFS-shortest paths, scanning arcs in
    /// insertion order, so the result is deterministic.
    double max_flow(int s, int t) {
        double total = 0.0;
        const int n = node_count();
        std::vector<int> via(n);
        while (true) {
            std::fill(via.begin(), via.end(), -1);
            std::queue<int> q;
            q.push(s);
            via[s] = -2;
            while (!q.empty() && via[t] == -1) {
                const int u = q.front();
                q.pop();
                for (int a : adj_[u]) {
                    const int v = arcs_[a].to;
                    if (via[v] == -1 && arcs_[a].cap > kEps) {
                        via[v] = a;
                        q.push(v);
                    }
                }
            }
            if (via[t] == -1) break;
            double push = std::numeric_limits<double>::infinity();
            for (int v = t; v != s; v = arcs_[via[v] ^ 1].to) push = std::min(push, arcs_[via[v]].cap);
            for (int v = t; v != s; v = arcs_[via[v] ^ 1].to) {
                arcs_[via[v]].cap -= push;
                arcs_[via[v] ^ 1].cap += push;
            }
            total += push;
        }
        return total;
    }

    /// After max_flow: true for nodes reachable from s in the residual graph.
    std::vector<bool> source_side(int s) const {
        std::vector<bool> seen(node_count(), false);
        std::queue<int> q;
        q.push(s);
        seen[s] = true;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int a : adj_[u])
                if (!seen[arcs_[a].to] && arcs_[a].cap > kEps) {
                    seen[arcs_[a].to] = true;
                    q.push(arcs_[a].to);
                }
        }
        return seen;
    }

private:
    static constexpr double kEps = 1e-12;
    struct Arc {
        int to;
        double cap;
    };
    std::vector<std::vector<int>> adj_;
    std::vector<Arc> arcs_;
};

}  // namespace mfit
