#pragma once

// Bowyer-Watson Delaunay triangulation and the induced neighbor graph.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <utility>
#include <vector>

namespace mfit {

struct Point2 {
    double x = 0.0, y = 0.0;
};

using Edge = std::pair<int, int>;  // first < second

struct Triangulation {
    std::vector<std::array<int, 3>> triangles;  // counter-clockwise, input indices
    std::vector<Edge> edges;                    // sorted, unique
};

namespace detail {

inline constexpr long double kPredicateEps = 1e-12L;

inline long double orient(const Point2& a, const Point2& b, const Point2& c) {
    return (static_cast<long double>(b.x) - a.x) * (static_cast<long double>(c.y) - a.y) -
           (static_cast<long double>(b.y) - a.y) * (static_cast<long double>(c.x) - a.x);
}

/// > 0 when d lies strictly inside the circumcircle of the ccw triangle abc.
inline long double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
    const long double adx = static_cast<long double>(a.x) - d.x, ady = static_cast<long double>(a.y) - d.y;
    const long double bdx = static_cast<long double>(b.x) - d.x, bdy = static_cast<long double>(b.y) - d.y;
    const long double cdx = static_cast<long double>(c.x) - d.x, cdy = static_cast<long double>(c.y) - d.y;
    const long double ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
    return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

inline Edge make_edge(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

/// Monotone-chain convex hull, counter-clockwise, collinear points dropped.
inline std::vector<int> convex_hull(const std::vector<Point2>& p, std::vector<int> idx) {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return p[a].x != p[b].x ? p[a].x < p[b].x : p[a].y < p[b].y; });
    if (idx.size() < 3) return idx;
    std::vector<int> h(2 * idx.size());
    std::size_t k = 0;
    for (int i : idx) {
        while (k >= 2 && orient(p[h[k - 2]], p[h[k - 1]], p[i]) <= 0) --k;
        h[k++] = i;
    }
    for (std::size_t t = idx.size() - 1, lo = k + 1; t-- > 0;) {
        const int i = idx[t];
        while (k >= lo && orient(p[h[k - 2]], p[h[k - 1]], p[i]) <= 0) --k;
        h[k++] = i;
    }
    h.resize(k - 1);
    return h;
}

}  // namespace detail

/// Delaunay triangulation. Exact duplicates are merged onto their first
/// occurrence and inherit its edges (plus an edge to it). Fewer than three
/// distinct or all-collinear points give a chain over the (x, y) order.
inline Triangulation delaunay(const std::vector<Point2>& pts) {
    Triangulation out;
    const int n = static_cast<int>(pts.size());
    std::vector<int> rep(n);
    std::map<std::pair<double, double>, int> first;
    std::vector<int> uniq;
    for (int i = 0; i < n; ++i) {
        auto [it, fresh] = first.emplace(std::make_pair(pts[i].x, pts[i].y), i);
        rep[i] = it->second;
        if (fresh) uniq.push_back(i);
    }

    std::set<Edge> edges;
    bool collinear = true;
    for (std::size_t k = 2; k < uniq.size() && collinear; ++k)
        if (std::abs(detail::orient(pts[uniq[0]], pts[uniq[1]], pts[uniq[k]])) > detail::kPredicateEps) collinear = false;

    if (uniq.size() < 3 || collinear) {
        std::vector<int> order = uniq;
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return pts[a].x != pts[b].x ? pts[a].x < pts[b].x : pts[a].y < pts[b].y; });
        for (std::size_t k = 1; k < order.size(); ++k) edges.insert(detail::make_edge(order[k - 1], order[k]));
    } else {
        // super triangle enclosing all points
        double minx = INFINITY, miny = INFINITY, maxx = -INFINITY, maxy = -INFINITY;
        for (int i : uniq) {
            minx = std::min(minx, pts[i].x), maxx = std::max(maxx, pts[i].x);
            miny = std::min(miny, pts[i].y), maxy = std::max(maxy, pts[i].y);
        }
        const double span = std::max({maxx - minx, maxy - miny, 1e-9});
        const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
        std::vector<Point2> P = pts;
        const int s0 = n, s1 = n + 1, s2 = n + 2;
        P.push_back({cx - 100 * span, cy - 100 * span});
        P.push_back({cx + 100 * span, cy - 100 * span});
        P.push_back({cx, cy + 100 * span});

        std::vector<std::array<int, 3>> tris{{s0, s1, s2}};
        for (int i : uniq) {
            std::vector<std::array<int, 3>> keep;
            std::map<Edge, int> boundary;  // edge -> occurrence count
            std::map<Edge, std::pair<int, int>> directed;
            for (const auto& t : tris) {
                if (detail::incircle(P[t[0]], P[t[1]], P[t[2]], P[i]) > detail::kPredicateEps) {
                    for (int e = 0; e < 3; ++e) {
                        const int a = t[e], b = t[(e + 1) % 3];
                        const Edge key = detail::make_edge(a, b);
                        ++boundary[key];
                        directed[key] = {a, b};
                    }
                } else {
                    keep.push_back(t);
                }
            }
            for (const auto& [key, cnt] : boundary) {
                if (cnt != 1) continue;
                const auto [a, b] = directed[key];
                if (detail::orient(P[a], P[b], P[i]) > 0) keep.push_back({a, b, i});
            }
            tris = std::move(keep);
        }
        for (const auto& t : tris) {
            if (t[0] >= n || t[1] >= n || t[2] >= n) continue;
            out.triangles.push_back(t);
            for (int e = 0; e < 3; ++e) edges.insert(detail::make_edge(t[e], t[(e + 1) % 3]));
        }
        // the finite super triangle can leave hull edges uncovered
        const auto hull = detail::convex_hull(pts, uniq);
        for (std::size_t k = 0; k < hull.size(); ++k) edges.insert(detail::make_edge(hull[k], hull[(k + 1) % hull.size()]));
    }

    // duplicates share the edges of their representative
    std::map<int, std::vector<int>> dups;
    for (int i = 0; i < n; ++i)
        if (rep[i] != i) dups[rep[i]].push_back(i);
    std::set<Edge> all = edges;
    for (const auto& [r, members] : dups) {
        for (int m : members) {
            all.insert(detail::make_edge(r, m));
            for (const auto& e : edges) {
                if (e.first == r) all.insert(detail::make_edge(m, e.second));
                if (e.second == r) all.insert(detail::make_edge(e.first, m));
            }
        }
    }
    out.edges.assign(all.begin(), all.end());
    return out;
}

inline std::vector<Edge> delaunay_edges(const std::vector<Point2>& pts) { return delaunay(pts).edges; }

}  // namespace mfit
