#ifndef PERIGP_DBSCAN_HPP
#define PERIGP_DBSCAN_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <vector>

namespace perigp {

// Raised by elbow_eps when the k-distance curve carries no geometry to
// place a knee on (all pairwise distances zero).
struct DegenerateGeometry : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ClusterLabeling {
    static constexpr int kNoise = -1;

    std::vector<int> labels;  // cluster id in [0, n_clusters) or kNoise
    int n_clusters = 0;

    std::size_t cluster_size(int cluster) const {
        return static_cast<std::size_t>(
            std::count(labels.begin(), labels.end(), cluster));
    }
};

namespace detail {

template <std::size_t Dim>
double squared_dist(const std::array<double, Dim>& a,
                    const std::array<double, Dim>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < Dim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

// Classic DBSCAN with Euclidean distances and exact pairwise neighbor
// search. A point is core when it has at least min_samples neighbors
// within eps, itself included. Clusters are discovered by scanning points
// in ascending index order and expanding breadth-first, so a border point
// reachable from several clusters deterministically joins the one whose
// seed appears first.
template <std::size_t Dim>
ClusterLabeling dbscan(const std::vector<std::array<double, Dim>>& points,
                       double eps, std::size_t min_samples) {
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
    if (min_samples < 1) throw std::invalid_argument("min_samples must be >= 1");

    const std::size_t n = points.size();
    ClusterLabeling out;
    constexpr int kUnvisited = -2;
    out.labels.assign(n, kUnvisited);
    if (n == 0) return out;

    const double eps_sq = eps * eps;
    std::vector<std::size_t> neighbors;
    const auto region_query = [&](std::size_t i) {
        neighbors.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (detail::squared_dist(points[i], points[j]) <= eps_sq)
                neighbors.push_back(j);
    };

    int cluster = 0;
    std::deque<std::size_t> seeds;
    for (std::size_t i = 0; i < n; ++i) {
        if (out.labels[i] != kUnvisited) continue;
        region_query(i);
        if (neighbors.size() < min_samples) {
            out.labels[i] = ClusterLabeling::kNoise;
            continue;
        }
        out.labels[i] = cluster;
        seeds.assign(neighbors.begin(), neighbors.end());
        while (!seeds.empty()) {
            const std::size_t j = seeds.front();
            seeds.pop_front();
            if (out.labels[j] == ClusterLabeling::kNoise)
                out.labels[j] = cluster;  // border point, previously noise
            if (out.labels[j] != kUnvisited) continue;
            out.labels[j] = cluster;
            region_query(j);
            if (neighbors.size() >= min_samples)
                seeds.insert(seeds.end(), neighbors.begin(), neighbors.end());
        }
        ++cluster;
    }
    out.n_clusters = cluster;
    return out;
}

// Knee of a descending curve: the index maximizing the perpendicular
// distance to the chord joining the first and last points. Both axes are
// normalized to [0,1] first so the result does not depend on the units of
// either axis.
inline std::size_t knee_index(const std::vector<double>& descending) {
    const std::size_t m = descending.size();
    if (m == 0) throw std::invalid_argument("knee of empty curve");
    if (m == 1) return 0;
    const double head = descending.front();
    const double tail = descending.back();
    const double drop = head - tail;
    if (!(drop > 0.0)) return 0;  // flat curve: every index is equivalent

    // Chord in normalized coordinates runs from (0,1) to (1,0); the
    // distance of (x,y) to it is |x + y - 1| / sqrt(2).
    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(m - 1);
        const double y = (descending[i] - tail) / drop;
        const double dist = std::abs(x + y - 1.0);
        if (dist > best_dist) {
            best_dist = dist;
            best = i;
        }
    }
    return best;
}

// Data-driven eps selection: sort every point's distance to its k-th
// nearest neighbor (self excluded) in descending order and return the
// value at the knee of that curve.
template <std::size_t Dim>
double elbow_eps(const std::vector<std::array<double, Dim>>& points,
                 std::size_t k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (points.size() <= k)
        throw std::invalid_argument("elbow_eps needs more than k points");

    const std::size_t n = points.size();
    std::vector<double> kdist(n);
    std::vector<double> dists;
    dists.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        dists.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) dists.push_back(detail::squared_dist(points[i], points[j]));
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        kdist[i] = std::sqrt(dists[k - 1]);
    }
    std::sort(kdist.begin(), kdist.end(), std::greater<>());
    if (!(kdist.front() > 0.0))
        throw DegenerateGeometry("k-distance curve is identically zero");
    return kdist[knee_index(kdist)];
}

}  // namespace perigp

#endif  // PERIGP_DBSCAN_HPP
