#pragma once
// The clustering suite: agglomerative (four linkages, full dendrogram),
// kmeans++/Lloyd, EM for diagonal-covariance Gaussian mixtures, PAM
// (BUILD+SWAP), Lloyd-style k-medoids, CLARA, k-modes on binarized data,
// and the accuracy-maximizing cluster-to-label mapping.
//
// Every fit is a deterministic function of (data, parameters, seed); all
// floating-point reductions run in a fixed sequential index order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rura/core.hpp"
#include "rura/embedding.hpp"

namespace rura::cluster {

struct ClusterAssignment {
    std::vector<int> labels;  // each in [0, k)
    std::size_t k = 0;
};

struct Merge {
    int cluster_a = 0;  // cluster_a < cluster_b
    int cluster_b = 0;
    double distance = 0.0;
    int new_cluster_id = 0;
};

// Leaves are 0..n-1, internal nodes n..2n-2, one merge per internal node.
struct Dendrogram {
    std::vector<Merge> merges;
};

enum class Linkage { single, complete, average, ward };

inline Linkage linkage_from_name(const std::string& name) {
    if (name == "single") return Linkage::single;
    if (name == "complete") return Linkage::complete;
    if (name == "average") return Linkage::average;
    if (name == "ward") return Linkage::ward;
    throw std::invalid_argument("unknown linkage '" + name + "'");
}

inline std::string linkage_name(Linkage l) {
    switch (l) {
        case Linkage::single: return "single";
        case Linkage::complete: return "complete";
        case Linkage::average: return "average";
        case Linkage::ward: return "ward";
    }
    return "?";
}

struct AggResult {
    Dendrogram dendrogram;
    ClusterAssignment assignment;
};

struct KMeansResult {
    Points centroids;
    ClusterAssignment assignment;
    std::vector<double> objective_trace;  // sum of squared distances, non-increasing
};

struct GmmModel {
    std::vector<double> weights;   // simplex over k
    Points means;                  // k x d
    Points variances;              // k x d, diagonal covariance, >= variance floor
    std::vector<double> log_likelihood_trace;
};

struct GmmResult {
    GmmModel model;
    ClusterAssignment assignment;
};

struct MedoidResult {
    std::vector<std::size_t> medoids;  // point indices, ascending
    ClusterAssignment assignment;
    double cost = 0.0;  // sum of distances to nearest medoid
};

struct KModesResult {
    Points modes;  // k x d, entries 0/1
    ClusterAssignment assignment;
    double cost = 0.0;  // total Hamming dissimilarity
};

struct MapResult {
    std::vector<std::string> cluster_labels;  // label per cluster id
    std::vector<std::string> mapped;          // mapped prediction per point
    double accuracy = 0.0;
};

inline double euclidean(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("euclidean: dimension mismatch");
    return std::sqrt(squared_l2(x, y));
}

inline constexpr double kGmmVarianceFloor = 1e-6;

namespace detail {

inline void check_points(const Points& points) {
    if (points.empty()) throw std::invalid_argument("empty point set");
    for (const auto& p : points)
        if (p.size() != points[0].size())
            throw std::invalid_argument("points have inconsistent dimensions");
}

inline std::vector<std::vector<double>> distance_matrix(const Points& points) {
    const std::size_t n = points.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = std::sqrt(squared_l2(points[i], points[j]));
            d[i][j] = v;
            d[j][i] = v;
        }
    return d;
}

// nearest center by squared distance, ties to the lowest index
inline int nearest_center_sq(const std::vector<double>& x, const Points& centers) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = squared_l2(x, centers[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Agglomerative clustering
// ---------------------------------------------------------------------------

// Builds the full dendrogram bottom-up (Lance-Williams updates), then cuts at
// k clusters for the assignment. Equal-distance ties pick the smallest
// (cluster_a, cluster_b) id pair.
inline AggResult agg_fit(const Points& points, std::size_t k, Linkage linkage) {
    detail::check_points(points);
    const std::size_t n = points.size();
    if (k < 1) throw std::invalid_argument("agg_fit: k must be >= 1");
    if (k > n) throw std::invalid_argument("agg_fit: k > n");

    auto dist = detail::distance_matrix(points);
    std::vector<bool> active(n, true);
    std::vector<int> cluster_id(n);
    std::vector<std::size_t> cluster_size(n, 1);
    for (std::size_t i = 0; i < n; ++i) cluster_id[i] = static_cast<int>(i);

    Dendrogram dendro;
    dendro.merges.reserve(n - 1);
    int next_id = static_cast<int>(n);

    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t sa = 0, sb = 0;
        double best = std::numeric_limits<double>::infinity();
        int best_lo = 0, best_hi = 0;
        bool found = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                const double d = dist[i][j];
                const int lo = std::min(cluster_id[i], cluster_id[j]);
                const int hi = std::max(cluster_id[i], cluster_id[j]);
                if (!found || d < best ||
                    (d == best && (lo < best_lo || (lo == best_lo && hi < best_hi)))) {
                    found = true;
                    best = d;
                    best_lo = lo;
                    best_hi = hi;
                    sa = i;
                    sb = j;
                }
            }
        }

        const std::size_t size_a = cluster_size[sa];
        const std::size_t size_b = cluster_size[sb];
        dendro.merges.push_back({best_lo, best_hi, best, next_id});

        // Lance-Williams update of distances from the merged cluster
        for (std::size_t c = 0; c < n; ++c) {
            if (!active[c] || c == sa || c == sb) continue;
            const double dac = dist[sa][c];
            const double dbc = dist[sb][c];
            double nd = 0.0;
            switch (linkage) {
                case Linkage::single: nd = std::min(dac, dbc); break;
                case Linkage::complete: nd = std::max(dac, dbc); break;
                case Linkage::average: {
                    const double wa = static_cast<double>(size_a);
                    const double wb = static_cast<double>(size_b);
                    nd = (wa * dac + wb * dbc) / (wa + wb);
                    break;
                }
                case Linkage::ward: {
                    const double na = static_cast<double>(size_a);
                    const double nb = static_cast<double>(size_b);
                    const double nc = static_cast<double>(cluster_size[c]);
                    const double t = na + nb + nc;
                    const double sq = ((na + nc) * dac * dac + (nb + nc) * dbc * dbc -
                                       nc * dist[sa][sb] * dist[sa][sb]) /
                                      t;
                    nd = std::sqrt(std::max(sq, 0.0));
                    break;
                }
            }
            dist[sa][c] = nd;
            dist[c][sa] = nd;
        }

        active[sb] = false;
        cluster_size[sa] = size_a + size_b;
        cluster_id[sa] = next_id++;
    }

    // cut: replay merges until k clusters remain
    std::vector<int> parent(2 * n - 1);
    std::iota(parent.begin(), parent.end(), 0);
    const auto find_root = [&](int x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    };
    const std::size_t merges_applied = n - k;
    for (std::size_t m = 0; m < merges_applied; ++m) {
        const auto& mg = dendro.merges[m];
        parent[find_root(mg.cluster_a)] = mg.new_cluster_id;
        parent[find_root(mg.cluster_b)] = mg.new_cluster_id;
    }
    std::vector<int> root_to_cluster(2 * n - 1, -1);
    std::vector<int> raw(n);
    int next_cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const int r = find_root(static_cast<int>(i));
        if (root_to_cluster[r] < 0) root_to_cluster[r] = next_cluster++;
        raw[i] = root_to_cluster[r];
    }
    AggResult out;
    out.dendrogram = std::move(dendro);
    out.assignment = ClusterAssignment{std::move(raw), k};
    return out;
}

// ---------------------------------------------------------------------------
// KMeans
// ---------------------------------------------------------------------------

namespace detail {

inline Points kmeanspp_init(const Points& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.size();
    Points centers;
    centers.reserve(k);
    centers.push_back(points[rng.uniform_index(n)]);
    std::vector<double> d2(n);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = squared_l2(points[i], centers[0]);
            for (std::size_t m = 1; m < centers.size(); ++m)
                best = std::min(best, squared_l2(points[i], centers[m]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_index(n);  // all remaining mass on duplicates
        } else {
            const double r = rng.uniform01() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (r < acc) {
                    pick = i;
                    break;
                }
            }
        }
        centers.push_back(points[pick]);
    }
    return centers;
}

} // namespace detail

inline KMeansResult kmeans_fit(const Points& points, std::size_t k, std::uint64_t seed,
                               std::size_t max_iter = 300, double tol = 1e-8) {
    detail::check_points(points);
    const std::size_t n = points.size();
    const std::size_t d = points[0].size();
    if (k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1");
    if (k > n) throw std::invalid_argument("kmeans_fit: k > n");

    Rng rng(derive_seed(seed, "kmeans"));
    Points centers = detail::kmeanspp_init(points, k, rng);

    std::vector<int> assign(n, -1);
    const auto assign_all = [&]() {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int c = detail::nearest_center_sq(points[i], centers);
            if (c != assign[i]) {
                assign[i] = c;
                changed = true;
            }
        }
        return changed;
    };
    const auto objective = [&]() {
        double j = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            j += squared_l2(points[i], centers[static_cast<std::size_t>(assign[i])]);
        return j;
    };

    KMeansResult out;
    assign_all();
    out.objective_trace.push_back(objective());

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // means per cluster
        Points sums(k, std::vector<double>(d, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assign[i]);
            ++counts[c];
            for (std::size_t j = 0; j < d; ++j) sums[c][j] += points[i][j];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            std::vector<double> mean(d);
            for (std::size_t j = 0; j < d; ++j)
                mean[j] = sums[c][j] / static_cast<double>(counts[c]);
            shift = std::max(shift, std::sqrt(squared_l2(mean, centers[c])));
            centers[c] = std::move(mean);
        }
        // an empty cluster takes the point farthest from its current center
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dd =
                    squared_l2(points[i], centers[static_cast<std::size_t>(assign[i])]);
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            centers[c] = points[far];
            shift = std::numeric_limits<double>::infinity();
        }

        const bool changed = assign_all();
        out.objective_trace.push_back(objective());
        if (!changed || shift < tol) break;
    }

    // guarantee non-empty clusters even on heavily duplicated inputs
    std::vector<std::size_t> counts(k, 0);
    for (int a : assign) ++counts[static_cast<std::size_t>(a)];
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] != 0) continue;
        std::size_t pick = n;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto ai = static_cast<std::size_t>(assign[i]);
            if (counts[ai] <= 1) continue;
            const double dd = squared_l2(points[i], centers[ai]);
            if (dd > far_d) {
                far_d = dd;
                pick = i;
            }
        }
        if (pick == n) continue;  // k > number of points with spare capacity
        --counts[static_cast<std::size_t>(assign[pick])];
        assign[pick] = static_cast<int>(c);
        ++counts[c];
        centers[c] = points[pick];
        out.objective_trace.push_back(objective());
    }

    out.centroids = std::move(centers);
    out.assignment = ClusterAssignment{std::move(assign), k};
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian mixture, diagonal covariance
// ---------------------------------------------------------------------------

inline GmmResult gmm_fit(const Points& points, std::size_t k, std::uint64_t seed,
                         std::size_t max_iter = 300, double tol = 1e-8) {
    detail::check_points(points);
    const std::size_t n = points.size();
    const std::size_t d = points[0].size();
    if (k < 1) throw std::invalid_argument("gmm_fit: k must be >= 1");
    if (k > n) throw std::invalid_argument("gmm_fit: k > n");

    // init from a kmeans fit
    const KMeansResult km = kmeans_fit(points, k, derive_seed(seed, "gmm_init"), max_iter, tol);
    GmmModel model;
    model.weights.assign(k, 0.0);
    model.means = km.centroids;
    model.variances.assign(k, std::vector<double>(d, 0.0));
    {
        std::vector<std::size_t> counts(k, 0);
        for (int a : km.assignment.labels) ++counts[static_cast<std::size_t>(a)];
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(km.assignment.labels[i]);
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = points[i][j] - model.means[c][j];
                model.variances[c][j] += diff * diff;
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            model.weights[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
            for (std::size_t j = 0; j < d; ++j) {
                model.variances[c][j] = counts[c] > 0
                                            ? model.variances[c][j] / static_cast<double>(counts[c])
                                            : 1.0;
                model.variances[c][j] = std::max(model.variances[c][j], kGmmVarianceFloor);
            }
        }
    }

    constexpr double kLog2Pi = 1.8378770664093454836;
    std::vector<std::vector<double>> resp(n, std::vector<double>(k, 0.0));
    std::vector<double> logw(k);

    const auto e_step = [&]() {
        for (std::size_t c = 0; c < k; ++c)
            logw[c] = model.weights[c] > 0.0 ? std::log(model.weights[c])
                                             : -std::numeric_limits<double>::infinity();
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double lp = logw[c];
                if (std::isfinite(lp)) {
                    for (std::size_t j = 0; j < d; ++j) {
                        const double var = model.variances[c][j];
                        const double diff = points[i][j] - model.means[c][j];
                        lp += -0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
                    }
                }
                resp[i][c] = lp;
                mx = std::max(mx, lp);
            }
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) sum += std::exp(resp[i][c] - mx);
            const double lse = mx + std::log(sum);
            for (std::size_t c = 0; c < k; ++c) resp[i][c] = std::exp(resp[i][c] - lse);
            ll += lse;
        }
        return ll;
    };

    double ll_prev = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0;; ++iter) {
        const double ll = e_step();
        model.log_likelihood_trace.push_back(ll);
        if (iter > 0 && ll - ll_prev < tol) break;
        if (iter >= max_iter) break;
        ll_prev = ll;

        // M-step
        for (std::size_t c = 0; c < k; ++c) {
            double nk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp[i][c];
            model.weights[c] = nk / static_cast<double>(n);
            if (nk < 1e-12) continue;  // dead component keeps its parameters
            std::vector<double> mean(d, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) mean[j] += resp[i][c] * points[i][j];
            for (std::size_t j = 0; j < d; ++j) mean[j] /= nk;
            std::vector<double> var(d, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = points[i][j] - mean[j];
                    var[j] += resp[i][c] * diff * diff;
                }
            for (std::size_t j = 0; j < d; ++j)
                var[j] = std::max(var[j] / nk, kGmmVarianceFloor);
            model.means[c] = std::move(mean);
            model.variances[c] = std::move(var);
        }
    }

    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (resp[i][c] > resp[i][best]) best = c;
        labels[i] = static_cast<int>(best);
    }

    GmmResult out;
    out.model = std::move(model);
    out.assignment = ClusterAssignment{std::move(labels), k};
    return out;
}

// responsibilities of a single point under a fitted model (used by tests)
inline std::vector<double> gmm_responsibilities(const GmmModel& model,
                                                const std::vector<double>& x) {
    const std::size_t k = model.weights.size();
    const std::size_t d = x.size();
    std::vector<double> lp(k);
    double mx = -std::numeric_limits<double>::infinity();
    constexpr double kLog2Pi = 1.8378770664093454836;
    for (std::size_t c = 0; c < k; ++c) {
        double v = model.weights[c] > 0.0 ? std::log(model.weights[c])
                                          : -std::numeric_limits<double>::infinity();
        if (std::isfinite(v)) {
            for (std::size_t j = 0; j < d; ++j) {
                const double var = model.variances[c][j];
                const double diff = x[j] - model.means[c][j];
                v += -0.5 * (kLog2Pi + std::log(var) + diff * diff / var);
            }
        }
        lp[c] = v;
        mx = std::max(mx, v);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(lp[c] - mx);
    for (std::size_t c = 0; c < k; ++c) lp[c] = std::exp(lp[c] - mx) / sum;
    return lp;
}

// ---------------------------------------------------------------------------
// Medoid methods: PAM, k-medoids, CLARA
// ---------------------------------------------------------------------------

namespace detail {

inline MedoidResult medoid_result_from_set(const Points& points,
                                           std::vector<std::size_t> medoids) {
    std::sort(medoids.begin(), medoids.end());
    const std::size_t n = points.size();
    const std::size_t k = medoids.size();
    std::vector<int> labels(n, 0);
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < k; ++m) {
            const double dd = std::sqrt(squared_l2(points[i], points[medoids[m]]));
            if (dd < best_d) {
                best_d = dd;
                best = m;
            }
        }
        labels[i] = static_cast<int>(best);
        cost += best_d;
    }
    // a medoid's own point always belongs to its slot, so duplicated points
    // chosen as medoids cannot leave a cluster empty
    for (std::size_t m = 0; m < k; ++m) labels[medoids[m]] = static_cast<int>(m);
    return MedoidResult{std::move(medoids), ClusterAssignment{std::move(labels), k}, cost};
}

} // namespace detail

namespace detail {

// best-improvement SWAP passes until no swap lowers the cost
inline void pam_swap_descent(const std::vector<std::vector<double>>& dist,
                             std::vector<std::size_t>& medoids, std::size_t max_iter) {
    const std::size_t n = dist.size();
    std::vector<bool> is_medoid(n, false);
    for (std::size_t m : medoids) is_medoid[m] = true;
    for (std::size_t pass = 0; pass < max_iter; ++pass) {
        // nearest and second-nearest medoid per point
        std::vector<double> d1(n, std::numeric_limits<double>::infinity());
        std::vector<double> d2(n, std::numeric_limits<double>::infinity());
        std::vector<std::size_t> n1(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t m = 0; m < medoids.size(); ++m) {
                const double dd = dist[i][medoids[m]];
                if (dd < d1[i]) {
                    d2[i] = d1[i];
                    d1[i] = dd;
                    n1[i] = m;
                } else if (dd < d2[i]) {
                    d2[i] = dd;
                }
            }
        }
        double best_delta = 0.0;
        std::size_t best_m = 0, best_c = 0;
        bool found = false;
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            for (std::size_t c = 0; c < n; ++c) {
                if (is_medoid[c]) continue;
                double delta = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double dic = dist[i][c];
                    if (n1[i] == m) {
                        delta += std::min(dic, d2[i]) - d1[i];
                    } else if (dic < d1[i]) {
                        delta += dic - d1[i];
                    }
                }
                if (delta < -1e-12 && (!found || delta < best_delta)) {
                    best_delta = delta;
                    best_m = m;
                    best_c = c;
                    found = true;
                }
            }
        }
        if (!found) break;
        is_medoid[medoids[best_m]] = false;
        medoids[best_m] = best_c;
        is_medoid[best_c] = true;
    }
}

inline double medoid_set_cost(const std::vector<std::vector<double>>& dist,
                              const std::vector<std::size_t>& medoids) {
    double cost = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t m : medoids) d = std::min(d, dist[i][m]);
        cost += d;
    }
    return cost;
}

} // namespace detail

// BUILD (greedy cost-minimizing medoid addition) followed by best-improvement
// SWAP passes until no swap improves the cost. SWAP is a local search, so a
// few extra seeded-random starts are descended as well and the cheapest
// medoid set wins; the BUILD+SWAP candidate is kept on ties. `restarts = 0`
// gives the bare textbook behavior.
inline MedoidResult pam_fit(const Points& points, std::size_t k, std::uint64_t seed = 0,
                            std::size_t max_iter = 300, std::size_t restarts = 9) {
    detail::check_points(points);
    const std::size_t n = points.size();
    if (k < 1) throw std::invalid_argument("pam_fit: k must be >= 1");
    if (k > n) throw std::invalid_argument("pam_fit: k > n");

    const auto dist = detail::distance_matrix(points);

    // BUILD
    std::vector<std::size_t> medoids;
    std::vector<bool> is_medoid(n, false);
    {
        std::size_t first = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i) s += dist[i][j];
            if (s < best) {
                best = s;
                first = j;
            }
        }
        medoids.push_back(first);
        is_medoid[first] = true;
    }
    std::vector<double> nearest(n);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = dist[i][medoids[0]];
    while (medoids.size() < k) {
        std::size_t pick = n;
        double pick_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            double cost = 0.0;
            for (std::size_t i = 0; i < n; ++i) cost += std::min(nearest[i], dist[i][c]);
            if (cost < pick_cost) {
                pick_cost = cost;
                pick = c;
            }
        }
        medoids.push_back(pick);
        is_medoid[pick] = true;
        for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist[i][pick]);
    }

    detail::pam_swap_descent(dist, medoids, max_iter);
    double best_cost = detail::medoid_set_cost(dist, medoids);

    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng(derive_seed(derive_seed(seed, "pam_restart"), r));
        std::vector<std::size_t> cand = rng.sample_indices(n, k);
        detail::pam_swap_descent(dist, cand, max_iter);
        const double cost = detail::medoid_set_cost(dist, cand);
        if (cost < best_cost - 1e-12) {
            best_cost = cost;
            medoids = std::move(cand);
        }
    }

    return detail::medoid_result_from_set(points, std::move(medoids));
}

// Lloyd-style alternation: assign to nearest medoid, recompute each cluster's
// medoid as its cost-minimizing member, repeat to fixpoint. Seeded random
// distinct initial medoids.
inline MedoidResult kmedoids_fit(const Points& points, std::size_t k, std::uint64_t seed,
                                 std::size_t max_iter = 300) {
    detail::check_points(points);
    const std::size_t n = points.size();
    if (k < 1) throw std::invalid_argument("kmedoids_fit: k must be >= 1");
    if (k > n) throw std::invalid_argument("kmedoids_fit: k > n");

    const auto dist = detail::distance_matrix(points);
    Rng rng(derive_seed(seed, "kmedoids"));
    std::vector<std::size_t> medoids = rng.sample_indices(n, k);
    std::sort(medoids.begin(), medoids.end());

    std::vector<int> labels(n, 0);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // assign; a medoid's own point stays in its cluster
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t m = 0; m < k; ++m) {
                const double dd = dist[i][medoids[m]];
                if (dd < best_d) {
                    best_d = dd;
                    best = m;
                }
            }
            labels[i] = static_cast<int>(best);
        }
        for (std::size_t m = 0; m < k; ++m) labels[medoids[m]] = static_cast<int>(m);

        // recompute medoids
        std::vector<std::size_t> next(k);
        for (std::size_t m = 0; m < k; ++m) {
            std::size_t best = medoids[m];
            double best_cost = std::numeric_limits<double>::infinity();
            for (std::size_t cand = 0; cand < n; ++cand) {
                if (labels[cand] != static_cast<int>(m)) continue;
                double cost = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    if (labels[i] == static_cast<int>(m)) cost += dist[cand][i];
                if (cost < best_cost) {
                    best_cost = cost;
                    best = cand;
                }
            }
            next[m] = best;
        }
        std::sort(next.begin(), next.end());
        if (next == medoids) break;
        medoids = std::move(next);
    }

    return detail::medoid_result_from_set(points, std::move(medoids));
}

// PAM on seeded subsamples, scored on the full data; the best medoid set
// wins. A sample_size >= n degenerates to plain PAM.
inline MedoidResult clara_fit(const Points& points, std::size_t k, std::size_t sample_size,
                              std::size_t n_samples, std::uint64_t seed) {
    detail::check_points(points);
    const std::size_t n = points.size();
    if (k < 1) throw std::invalid_argument("clara_fit: k must be >= 1");
    if (k > n) throw std::invalid_argument("clara_fit: k > n");
    if (sample_size < k) throw std::invalid_argument("clara_fit: sample_size < k");
    if (n_samples < 1) throw std::invalid_argument("clara_fit: n_samples must be >= 1");

    MedoidResult best;
    bool have_best = false;
    for (std::size_t s = 0; s < n_samples; ++s) {
        std::vector<std::size_t> sub;
        if (sample_size >= n) {
            sub.resize(n);
            std::iota(sub.begin(), sub.end(), 0);
        } else {
            Rng rng(derive_seed(derive_seed(seed, "clara"), s));
            sub = rng.sample_indices(n, sample_size);
            std::sort(sub.begin(), sub.end());
        }
        Points sub_points;
        sub_points.reserve(sub.size());
        for (std::size_t idx : sub) sub_points.push_back(points[idx]);
        const MedoidResult pam = pam_fit(sub_points, k, seed);
        std::vector<std::size_t> medoids;
        medoids.reserve(k);
        for (std::size_t m : pam.medoids) medoids.push_back(sub[m]);
        MedoidResult full = detail::medoid_result_from_set(points, std::move(medoids));
        if (!have_best || full.cost < best.cost) {
            best = std::move(full);
            have_best = true;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// KModes on binary data
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<std::uint8_t>> to_binary_rows(const Points& points) {
    std::vector<std::vector<std::uint8_t>> rows;
    rows.reserve(points.size());
    for (const auto& p : points) {
        std::vector<std::uint8_t> row;
        row.reserve(p.size());
        for (double v : p) {
            if (v == 0.0) row.push_back(0);
            else if (v == 1.0) row.push_back(1);
            else throw std::invalid_argument("kmodes_fit: non-binary input");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::size_t hamming(const std::vector<std::uint8_t>& a,
                           const std::vector<std::uint8_t>& b) {
    std::size_t h = 0;
    for (std::size_t i = 0; i < a.size(); ++i) h += a[i] != b[i];
    return h;
}

} // namespace detail

namespace detail {

struct KModesRun {
    std::vector<std::vector<std::uint8_t>> modes;
    std::vector<int> labels;
    double cost = 0.0;
};

// One alternation run from seeded initial modes (distinct row values first).
// The first assignment breaks Hamming ties by a seeded draw; later passes
// move a point only when a mode is strictly closer, so ties stay where they
// are and every change strictly lowers the cost (guaranteeing termination).
inline KModesRun kmodes_single(const std::vector<std::vector<std::uint8_t>>& rows, std::size_t k,
                               std::uint64_t seed, std::size_t max_iter) {
    const std::size_t n = rows.size();
    const std::size_t d = rows[0].size();

    Rng rng(seed);
    const std::vector<std::size_t> order = rng.sample_indices(n, n);
    std::vector<std::vector<std::uint8_t>> modes;
    std::vector<std::size_t> leftovers;
    for (std::size_t idx : order) {
        if (modes.size() == k) break;
        if (std::find(modes.begin(), modes.end(), rows[idx]) == modes.end())
            modes.push_back(rows[idx]);
        else
            leftovers.push_back(idx);
    }
    for (std::size_t t = 0; modes.size() < k; ++t) modes.push_back(rows[leftovers[t]]);

    std::vector<int> labels(n);
    std::vector<std::size_t> argmin;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best_h = SIZE_MAX;
        argmin.clear();
        for (std::size_t m = 0; m < k; ++m) {
            const std::size_t h = hamming(rows[i], modes[m]);
            if (h < best_h) {
                best_h = h;
                argmin.assign(1, m);
            } else if (h == best_h) {
                argmin.push_back(m);
            }
        }
        labels[i] = static_cast<int>(
            argmin[argmin.size() == 1 ? 0 : rng.uniform_index(argmin.size())]);
    }

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        // per-coordinate majority, tie -> 0; empty clusters keep their mode
        for (std::size_t m = 0; m < k; ++m) {
            std::size_t members = 0;
            std::vector<std::size_t> ones(d, 0);
            for (std::size_t i = 0; i < n; ++i) {
                if (labels[i] != static_cast<int>(m)) continue;
                ++members;
                for (std::size_t j = 0; j < d; ++j) ones[j] += rows[i][j];
            }
            if (members == 0) continue;
            for (std::size_t j = 0; j < d; ++j)
                modes[m][j] = (2 * ones[j] > members) ? 1 : 0;
        }
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best_h = hamming(rows[i], modes[static_cast<std::size_t>(labels[i])]);
            std::size_t best_m = static_cast<std::size_t>(labels[i]);
            for (std::size_t m = 0; m < k; ++m) {
                const std::size_t h = hamming(rows[i], modes[m]);
                if (h < best_h) {
                    best_h = h;
                    best_m = m;
                }
            }
            if (best_m != static_cast<std::size_t>(labels[i])) {
                labels[i] = static_cast<int>(best_m);
                changed = true;
            }
        }
        if (!changed) break;
    }

    KModesRun run;
    run.cost = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        run.cost += static_cast<double>(
            hamming(rows[i], modes[static_cast<std::size_t>(labels[i])]));
    run.modes = std::move(modes);
    run.labels = std::move(labels);
    return run;
}

} // namespace detail

// Alternating assignment/mode-update to a fixpoint, restarted from `n_init`
// seeded initial mode sets; the lowest-cost run wins (earliest on ties).
inline KModesResult kmodes_fit(const Points& points, std::size_t k, std::uint64_t seed,
                               std::size_t max_iter = 300, std::size_t n_init = 40) {
    detail::check_points(points);
    const std::size_t n = points.size();
    if (k < 1) throw std::invalid_argument("kmodes_fit: k must be >= 1");
    if (k > n) throw std::invalid_argument("kmodes_fit: k > n");
    if (n_init < 1) throw std::invalid_argument("kmodes_fit: n_init must be >= 1");
    const auto rows = detail::to_binary_rows(points);

    detail::KModesRun best;
    const std::uint64_t base = derive_seed(seed, "kmodes");
    for (std::size_t r = 0; r < n_init; ++r) {
        detail::KModesRun run = detail::kmodes_single(rows, k, derive_seed(base, r), max_iter);
        if (r == 0 || run.cost < best.cost - 1e-12) best = std::move(run);
    }

    KModesResult out;
    out.modes.reserve(k);
    for (const auto& m : best.modes) {
        std::vector<double> row(m.begin(), m.end());
        out.modes.push_back(std::move(row));
    }
    out.cost = best.cost;
    out.assignment = ClusterAssignment{std::move(best.labels), k};
    return out;
}

// ---------------------------------------------------------------------------
// Binarization
// ---------------------------------------------------------------------------

// per-coordinate medians of the training points
inline std::vector<double> binarize_thresholds(const Points& points) {
    detail::check_points(points);
    const std::size_t n = points.size();
    const std::size_t d = points[0].size();
    std::vector<double> thresholds(d);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < n; ++i) col[i] = points[i][j];
        std::sort(col.begin(), col.end());
        thresholds[j] = (n % 2 == 1) ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
    }
    return thresholds;
}

// strictly-greater-than-median -> 1, else 0
inline std::vector<double> apply_thresholds(const std::vector<double>& x,
                                            const std::vector<double>& thresholds) {
    if (x.size() != thresholds.size())
        throw std::invalid_argument("apply_thresholds: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] > thresholds[j] ? 1.0 : 0.0;
    return out;
}

inline Points binarize(const Points& points) {
    const auto thresholds = binarize_thresholds(points);
    Points out;
    out.reserve(points.size());
    for (const auto& p : points) out.push_back(apply_thresholds(p, thresholds));
    return out;
}

inline EmbeddingSet binarize(const EmbeddingSet& set) {
    if (set.records.empty()) throw std::invalid_argument("binarize: empty embedding set");
    const Points binary = binarize(to_points(set));
    EmbeddingSet out = set;
    for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].vector = binary[i];
    return out;
}

// ---------------------------------------------------------------------------
// Cluster-to-label mapping
// ---------------------------------------------------------------------------

namespace detail {

// max-weight assignment on a rectangular count matrix (Kuhn-Munkres on the
// negated costs); returns label index per cluster, -1 = unmapped
inline std::vector<int> hungarian_max(const std::vector<std::vector<std::size_t>>& counts) {
    const std::size_t rows = counts.size();
    const std::size_t cols = counts[0].size();
    const std::size_t nn = std::max(rows, cols);
    std::size_t max_c = 0;
    for (const auto& row : counts)
        for (std::size_t v : row) max_c = std::max(max_c, v);

    // square cost matrix, 1-indexed potentials formulation
    std::vector<std::vector<double>> a(nn + 1, std::vector<double>(nn + 1, 0.0));
    for (std::size_t i = 0; i < nn; ++i)
        for (std::size_t j = 0; j < nn; ++j)
            a[i + 1][j + 1] = (i < rows && j < cols)
                                  ? static_cast<double>(max_c - counts[i][j])
                                  : static_cast<double>(max_c);

    std::vector<double> u(nn + 1, 0.0), v(nn + 1, 0.0);
    std::vector<std::size_t> p(nn + 1, 0), way(nn + 1, 0);
    for (std::size_t i = 1; i <= nn; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(nn + 1, std::numeric_limits<double>::infinity());
        std::vector<bool> used(nn + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = std::numeric_limits<double>::infinity();
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= nn; ++j) {
                if (used[j]) continue;
                const double cur = a[i0][j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= nn; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    std::vector<int> match(rows, -1);
    for (std::size_t j = 1; j <= nn; ++j) {
        const std::size_t i = p[j];
        if (i >= 1 && i <= rows && j <= cols) match[i - 1] = static_cast<int>(j - 1);
    }
    return match;
}

// exhaustive over injective cluster->label assignments, skip allowed only
// when there are more clusters than labels
inline void exhaustive_max(const std::vector<std::vector<std::size_t>>& counts,
                           std::size_t cluster, std::vector<bool>& used,
                           std::vector<int>& current, std::size_t score,
                           std::size_t skips_left, std::vector<int>& best,
                           std::size_t& best_score) {
    const std::size_t k = counts.size();
    const std::size_t L = counts[0].size();
    if (cluster == k) {
        if (score > best_score) {
            best_score = score;
            best = current;
        }
        return;
    }
    for (std::size_t l = 0; l < L; ++l) {
        if (used[l]) continue;
        used[l] = true;
        current[cluster] = static_cast<int>(l);
        exhaustive_max(counts, cluster + 1, used, current, score + counts[cluster][l],
                       skips_left, best, best_score);
        used[l] = false;
    }
    if (skips_left > 0) {
        current[cluster] = -1;
        exhaustive_max(counts, cluster + 1, used, current, score, skips_left - 1, best,
                       best_score);
    }
}

} // namespace detail

// Chooses the injective cluster-to-label mapping maximizing accuracy:
// exhaustive enumeration for k <= 8 (when small enough), Hungarian assignment
// on the contingency matrix otherwise. With more clusters than labels the
// spare clusters fall back to their majority true label.
inline MapResult map_clusters(const ClusterAssignment& assignment,
                              const std::vector<std::string>& true_labels) {
    const std::size_t n = assignment.labels.size();
    if (n == 0) throw std::invalid_argument("map_clusters: empty input");
    if (true_labels.size() != n)
        throw std::invalid_argument("map_clusters: label count mismatch");
    const std::size_t k = assignment.k;
    if (k == 0) throw std::invalid_argument("map_clusters: k must be >= 1");
    for (int c : assignment.labels)
        if (c < 0 || static_cast<std::size_t>(c) >= k)
            throw std::invalid_argument("map_clusters: cluster id out of range");

    std::vector<std::string> labels = true_labels;
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    const std::size_t L = labels.size();
    const auto label_index = [&](const std::string& s) {
        return static_cast<std::size_t>(
            std::lower_bound(labels.begin(), labels.end(), s) - labels.begin());
    };

    std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(L, 0));
    for (std::size_t i = 0; i < n; ++i)
        ++counts[static_cast<std::size_t>(assignment.labels[i])][label_index(true_labels[i])];

    // enumeration size L*(L-1)*...; bail to Hungarian when it explodes
    bool exhaustive = k <= 8;
    if (exhaustive) {
        double perms = 1.0;
        for (std::size_t t = 0; t < std::min(k, L); ++t)
            perms *= static_cast<double>(L - t);
        if (perms > 1e7) exhaustive = false;
    }

    std::vector<int> match;
    if (exhaustive) {
        std::vector<bool> used(L, false);
        std::vector<int> current(k, -2);
        std::size_t best_score = 0;
        match.assign(k, -1);
        const std::size_t skips = k > L ? k - L : 0;
        detail::exhaustive_max(counts, 0, used, current, 0, skips, match, best_score);
    } else {
        match = detail::hungarian_max(counts);
    }

    MapResult out;
    out.cluster_labels.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        if (match[c] >= 0) {
            out.cluster_labels[c] = labels[static_cast<std::size_t>(match[c])];
        } else {
            // spare cluster: majority vote, ties to the lexicographically first
            std::size_t best_l = 0;
            for (std::size_t l = 1; l < L; ++l)
                if (counts[c][l] > counts[c][best_l]) best_l = l;
            out.cluster_labels[c] = labels[best_l];
        }
    }
    out.mapped.reserve(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& lab = out.cluster_labels[static_cast<std::size_t>(assignment.labels[i])];
        out.mapped.push_back(lab);
        if (lab == true_labels[i]) ++hits;
    }
    out.accuracy = static_cast<double>(hits) / static_cast<double>(n);
    return out;
}

// centroid per cluster, for out-of-sample assignment of hierarchical fits
inline Points cluster_centroids(const Points& points, const ClusterAssignment& assignment) {
    detail::check_points(points);
    const std::size_t d = points[0].size();
    Points sums(assignment.k, std::vector<double>(d, 0.0));
    std::vector<std::size_t> counts(assignment.k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto c = static_cast<std::size_t>(assignment.labels[i]);
        ++counts[c];
        for (std::size_t j = 0; j < d; ++j) sums[c][j] += points[i][j];
    }
    for (std::size_t c = 0; c < assignment.k; ++c)
        if (counts[c] > 0)
            for (std::size_t j = 0; j < d; ++j) sums[c][j] /= static_cast<double>(counts[c]);
    return sums;
}

// nearest center by Euclidean distance, ties to the lowest index
inline int nearest_center(const std::vector<double>& x, const Points& centers) {
    if (centers.empty()) throw std::invalid_argument("nearest_center: no centers");
    return detail::nearest_center_sq(x, centers);
}

// nearest binary mode by Hamming distance, ties to the lowest index
inline int nearest_mode(const std::vector<double>& x, const Points& modes) {
    if (modes.empty()) throw std::invalid_argument("nearest_mode: no modes");
    std::size_t best = 0;
    double best_h = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < modes.size(); ++m) {
        double h = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) h += (x[j] != modes[m][j]) ? 1.0 : 0.0;
        if (h < best_h) {
            best_h = h;
            best = m;
        }
    }
    return static_cast<int>(best);
}

} // namespace rura::cluster
