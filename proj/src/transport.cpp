#include "sigflow/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace sigflow {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

DiscreteDistribution DiscreteDistribution::uniform(Tensor points) {
    DiscreteDistribution d;
    const std::size_t n = points.dim(0);
    d.points = std::move(points);
    d.weights.assign(n, 1.0 / static_cast<double>(n));
    return d;
}

void DiscreteDistribution::validate() const {
    if (points.rank() != 2) {
        throw ShapeError("distribution points must be rank 2 (n, d), got " +
                         shape_str(points.shape()));
    }
    if (weights.size() != points.dim(0)) {
        throw ShapeError("distribution has " + std::to_string(points.dim(0)) +
                         " points but " + std::to_string(weights.size()) + " weights");
    }
    double total = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw DataError("distribution weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw DataError("distribution weights sum to " + std::to_string(total) +
                        ", expected 1");
    }
}

Tensor cost_matrix(const Tensor& p_points, const Tensor& q_points, Metric metric) {
    if (p_points.rank() != 2 || q_points.rank() != 2 ||
        p_points.dim(1) != q_points.dim(1)) {
        throw ShapeError("cost_matrix: dimension mismatch between " +
                         shape_str(p_points.shape()) + " and " +
                         shape_str(q_points.shape()));
    }
    const std::size_t n = p_points.dim(0), m = q_points.dim(0), d = p_points.dim(1);
    Tensor dist({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        const double* pi = p_points.data() + i * d;
        for (std::size_t j = 0; j < m; ++j) {
            const double* qj = q_points.data() + j * d;
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = pi[k] - qj[k];
                s += diff * diff;
            }
            dist(i, j) = metric == Metric::SquaredEuclidean ? s : std::sqrt(s);
        }
    }
    return dist;
}

double plan_cost(const Tensor& coupling, const Tensor& dist) {
    return dot(coupling, dist);
}

// Jonker-Volgenant style shortest augmenting path assignment.
std::vector<std::size_t> solve_assignment(const Tensor& cost) {
    if (cost.rank() != 2 || cost.dim(0) != cost.dim(1)) {
        throw ShapeError("solve_assignment: cost matrix must be square, got " +
                         shape_str(cost.shape()));
    }
    const std::size_t n = cost.dim(0);
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
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
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n, 0);
    for (std::size_t j = 1; j <= n; ++j) {
        if (p[j] == 0) throw NumericError("assignment solver left a row unmatched");
        assignment[p[j] - 1] = j - 1;
    }
    return assignment;
}

namespace {

struct BasisArc {
    std::size_t row, col;
    double flow;
};

// Unique path between two nodes in the basis tree; nodes are rows [0, n) and
// columns [n, n+m).
std::vector<std::size_t> tree_path(const std::vector<std::vector<std::size_t>>& adj,
                                   std::size_t from, std::size_t to) {
    std::vector<std::ptrdiff_t> parent(adj.size(), -2);
    std::queue<std::size_t> q;
    q.push(from);
    parent[from] = -1;
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop();
        if (u == to) break;
        for (std::size_t w : adj[u]) {
            if (parent[w] == -2) {
                parent[w] = static_cast<std::ptrdiff_t>(u);
                q.push(w);
            }
        }
    }
    if (parent[to] == -2) throw NumericError("transport simplex basis is disconnected");
    std::vector<std::size_t> path;
    for (std::ptrdiff_t u = static_cast<std::ptrdiff_t>(to); u != -1;
         u = parent[static_cast<std::size_t>(u)]) {
        path.push_back(static_cast<std::size_t>(u));
    }
    std::reverse(path.begin(), path.end());
    return path;
}

}  // namespace

TransportPlan transport_simplex(const std::vector<double>& supply,
                                const std::vector<double>& demand,
                                const Tensor& cost) {
    const std::size_t n = supply.size(), m = demand.size();
    if (cost.rank() != 2 || cost.dim(0) != n || cost.dim(1) != m) {
        throw ShapeError("transport_simplex: cost shape " + shape_str(cost.shape()) +
                         " does not match supply/demand sizes");
    }

    // northwest-corner initial basis: exactly n + m - 1 arcs, zero flows allowed
    std::vector<BasisArc> basis;
    {
        std::vector<double> a = supply, b = demand;
        std::size_t i = 0, j = 0;
        while (i < n && j < m) {
            const double x = std::min(a[i], b[j]);
            basis.push_back({i, j, x});
            a[i] -= x;
            b[j] -= x;
            if (i == n - 1 && j == m - 1) break;
            if (a[i] <= b[j] && i < n - 1) {
                ++i;
            } else {
                ++j;
            }
        }
    }
    if (basis.size() != n + m - 1) {
        throw NumericError("transport simplex: degenerate initialization produced " +
                           std::to_string(basis.size()) + " arcs");
    }

    double cost_scale = 1e-12;
    for (std::size_t i = 0; i < cost.size(); ++i)
        cost_scale = std::max(cost_scale, std::abs(cost[i]));
    const double tol = cost_scale * 1e-11;

    const std::size_t max_pivots = 2000 * (n + m) * (n + m) + 1000;
    std::size_t pivots = 0;
    while (true) {
        if (++pivots > max_pivots) {
            throw NumericError("transport simplex failed to converge");
        }
        // potentials from the basis tree
        std::vector<std::vector<std::size_t>> adj(n + m);
        for (const BasisArc& arc : basis) {
            adj[arc.row].push_back(n + arc.col);
            adj[n + arc.col].push_back(arc.row);
        }
        std::vector<double> u(n, kInf), v(m, kInf);
        std::vector<char> seen(n + m, 0);
        std::queue<std::size_t> q;
        u[0] = 0.0;
        seen[0] = 1;
        q.push(0);
        std::vector<std::vector<std::pair<std::size_t, double>>> arc_cost(n + m);
        for (const BasisArc& arc : basis) {
            arc_cost[arc.row].push_back({n + arc.col, cost(arc.row, arc.col)});
            arc_cost[n + arc.col].push_back({arc.row, cost(arc.row, arc.col)});
        }
        while (!q.empty()) {
            const std::size_t node = q.front();
            q.pop();
            for (auto [next, c] : arc_cost[node]) {
                if (seen[next]) continue;
                seen[next] = 1;
                if (node < n) {
                    v[next - n] = c - u[node];
                } else {
                    u[next] = c - v[node - n];
                }
                q.push(next);
            }
        }

        // entering arc: most negative reduced cost
        double best = -tol;
        std::size_t bi = 0, bj = 0;
        bool found = false;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double rc = cost(i, j) - u[i] - v[j];
                if (rc < best) {
                    best = rc;
                    bi = i;
                    bj = j;
                    found = true;
                }
            }
        }
        if (!found) break;

        // cycle = entering arc + tree path from its column back to its row
        std::vector<std::size_t> path = tree_path(adj, bi, n + bj);
        // path alternates row, col, row, ... consecutive pairs are basis arcs;
        // signs alternate starting with - (entering arc takes +)
        double theta = kInf;
        std::size_t leave_idx = basis.size();
        std::vector<std::pair<std::size_t, int>> touched;  // basis index, sign
        for (std::size_t s = 0; s + 1 < path.size(); ++s) {
            const std::size_t a = path[s], b = path[s + 1];
            const std::size_t row = a < n ? a : b;
            const std::size_t col = (a < n ? b : a) - n;
            std::size_t idx = basis.size();
            for (std::size_t k = 0; k < basis.size(); ++k) {
                if (basis[k].row == row && basis[k].col == col) {
                    idx = k;
                    break;
                }
            }
            if (idx == basis.size()) throw NumericError("transport simplex lost a basis arc");
            const int sign = (s % 2 == 0) ? -1 : +1;
            touched.push_back({idx, sign});
            if (sign < 0 && basis[idx].flow < theta) {
                theta = basis[idx].flow;
                leave_idx = idx;
            }
        }
        for (auto [idx, sign] : touched) {
            basis[idx].flow += sign * theta;
        }
        basis[leave_idx] = {bi, bj, theta};
    }

    TransportPlan plan;
    plan.coupling = Tensor({n, m});
    for (const BasisArc& arc : basis) {
        plan.coupling(arc.row, arc.col) += arc.flow;
    }
    plan.cost = plan_cost(plan.coupling, cost);
    plan.iterations = pivots;
    return plan;
}

namespace {

bool is_uniform(const std::vector<double>& w) {
    const double expect = 1.0 / static_cast<double>(w.size());
    for (double x : w) {
        if (std::abs(x - expect) > 1e-12) return false;
    }
    return true;
}

// Uniform P (n points) vs uniform Q (m = k*n points): optimal plans split each
// P point into k unit replicas, so an assignment on replicas is exact.
TransportPlan replica_assignment(const Tensor& dist, std::size_t n, std::size_t m) {
    const std::size_t k = m / n;
    Tensor cost({m, m});
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t i = r / k;
        for (std::size_t j = 0; j < m; ++j) cost(r, j) = dist(i, j);
    }
    std::vector<std::size_t> assignment = solve_assignment(cost);
    TransportPlan plan;
    plan.coupling = Tensor({n, m});
    const double mass = 1.0 / static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
        plan.coupling(r / k, assignment[r]) += mass;
    }
    plan.cost = plan_cost(plan.coupling, dist);
    return plan;
}

Tensor transpose(const Tensor& a) {
    Tensor out({a.dim(1), a.dim(0)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < a.dim(1); ++j) out(j, i) = a(i, j);
    return out;
}

}  // namespace

TransportPlan exact_ot(const DiscreteDistribution& p, const DiscreteDistribution& q,
                       Metric metric, std::size_t max_entries) {
    p.validate();
    q.validate();
    const std::size_t n = p.size(), m = q.size();
    if (n * m > max_entries) {
        throw DataError("exact_ot: instance size " + std::to_string(n) + "x" +
                        std::to_string(m) + " exceeds the cap of " +
                        std::to_string(max_entries) +
                        " entries; use sinkhorn for instances this large");
    }
    Tensor dist = cost_matrix(p.points, q.points, metric);
    if (is_uniform(p.weights) && is_uniform(q.weights)) {
        if (m % n == 0) return replica_assignment(dist, n, m);
        if (n % m == 0) {
            TransportPlan t = replica_assignment(transpose(dist), m, n);
            TransportPlan plan;
            plan.coupling = transpose(t.coupling);
            plan.cost = t.cost;
            return plan;
        }
    }
    return transport_simplex(p.weights, q.weights, dist);
}

namespace {

// Scale rows then columns toward the targets, then spread the leftover mass as
// a rank-one correction. Output marginals match p and q to float precision.
void round_to_marginals(Tensor& pi, const std::vector<double>& p,
                        const std::vector<double>& q) {
    const std::size_t n = p.size(), m = q.size();
    for (std::size_t i = 0; i < n; ++i) {
        double rs = 0.0;
        for (std::size_t j = 0; j < m; ++j) rs += pi(i, j);
        const double r = rs > 0.0 ? std::min(1.0, p[i] / rs) : 0.0;
        for (std::size_t j = 0; j < m; ++j) pi(i, j) *= r;
    }
    for (std::size_t j = 0; j < m; ++j) {
        double cs = 0.0;
        for (std::size_t i = 0; i < n; ++i) cs += pi(i, j);
        const double c = cs > 0.0 ? std::min(1.0, q[j] / cs) : 0.0;
        for (std::size_t i = 0; i < n; ++i) pi(i, j) *= c;
    }
    std::vector<double> er(n, 0.0), ec(m, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double rs = 0.0;
        for (std::size_t j = 0; j < m; ++j) rs += pi(i, j);
        er[i] = p[i] - rs;
        total += er[i];
    }
    for (std::size_t j = 0; j < m; ++j) {
        double cs = 0.0;
        for (std::size_t i = 0; i < n; ++i) cs += pi(i, j);
        ec[j] = q[j] - cs;
    }
    if (total > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            if (er[i] == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) {
                pi(i, j) += er[i] * ec[j] / total;
            }
        }
    }
}

}  // namespace

TransportPlan sinkhorn(const DiscreteDistribution& p, const DiscreteDistribution& q,
                       Metric metric, double epsilon, std::size_t max_iters,
                       double tol) {
    p.validate();
    q.validate();
    if (epsilon <= 0.0) throw DataError("sinkhorn: epsilon must be positive");
    const std::size_t n = p.size(), m = q.size();
    Tensor dist = cost_matrix(p.points, q.points, metric);

    std::vector<double> logp(n), logq(m);
    for (std::size_t i = 0; i < n; ++i)
        logp[i] = p.weights[i] > 0.0 ? std::log(p.weights[i]) : -kInf;
    for (std::size_t j = 0; j < m; ++j)
        logq[j] = q.weights[j] > 0.0 ? std::log(q.weights[j]) : -kInf;

    // dual potentials, kept across epsilon-scaling stages
    std::vector<double> f(n, 0.0), g(m, 0.0);

    double max_cost = 1e-12;
    for (std::size_t i = 0; i < dist.size(); ++i)
        max_cost = std::max(max_cost, dist[i]);

    std::vector<double> stages;
    for (double e = std::max(epsilon, max_cost / 10.0); e > epsilon; e /= 4.0)
        stages.push_back(e);
    stages.push_back(epsilon);

    auto lse_row = [&](std::size_t i, double eps) {
        double best = -kInf;
        for (std::size_t j = 0; j < m; ++j)
            best = std::max(best, (g[j] - dist(i, j)) / eps + logq[j]);
        if (best == -kInf) return -kInf;
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            s += std::exp((g[j] - dist(i, j)) / eps + logq[j] - best);
        return best + std::log(s);
    };
    auto lse_col = [&](std::size_t j, double eps) {
        double best = -kInf;
        for (std::size_t i = 0; i < n; ++i)
            best = std::max(best, (f[i] - dist(i, j)) / eps + logp[i]);
        if (best == -kInf) return -kInf;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += std::exp((f[i] - dist(i, j)) / eps + logp[i] - best);
        return best + std::log(s);
    };

    TransportPlan plan;
    plan.converged = false;
    std::size_t iters = 0;
    double eps = epsilon;
    for (double stage_eps : stages) {
        eps = stage_eps;
        const std::size_t budget =
            stage_eps == epsilon ? max_iters : std::min<std::size_t>(200, max_iters);
        for (std::size_t it = 0; it < budget; ++it) {
            ++iters;
            for (std::size_t i = 0; i < n; ++i) {
                if (logp[i] == -kInf) continue;
                f[i] = -eps * lse_row(i, eps);
            }
            for (std::size_t j = 0; j < m; ++j) {
                if (logq[j] == -kInf) continue;
                g[j] = -eps * lse_col(j, eps);
            }
            // marginal violation of the implied plan (row marginals are exact
            // right after the f update; check columns -> rows after g update)
            double err = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double rs = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    rs += std::exp((f[i] + g[j] - dist(i, j)) / eps + logp[i] + logq[j]);
                }
                err += std::abs(rs - p.weights[i]);
            }
            if (err < tol) {
                if (stage_eps == epsilon) plan.converged = true;
                break;
            }
            if (iters >= max_iters) break;
        }
        if (iters >= max_iters) break;
    }

    plan.coupling = Tensor({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double lp = logp[i] + logq[j];
            plan.coupling(i, j) =
                lp == -kInf ? 0.0 : std::exp((f[i] + g[j] - dist(i, j)) / eps + lp);
        }
    }
    round_to_marginals(plan.coupling, p.weights, q.weights);
    plan.cost = plan_cost(plan.coupling, dist);
    plan.iterations = iters;
    return plan;
}

}  // namespace sigflow
