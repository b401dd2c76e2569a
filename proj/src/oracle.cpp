#include "evfair/oracle.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>

namespace evfair::oracle {

namespace {

using Complex = std::complex<double>;

struct Topology {
    int n = 0;
    int root = 0;
    std::vector<Complex> y;                        // per branch
    std::vector<std::pair<int, int>> ends;         // dense endpoint indices
    std::vector<std::vector<std::pair<int, int>>> adj; // bus -> (branch, other bus)
};

Topology topology(const NetworkModel& net) {
    Topology t;
    t.n = static_cast<int>(net.bus_count());
    t.root = net.root_index();
    t.adj.resize(t.n);
    for (const Branch& br : net.branches()) {
        const int a = net.bus_index(br.from);
        const int b = net.bus_index(br.to);
        const Complex y = 1.0 / Complex(br.r, br.x);
        const int e = static_cast<int>(t.y.size());
        t.y.push_back(y);
        t.ends.emplace_back(a, b);
        t.adj[a].emplace_back(e, b);
        t.adj[b].emplace_back(e, a);
    }
    return t;
}

/// Injections S_i = v_i * conj(sum_j y_ij (v_i - v_j)) for all buses.
std::vector<Complex> injections(const Topology& t, const std::vector<Complex>& v) {
    std::vector<Complex> s(t.n, Complex(0, 0));
    for (int i = 0; i < t.n; ++i) {
        Complex current(0, 0);
        for (auto [e, j] : t.adj[i]) current += t.y[e] * (v[i] - v[j]);
        s[i] = v[i] * std::conj(current);
    }
    return s;
}

} // namespace

PowerFlowResult solve_power_flow(const NetworkModel& net, const std::vector<double>& load_p,
                                 double v_nominal, double tol, int max_iter) {
    const Topology t = topology(net);
    if (load_p.size() != static_cast<std::size_t>(t.n)) {
        throw NetworkError("load vector size does not match bus count");
    }

    PowerFlowResult res;
    std::vector<Complex> v(t.n, Complex(v_nominal, 0.0));

    // Unknowns: (Re v_i, Im v_i) for non-root buses.
    std::vector<int> unk;
    for (int i = 0; i < t.n; ++i)
        if (i != t.root) unk.push_back(i);
    const int m = static_cast<int>(unk.size());

    auto residual = [&](const std::vector<Complex>& vv) {
        Eigen::VectorXd r(2 * m);
        const auto s = injections(t, vv);
        for (int k = 0; k < m; ++k) {
            const Complex mism = s[unk[k]] + Complex(load_p[unk[k]], 0.0);
            r(2 * k) = mism.real();
            r(2 * k + 1) = mism.imag();
        }
        return r;
    };

    Eigen::VectorXd r = residual(v);
    int it = 0;
    for (; it < max_iter && r.lpNorm<Eigen::Infinity>() > tol; ++it) {
        // Jacobian of the mismatches w.r.t. rectangular voltage components.
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * m, 2 * m);
        std::vector<Complex> current(t.n, Complex(0, 0));
        std::vector<Complex> ydiag(t.n, Complex(0, 0));
        for (int i = 0; i < t.n; ++i) {
            for (auto [e, j] : t.adj[i]) {
                current[i] += t.y[e] * (v[i] - v[j]);
                ydiag[i] += t.y[e];
            }
        }
        std::vector<int> col(t.n, -1);
        for (int k = 0; k < m; ++k) col[unk[k]] = k;
        for (int k = 0; k < m; ++k) {
            const int i = unk[k];
            // dS_i/dv_k taken through both v_i and conj(I_i).
            auto add = [&](int kk, Complex dIdv) {
                // S_i = v_i conj(I_i): partials w.r.t. e_k and f_k of bus kk.
                const Complex de = (kk == i ? std::conj(current[i]) : Complex(0, 0)) +
                                   v[i] * std::conj(dIdv);
                const Complex df = (kk == i ? Complex(0, 1) * std::conj(current[i])
                                            : Complex(0, 0)) -
                                   Complex(0, 1) * v[i] * std::conj(dIdv);
                const int c = col[kk];
                if (c < 0) return; // root is fixed
                J(2 * k, 2 * c) += de.real();
                J(2 * k, 2 * c + 1) += df.real();
                J(2 * k + 1, 2 * c) += de.imag();
                J(2 * k + 1, 2 * c + 1) += df.imag();
            };
            add(i, ydiag[i]);
            for (auto [e, j] : t.adj[i]) add(j, -t.y[e]);
        }

        Eigen::VectorXd step = J.partialPivLu().solve(-r);
        if (!step.allFinite()) break;

        // Damped update: halve until the residual decreases.
        double alpha = 1.0;
        const double base = r.norm();
        std::vector<Complex> v_try = v;
        for (int ls = 0; ls < 40; ++ls) {
            for (int k = 0; k < m; ++k) {
                v_try[unk[k]] = v[unk[k]] + alpha * Complex(step(2 * k), step(2 * k + 1));
            }
            const Eigen::VectorXd r_try = residual(v_try);
            if (r_try.norm() < base || r_try.lpNorm<Eigen::Infinity>() <= tol) {
                v = v_try;
                r = r_try;
                break;
            }
            alpha *= 0.5;
            if (ls == 39) {
                res.iterations = it;
                res.converged = false;
                return res;
            }
        }
    }

    res.iterations = it;
    res.converged = r.lpNorm<Eigen::Infinity>() <= tol;
    res.v = v;
    res.v_sq.resize(t.n);
    for (int i = 0; i < t.n; ++i) res.v_sq[i] = std::norm(v[i]);
    res.root_injection = injections(t, v)[t.root].real();
    return res;
}

double max_deliverable_scale(const NetworkModel& net, const std::vector<double>& pattern,
                             double v_nominal, double tol) {
    const double total = std::accumulate(pattern.begin(), pattern.end(), 0.0);
    if (!(total > 0.0)) throw NetworkError("load pattern must have a positive sum");
    for (double p : pattern)
        if (p < 0.0) throw NetworkError("load pattern must be non-negative");

    auto feasible = [&](double sigma) {
        std::vector<double> loads(pattern.size());
        for (std::size_t i = 0; i < pattern.size(); ++i) loads[i] = sigma * pattern[i];
        const PowerFlowResult pf = solve_power_flow(net, loads, v_nominal);
        if (!pf.converged) return false;
        for (std::size_t i = 0; i < pf.v_sq.size(); ++i) {
            const double lo = net.buses()[i].v_min * net.buses()[i].v_min;
            if (pf.v_sq[i] < lo) return false;
        }
        return true;
    };

    double lo = 0.0;
    double hi = 1.0 / total;
    while (feasible(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) return lo; // no voltage limit binds at any sane load
    }
    while (hi - lo > tol * std::max(1.0, hi)) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace evfair::oracle
