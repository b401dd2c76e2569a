#include "evfair/allocation.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

namespace evfair {

const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
    }
    return "?";
}

AllocationProblem build_problem(const NetworkModel& net, const AllocationRequest& request,
                                double v_nominal, SolverOptions options) {
    AllocationProblem prob;
    prob.net_ = &net;
    prob.request_ = request;
    prob.options_ = options;
    prob.v_nominal_ = v_nominal;
    if (!(v_nominal > 0.0)) throw std::invalid_argument("v_nominal must be positive");

    const int n = static_cast<int>(net.bus_count());
    auto& core = prob.core_;

    std::vector<char> loaded(n, 0);
    for (std::size_t idx = 0; idx < request.entries.size(); ++idx) {
        const RequestEntry& en = request.entries[idx];
        if (en.weight < 0.0) {
            throw std::invalid_argument("negative weight for vehicle " +
                                        std::to_string(en.vehicle));
        }
        const Bus& bus = net.bus(en.bus); // throws for unknown ids
        if (bus.is_root || !bus.chargeable) {
            throw std::invalid_argument("vehicle " + std::to_string(en.vehicle) +
                                        " requests power at non-chargeable bus " +
                                        std::to_string(en.bus));
        }
        if (en.weight > 0.0) {
            core.pos_entry.push_back(static_cast<int>(idx));
            loaded[net.bus_index(en.bus)] = 1;
        }
    }

    if (core.pos_entry.empty()) {
        prob.degenerate_ = true;
        return prob;
    }

    double wmax = 0.0;
    for (int idx : core.pos_entry) wmax = std::max(wmax, request.entries[idx].weight);
    core.w_scale = wmax;
    for (int idx : core.pos_entry) core.w_norm.push_back(request.entries[idx].weight / wmax);
    core.m = static_cast<int>(core.pos_entry.size());

    // Keep the union of root->loaded-bus paths; everything else carries no
    // current and is resolved after the solve.
    std::vector<char> keep(n, 0);
    for (int i = 0; i < n; ++i) {
        if (!loaded[i]) continue;
        for (int j = i; j >= 0 && !keep[j]; j = net.parent_of(j)) keep[j] = 1;
    }

    core.bus_to_kept.assign(n, -1);
    for (int i : net.bfs_order()) {
        if (keep[i]) {
            core.bus_to_kept[i] = static_cast<int>(core.kept_bus.size());
            core.kept_bus.push_back(i);
        }
    }
    core.nk = static_cast<int>(core.kept_bus.size());

    core.lo.resize(core.nk);
    core.hi.resize(core.nk);
    for (int k = 0; k < core.nk; ++k) {
        const Bus& b = net.buses()[core.kept_bus[k]];
        core.lo[k] = b.v_min * b.v_min;
        core.hi[k] = b.v_max * b.v_max;
    }
    // Pruned buses share their nearest kept ancestor's voltage: fold their
    // bounds into that anchor.
    std::vector<int> anchor(n, -1);
    for (int i : net.bfs_order()) {
        if (keep[i]) {
            anchor[i] = core.bus_to_kept[i];
        } else {
            anchor[i] = anchor[net.parent_of(i)];
            const Bus& b = net.buses()[i];
            core.lo[anchor[i]] = std::max(core.lo[anchor[i]], b.v_min * b.v_min);
            core.hi[anchor[i]] = std::min(core.hi[anchor[i]], b.v_max * b.v_max);
        }
    }

    const double vn2 = v_nominal * v_nominal;
    for (int k = 0; k < core.nk; ++k) {
        const BusId id = net.buses()[core.kept_bus[k]].id;
        if (core.lo[k] > core.hi[k]) {
            prob.infeasible_ = true;
            prob.infeasible_reason_ = "empty voltage window at bus " + std::to_string(id);
            return prob;
        }
        if (k == 0) {
            // Root voltage is pinned; it must sit strictly inside the window.
            if (!(core.lo[k] < vn2 && vn2 < core.hi[k])) {
                prob.infeasible_ = true;
                prob.infeasible_reason_ =
                    "root voltage pin " + std::to_string(vn2) + " outside bounds";
                return prob;
            }
        } else if (core.lo[k] >= vn2) {
            // Loads only ever depress voltages below the feeder on a radial
            // network, and every kept bus carries strictly positive flow.
            prob.infeasible_ = true;
            prob.infeasible_reason_ = "lower voltage bound at bus " + std::to_string(id) +
                                      " cannot be met below the feeder voltage";
            return prob;
        }
    }

    core.branch_to_kept.assign(net.branch_count(), -1);
    for (std::size_t e = 0; e < net.branch_count(); ++e) {
        const Branch& br = net.branches()[e];
        const int fi = net.bus_index(br.from);
        const int ti = net.bus_index(br.to);
        if (keep[fi] && keep[ti]) {
            core.branch_to_kept[e] = static_cast<int>(core.kept_branch.size());
            core.kept_branch.push_back(static_cast<int>(e));
            core.cones.push_back(AllocationProblem::Core::Cone{
                core.bus_to_kept[fi], core.bus_to_kept[ti], br.g, br.b});
        }
    }
    core.ek = static_cast<int>(core.kept_branch.size());

    // Equality system: active/reactive balance per non-root kept bus, then the
    // root voltage pin. Balance rows state: net injection + load = 0.
    const int N = core.n_var();
    const int M = core.n_eq();
    core.A = Eigen::MatrixXd::Zero(M, N);
    core.rhs = Eigen::VectorXd::Zero(M);

    for (int ke = 0; ke < core.ek; ++ke) {
        const auto& cn = core.cones[ke];
        // sigma: +1 at the 'from' end, -1 at the 'to' end (conjugated pair).
        for (int side = 0; side < 2; ++side) {
            const int k = side == 0 ? cn.iu : cn.ju;
            if (k == 0) continue; // no balance rows at the root
            const double sigma = side == 0 ? 1.0 : -1.0;
            const int row_p = 2 * (k - 1);
            const int row_q = row_p + 1;
            core.A(row_p, core.u_var(k)) += cn.g;
            core.A(row_p, core.re_var(ke)) -= cn.g;
            core.A(row_p, core.im_var(ke)) += sigma * cn.b;
            core.A(row_q, core.u_var(k)) += cn.b;
            core.A(row_q, core.re_var(ke)) -= cn.b;
            core.A(row_q, core.im_var(ke)) -= sigma * cn.g;
        }
    }
    for (int l = 0; l < core.m; ++l) {
        const int k = core.bus_to_kept[net.bus_index(request.entries[core.pos_entry[l]].bus)];
        core.A(2 * (k - 1), l) += 1.0;
    }
    core.A(M - 1, core.u_var(0)) = 1.0;
    core.rhs(M - 1) = vn2;

    return prob;
}

ExactnessReport check_exactness(const AllocationResult& result, const NetworkModel& net,
                                double tol) {
    ExactnessReport rep;
    rep.tol = tol;
    rep.gaps.resize(net.branch_count());
    for (std::size_t e = 0; e < net.branch_count(); ++e) {
        const Branch& br = net.branches()[e];
        const double ui = result.v_sq[net.bus_index(br.from)];
        const double uj = result.v_sq[net.bus_index(br.to)];
        const double a = result.branch_vars[e].re;
        const double c = result.branch_vars[e].im;
        const double norm =
            std::sqrt(4.0 * a * a + 4.0 * c * c + (ui - uj) * (ui - uj));
        rep.gaps[e] = (ui + uj) - norm;
        rep.max_gap = std::max(rep.max_gap, std::abs(rep.gaps[e]));
    }
    rep.exact = rep.max_gap <= tol;
    return rep;
}

double KktReport::max_residual() const {
    return std::max({stationarity, primal_equality, primal_inequality, dual_feasibility,
                     complementarity});
}

KktReport kkt_residuals(const AllocationProblem& problem, const AllocationResult& result) {
    KktReport rep;
    if (result.degenerate) {
        rep.note = "degenerate request: no positive weights, nothing to verify";
        return rep;
    }
    if (result.status != SolveStatus::Optimal || !result.duals.available) {
        rep.note = "no optimal solution with multipliers available";
        return rep;
    }

    const auto& core = problem.core();
    const double mu = result.duals.mu;
    const double cap = problem.options().p_cap;

    // Rebuild the solver vector from the public result fields so that the
    // report reflects exactly what the caller sees. Inequality multipliers
    // come from the solver's slack variables: lambda_k = mu / s_k.
    Eigen::VectorXd z(core.n_var());
    for (int l = 0; l < core.m; ++l) z(l) = result.powers[core.pos_entry[l]];
    for (int k = 0; k < core.nk; ++k) z(core.u_var(k)) = result.v_sq[core.kept_bus[k]];
    for (int ke = 0; ke < core.ek; ++ke) {
        z(core.re_var(ke)) = result.branch_vars[core.kept_branch[ke]].re;
        z(core.im_var(ke)) = result.branch_vars[core.kept_branch[ke]].im;
    }
    Eigen::Map<const Eigen::VectorXd> y(result.duals.y.data(),
                                        static_cast<long>(result.duals.y.size()));
    const std::vector<double>& s = result.duals.slacks;
    const std::size_t expected = 2 * core.nk + core.ek + (cap > 0.0 ? core.m : 0);
    if (s.size() != expected) {
        rep.note = "slack vector size mismatch";
        return rep;
    }
    auto slack_lo = [&](int k) { return s[k]; };
    auto slack_hi = [&](int k) { return s[core.nk + k]; };
    auto slack_cone = [&](int e) { return s[2 * core.nk + e]; };
    auto slack_cap = [&](int l) { return s[2 * core.nk + core.ek + l]; };

    Eigen::VectorXd st = core.A.transpose() * y;
    double min_mult = std::numeric_limits<double>::infinity();
    double comp = 0.0;
    double ineq = 0.0;

    for (int l = 0; l < core.m; ++l) {
        const double p = z(l);
        st(l) += -core.w_norm[l] / p;
        ineq = std::max(ineq, -p);
        if (cap > 0.0) {
            const double lam = mu / slack_cap(l);
            st(l) += lam;
            min_mult = std::min(min_mult, lam);
            comp = std::max(comp, std::abs(lam * (cap - p)));
            ineq = std::max(ineq, p - cap);
        }
    }
    for (int k = 0; k < core.nk; ++k) {
        const double u = z(core.u_var(k));
        ineq = std::max({ineq, core.lo[k] - u, u - core.hi[k]});
        const double lam_lo = mu / slack_lo(k);
        const double lam_hi = mu / slack_hi(k);
        st(core.u_var(k)) += -lam_lo + lam_hi;
        min_mult = std::min({min_mult, lam_lo, lam_hi});
        comp = std::max({comp, std::abs(lam_lo * (u - core.lo[k])),
                         std::abs(lam_hi * (core.hi[k] - u))});
    }
    for (int ke = 0; ke < core.ek; ++ke) {
        const auto& cn = core.cones[ke];
        const double ui = z(core.u_var(cn.iu));
        const double uj = z(core.u_var(cn.ju));
        const double a = z(core.re_var(ke));
        const double c = z(core.im_var(ke));
        const double d = ui * uj - a * a - c * c;
        ineq = std::max(ineq, -d);
        const double lam = mu / slack_cone(ke); // log-det multiplier
        st(core.u_var(cn.iu)) += -lam * uj;
        st(core.u_var(cn.ju)) += -lam * ui;
        st(core.re_var(ke)) += lam * 2.0 * a;
        st(core.im_var(ke)) += lam * 2.0 * c;
        // Second-order-cone reading of the same multiplier: the dual vector
        // 2 lam/(t + ||x||) * (t, -x) lies in the cone; its membership margin
        // is 2 lam (t - ||x||) >= 0 and s^T lambda = 2 lam d.
        const double t = ui + uj;
        const double xn = std::sqrt(4.0 * a * a + 4.0 * c * c + (ui - uj) * (ui - uj));
        min_mult = std::min(min_mult, lam * (t - xn));
        comp = std::max(comp, std::abs(2.0 * lam * d));
    }

    rep.evaluated = true;
    rep.stationarity = st.lpNorm<Eigen::Infinity>();
    rep.primal_equality = (core.A * z - core.rhs).lpNorm<Eigen::Infinity>();
    rep.primal_inequality = std::max(0.0, ineq);
    rep.dual_feasibility = std::max(0.0, -min_mult);
    rep.complementarity = comp;

    {
        std::ostringstream os;
        os << "residuals on weight-normalized problem (w_scale=" << result.duals.w_scale
           << ", mu=" << mu << ")";
        rep.note = os.str();
    }
    return rep;
}

void dump_problem(const AllocationProblem& problem, std::ostream& out) {
    const auto& core = problem.core();
    const NetworkModel& net = problem.network();
    const auto& entries = problem.request().entries;

    out << "evfair-problem 1\n";
    out << "# t " << problem.request().t << "\n";
    if (problem.degenerate()) {
        out << "degenerate 1\n";
        return;
    }
    out << "vars " << core.n_var() << "\n";
    for (int l = 0; l < core.m; ++l) {
        const RequestEntry& en = entries[core.pos_entry[l]];
        out << "  P[" << en.vehicle << "@" << en.bus << "] w_norm=" << core.w_norm[l] << "\n";
    }
    for (int k = 0; k < core.nk; ++k) {
        out << "  U[" << net.buses()[core.kept_bus[k]].id << "] in [" << core.lo[k] << ", "
            << core.hi[k] << "]\n";
    }
    for (int ke = 0; ke < core.ek; ++ke) {
        const Branch& br = net.branches()[core.kept_branch[ke]];
        out << "  ReV/ImV[" << br.from << "-" << br.to << "] g=" << br.g << " b=" << br.b
            << "\n";
    }
    out << "equalities " << core.n_eq() << "\n";
    for (int r = 0; r < core.n_eq(); ++r) {
        out << "  row " << r << ":";
        for (int c = 0; c < core.n_var(); ++c) {
            if (core.A(r, c) != 0.0) out << " " << core.A(r, c) << "*z" << c;
        }
        out << " = " << core.rhs(r) << "\n";
    }
    out << "cones " << core.ek << "\n";
    for (int ke = 0; ke < core.ek; ++ke) {
        const auto& cn = core.cones[ke];
        out << "  |(2 z" << core.re_var(ke) << ", 2 z" << core.im_var(ke) << ", z"
            << core.u_var(cn.iu) << " - z" << core.u_var(cn.ju) << ")| <= z"
            << core.u_var(cn.iu) << " + z" << core.u_var(cn.ju) << "\n";
    }
    if (problem.options().p_cap > 0.0) {
        out << "p_cap " << problem.options().p_cap << "\n";
    }
}

} // namespace evfair
