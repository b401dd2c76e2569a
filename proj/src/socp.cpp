#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "evfair/allocation.hpp"

namespace evfair {

namespace {

// Path-following constants. mu shrinks geometrically from kMu0 to the
// tol-derived floor; a centering pass is accepted once the dual residual is
// small relative to the objective gradient scale.
constexpr double kMu0 = 0.1;
constexpr double kMuShrink = 0.08;
constexpr double kCenterRel = 0.03;
constexpr double kBoundaryFrac = 0.99;

/// Slack-form interior point method.
///
/// The voltage boxes, cone rows and the optional power cap are written as
/// g_k(z) = s_k with explicit slack variables s_k > 0 carrying the barrier
/// -mu log s_k; the weighted log objective acts as its own barrier for P > 0.
/// Keeping the slacks as variables (rather than recomputing g_k(z) by
/// subtraction) is what makes the final KKT residuals representable: near a
/// binding constraint u - lo underflows to roundoff while s keeps its own
/// exponent. Newton steps are taken on the condensed system
///
///   [ H  A^T ] [dz]   [ -r_z ]          H = hess f + sum eta_k hess g_k
///   [ A   0  ] [y+] = [ b-Az ],             + sum (mu/s_k^2) grad g_k grad g_k^T
///
/// with ds = grad g_k^T dz + (g_k - s_k) eliminated, eta_k = -mu / s_k.
class Ipm {
public:
    Ipm(const AllocationProblem& prob, double tol)
        : core_(prob.core()), opts_(prob.options()), tol_(tol) {
        N_ = core_.n_var();
        M_ = core_.n_eq();
        cap_ = opts_.p_cap > 0.0 ? opts_.p_cap : 0.0;
        S_ = 2 * core_.nk + core_.ek + (cap_ > 0.0 ? core_.m : 0);
    }

    // Slack vector layout.
    int s_lo(int k) const { return k; }
    int s_hi(int k) const { return core_.nk + k; }
    int s_cone(int e) const { return 2 * core_.nk + e; }
    int s_cap(int l) const { return 2 * core_.nk + core_.ek + l; }

    double cone_fn(const Eigen::VectorXd& z, int e) const {
        const auto& cn = core_.cones[e];
        const double ui = z(core_.u_var(cn.iu));
        const double uj = z(core_.u_var(cn.ju));
        const double a = z(core_.re_var(e));
        const double c = z(core_.im_var(e));
        return ui * uj - a * a - c * c;
    }

    /// g_k(z) for every slack row, in slack order.
    Eigen::VectorXd constraint_values(const Eigen::VectorXd& z) const {
        Eigen::VectorXd g(S_);
        for (int k = 0; k < core_.nk; ++k) {
            g(s_lo(k)) = z(core_.u_var(k)) - core_.lo[k];
            g(s_hi(k)) = core_.hi[k] - z(core_.u_var(k));
        }
        for (int e = 0; e < core_.ek; ++e) g(s_cone(e)) = cone_fn(z, e);
        if (cap_ > 0.0) {
            for (int l = 0; l < core_.m; ++l) g(s_cap(l)) = cap_ - z(l);
        }
        return g;
    }

    /// Strict interior for the z-side quantities the Hessian model relies on.
    bool in_domain(const Eigen::VectorXd& z) const {
        for (int l = 0; l < core_.m; ++l) {
            if (!(z(l) > 0.0)) return false;
            if (cap_ > 0.0 && !(z(l) < cap_)) return false;
        }
        for (int k = 0; k < core_.nk; ++k) {
            const double u = z(core_.u_var(k));
            if (!(u > core_.lo[k] && u < core_.hi[k])) return false;
        }
        for (int e = 0; e < core_.ek; ++e) {
            if (!(cone_fn(z, e) > 0.0)) return false;
        }
        return true;
    }

    /// Stationarity rows in z:  grad f + sum eta_k grad g_k + A^T y,
    /// with eta_k = -mu / s_k.
    Eigen::VectorXd dual_residual(const Eigen::VectorXd& z, const Eigen::VectorXd& s,
                                  const Eigen::VectorXd& y, double mu) const {
        Eigen::VectorXd r = core_.A.transpose() * y;
        for (int l = 0; l < core_.m; ++l) {
            r(l) += -core_.w_norm[l] / z(l);
            if (cap_ > 0.0) r(l) += mu / s(s_cap(l)); // eta_cap * (-1)
        }
        for (int k = 0; k < core_.nk; ++k) {
            const int iu = core_.u_var(k);
            r(iu) += -mu / s(s_lo(k)) + mu / s(s_hi(k));
        }
        for (int e = 0; e < core_.ek; ++e) {
            const auto& cn = core_.cones[e];
            const double eta = -mu / s(s_cone(e));
            r(core_.u_var(cn.iu)) += eta * z(core_.u_var(cn.ju));
            r(core_.u_var(cn.ju)) += eta * z(core_.u_var(cn.iu));
            r(core_.re_var(e)) += eta * (-2.0 * z(core_.re_var(e)));
            r(core_.im_var(e)) += eta * (-2.0 * z(core_.im_var(e)));
        }
        return r;
    }

    double objective_grad_scale(const Eigen::VectorXd& z) const {
        double g = 0.0;
        for (int l = 0; l < core_.m; ++l) g = std::max(g, core_.w_norm[l] / z(l));
        return std::max(1.0, g);
    }

    /// Condensed Hessian block (see class comment).
    void assemble_hessian(const Eigen::VectorXd& z, const Eigen::VectorXd& s, double mu,
                          Eigen::MatrixXd& H) const {
        H.setZero();
        for (int l = 0; l < core_.m; ++l) {
            H(l, l) = core_.w_norm[l] / (z(l) * z(l));
            if (cap_ > 0.0) {
                const double sc = s(s_cap(l));
                H(l, l) += mu / (sc * sc);
            }
        }
        for (int k = 0; k < core_.nk; ++k) {
            const int iu = core_.u_var(k);
            const double a = s(s_lo(k));
            const double b = s(s_hi(k));
            H(iu, iu) += mu / (a * a) + mu / (b * b);
        }
        for (int e = 0; e < core_.ek; ++e) {
            const auto& cn = core_.cones[e];
            const int iu = core_.u_var(cn.iu);
            const int ju = core_.u_var(cn.ju);
            const int ia = core_.re_var(e);
            const int ic = core_.im_var(e);
            const double sd = s(s_cone(e));
            const double gd[4] = {z(ju), z(iu), -2.0 * z(ia), -2.0 * z(ic)};
            const int ix[4] = {iu, ju, ia, ic};
            const double w2 = mu / (sd * sd);
            for (int r = 0; r < 4; ++r)
                for (int q = 0; q < 4; ++q) H(ix[r], ix[q]) += w2 * gd[r] * gd[q];
            // eta * hess(g): eta = -mu/sd, hess(d) cross(u_i,u_j)=+1, diag(a,c)=-2.
            const double eta = -mu / sd;
            H(iu, ju) += eta;
            H(ju, iu) += eta;
            H(ia, ia) += -2.0 * eta;
            H(ic, ic) += -2.0 * eta;
        }
    }

    /// Right-hand side of the condensed z-row:
    ///   -grad f - sum [ (mu/s_k^2) rho_k - mu/s_k ] grad g_k,
    /// rho_k = g_k(z) - s_k.
    Eigen::VectorXd condensed_rhs(const Eigen::VectorXd& z, const Eigen::VectorXd& s,
                                  const Eigen::VectorXd& g_of_z, double mu) const {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(N_);
        for (int l = 0; l < core_.m; ++l) r(l) += core_.w_norm[l] / z(l);
        auto coeff = [&](int k) {
            const double sk = s(k);
            const double rho = g_of_z(k) - sk;
            return -((mu / (sk * sk)) * rho - mu / sk);
        };
        for (int k = 0; k < core_.nk; ++k) {
            r(core_.u_var(k)) += coeff(s_lo(k)) * 1.0;
            r(core_.u_var(k)) += coeff(s_hi(k)) * (-1.0);
        }
        for (int e = 0; e < core_.ek; ++e) {
            const auto& cn = core_.cones[e];
            const double c = coeff(s_cone(e));
            r(core_.u_var(cn.iu)) += c * z(core_.u_var(cn.ju));
            r(core_.u_var(cn.ju)) += c * z(core_.u_var(cn.iu));
            r(core_.re_var(e)) += c * (-2.0 * z(core_.re_var(e)));
            r(core_.im_var(e)) += c * (-2.0 * z(core_.im_var(e)));
        }
        if (cap_ > 0.0) {
            for (int l = 0; l < core_.m; ++l) r(l) += coeff(s_cap(l)) * (-1.0);
        }
        return r;
    }

    /// ds_k = grad g_k^T dz + rho_k.
    Eigen::VectorXd slack_step(const Eigen::VectorXd& z, const Eigen::VectorXd& s,
                               const Eigen::VectorXd& g_of_z, const Eigen::VectorXd& dz) const {
        Eigen::VectorXd ds(S_);
        for (int k = 0; k < core_.nk; ++k) {
            const int iu = core_.u_var(k);
            ds(s_lo(k)) = dz(iu) + (g_of_z(s_lo(k)) - s(s_lo(k)));
            ds(s_hi(k)) = -dz(iu) + (g_of_z(s_hi(k)) - s(s_hi(k)));
        }
        for (int e = 0; e < core_.ek; ++e) {
            const auto& cn = core_.cones[e];
            const int iu = core_.u_var(cn.iu);
            const int ju = core_.u_var(cn.ju);
            const int ia = core_.re_var(e);
            const int ic = core_.im_var(e);
            ds(s_cone(e)) = z(ju) * dz(iu) + z(iu) * dz(ju) - 2.0 * z(ia) * dz(ia) -
                            2.0 * z(ic) * dz(ic) + (g_of_z(s_cone(e)) - s(s_cone(e)));
        }
        if (cap_ > 0.0) {
            for (int l = 0; l < core_.m; ++l) {
                ds(s_cap(l)) = -dz(l) + (g_of_z(s_cap(l)) - s(s_cap(l)));
            }
        }
        return ds;
    }

    /// Full KKT residual norm used as the line-search merit.
    double merit(const Eigen::VectorXd& z, const Eigen::VectorXd& s, const Eigen::VectorXd& y,
                 double mu) const {
        const double rd = dual_residual(z, s, y, mu).squaredNorm();
        const double rp = (core_.A * z - core_.rhs).squaredNorm();
        const double rc = (constraint_values(z) - s).squaredNorm();
        return rd + rp + rc;
    }

    AllocationResult run(const AllocationProblem& prob) {
        AllocationResult res;

        Eigen::VectorXd z(N_);
        for (int l = 0; l < core_.m; ++l) {
            double p0 = std::max(0.02 * core_.w_norm[l], 1e-9);
            if (cap_ > 0.0) p0 = std::min(p0, 0.5 * cap_);
            z(l) = p0;
        }
        const double vn2 = prob.v_nominal() * prob.v_nominal();
        for (int k = 0; k < core_.nk; ++k) {
            // Nominal squared voltage, pulled inside tightened bounds if needed.
            double u0 = vn2;
            const double margin = 0.05 * (core_.hi[k] - core_.lo[k]);
            u0 = std::min(std::max(u0, core_.lo[k] + margin), core_.hi[k] - margin);
            z(core_.u_var(k)) = u0;
        }
        for (int e = 0; e < core_.ek; ++e) {
            const auto& cn = core_.cones[e];
            const double ui = z(core_.u_var(cn.iu));
            const double uj = z(core_.u_var(cn.ju));
            z(core_.re_var(e)) = 0.93 * std::sqrt(ui * uj);
            z(core_.im_var(e)) = -0.05;
        }
        Eigen::VectorXd s = constraint_values(z); // consistent start, rho = 0
        Eigen::VectorXd y = Eigen::VectorXd::Zero(M_);

        const double mu_end = std::clamp(0.01 * tol_, 1e-12, 1e-2);
        double mu = kMu0;
        const double eps_pri = 1e-10 * (1.0 + core_.rhs.lpNorm<Eigen::Infinity>());

        Eigen::MatrixXd H(N_, N_);
        Eigen::MatrixXd K(N_ + M_, N_ + M_);
        Eigen::VectorXd rhs(N_ + M_), sol(N_ + M_);

        int iters = 0;
        int final_steps = 0;
        for (;;) {
            const Eigen::VectorXd g_of_z = constraint_values(z);
            const Eigen::VectorXd r_dual = dual_residual(z, s, y, mu);
            const Eigen::VectorXd r_pri = core_.A * z - core_.rhs;
            const double rho_inf = (g_of_z - s).lpNorm<Eigen::Infinity>();
            const double rd = r_dual.lpNorm<Eigen::Infinity>();
            const bool feas = r_pri.lpNorm<Eigen::Infinity>() <= eps_pri && rho_inf <= eps_pri;
            const double gscale = objective_grad_scale(z);

            if (feas) {
                if (mu <= mu_end &&
                    (rd <= 1e-8 * gscale || (final_steps > 20 && rd <= 1e-6 * gscale))) {
                    extract(prob, z, s, y, mu, iters, res);
                    return res;
                }
                if (mu > mu_end && rd <= kCenterRel * gscale) {
                    mu = std::max(mu * kMuShrink, mu_end);
                    continue;
                }
            }
            if (mu <= mu_end) ++final_steps;

            if (iters >= opts_.max_iterations) {
                extract(prob, z, s, y, mu, iters, res);
                res.status = SolveStatus::NumericalFailure;
                res.duals.available = false;
                res.message = "iteration cap reached before convergence";
                return res;
            }

            assemble_hessian(z, s, mu, H);
            K.setZero();
            K.topLeftCorner(N_, N_) = H;
            K.topRightCorner(N_, M_) = core_.A.transpose();
            K.bottomLeftCorner(M_, N_) = core_.A;
            rhs.head(N_) = condensed_rhs(z, s, g_of_z, mu);
            rhs.tail(M_) = core_.rhs - core_.A * z;

            Eigen::PartialPivLU<Eigen::MatrixXd> lu(K);
            sol = lu.solve(rhs);
            sol += lu.solve(rhs - K * sol); // one refinement pass
            if (!sol.allFinite()) {
                extract(prob, z, s, y, mu, iters, res);
                res.status = SolveStatus::NumericalFailure;
                res.duals.available = false;
                res.message = "linear solve produced non-finite step";
                return res;
            }
            const Eigen::VectorXd dz = sol.head(N_);
            const Eigen::VectorXd y_next = sol.tail(M_);
            const Eigen::VectorXd ds = slack_step(z, s, g_of_z, dz);
            const Eigen::VectorXd dy = y_next - y;

            // Largest step keeping s > 0 and P > 0.
            double amax = std::numeric_limits<double>::infinity();
            for (int k = 0; k < S_; ++k) {
                if (ds(k) < 0.0) amax = std::min(amax, -s(k) / ds(k));
            }
            for (int l = 0; l < core_.m; ++l) {
                if (dz(l) < 0.0) amax = std::min(amax, -z(l) / dz(l));
            }

            double alpha = std::min(1.0, kBoundaryFrac * amax);
            const double merit0 = r_dual.squaredNorm() + r_pri.squaredNorm() +
                                  (g_of_z - s).squaredNorm();
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                const Eigen::VectorXd z_try = z + alpha * dz;
                if (in_domain(z_try)) {
                    const Eigen::VectorXd s_try = s + alpha * ds;
                    const Eigen::VectorXd y_try = y + alpha * dy;
                    const double m_try = merit(z_try, s_try, y_try, mu);
                    const double target = (1.0 - 0.01 * alpha);
                    if (m_try <= target * target * merit0) {
                        z = z_try;
                        s = s_try;
                        y = y_try;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            ++iters;
            if (!accepted) {
                extract(prob, z, s, y, mu, iters, res);
                res.status = SolveStatus::NumericalFailure;
                res.duals.available = false;
                res.message = "line search stalled";
                return res;
            }
        }
    }

private:
    void extract(const AllocationProblem& prob, const Eigen::VectorXd& z,
                 const Eigen::VectorXd& s, const Eigen::VectorXd& y, double mu, int iters,
                 AllocationResult& res) const {
        const NetworkModel& net = prob.network();
        const auto& entries = prob.request().entries;

        res.status = SolveStatus::Optimal;
        res.degenerate = false;
        res.iterations = iters;
        res.message.clear();

        res.powers.assign(entries.size(), 0.0);
        double obj = 0.0;
        for (int l = 0; l < core_.m; ++l) {
            const int idx = core_.pos_entry[l];
            res.powers[idx] = z(l);
            obj += entries[idx].weight * std::log(z(l));
        }
        res.objective = obj;

        res.v_sq.assign(net.bus_count(), 0.0);
        for (int i : net.bfs_order()) {
            const int k = core_.bus_to_kept[i];
            if (k >= 0) {
                res.v_sq[i] = z(core_.u_var(k));
            } else {
                res.v_sq[i] = res.v_sq[net.parent_of(i)]; // zero-flow subtree
            }
        }

        res.branch_vars.assign(net.branch_count(), BranchVars{});
        for (std::size_t e = 0; e < net.branch_count(); ++e) {
            const int ke = core_.branch_to_kept[e];
            if (ke >= 0) {
                res.branch_vars[e] = BranchVars{z(core_.re_var(ke)), z(core_.im_var(ke))};
            } else {
                const double u = res.v_sq[net.bus_index(net.branches()[e].from)];
                res.branch_vars[e] = BranchVars{u, 0.0};
            }
        }

        res.duals.available = true;
        res.duals.mu = mu;
        res.duals.w_scale = core_.w_scale;
        res.duals.y.assign(y.data(), y.data() + y.size());
        res.duals.slacks.assign(s.data(), s.data() + s.size());
    }

    const AllocationProblem::Core& core_;
    const SolverOptions& opts_;
    double tol_;
    double cap_ = 0.0;
    int N_ = 0;
    int M_ = 0;
    int S_ = 0;
};

} // namespace

AllocationResult solve(const AllocationProblem& problem, double tol) {
    AllocationResult res;
    if (!(tol > 0.0)) {
        res.status = SolveStatus::NumericalFailure;
        res.message = "tolerance must be positive";
        return res;
    }

    const NetworkModel& net = problem.network();

    if (problem.infeasible()) {
        res.status = SolveStatus::Infeasible;
        res.message = problem.infeasible_reason();
        return res;
    }

    if (problem.degenerate()) {
        // No positive weights: the idle network is the solution in closed form.
        const double vn2 = problem.v_nominal() * problem.v_nominal();
        for (const Bus& b : net.buses()) {
            if (vn2 < b.v_min * b.v_min || vn2 > b.v_max * b.v_max) {
                res.status = SolveStatus::Infeasible;
                res.message = "idle network violates voltage bounds at bus " +
                              std::to_string(b.id);
                return res;
            }
        }
        res.status = SolveStatus::Optimal;
        res.degenerate = true;
        res.powers.assign(problem.request().entries.size(), 0.0);
        res.v_sq.assign(net.bus_count(), vn2);
        res.branch_vars.assign(net.branch_count(), BranchVars{vn2, 0.0});
        res.objective = 0.0;
        res.message = "degenerate request: all weights zero";
        return res;
    }

    Ipm ipm(problem, tol);
    return ipm.run(problem);
}

AllocationResult solve(const AllocationProblem& problem) {
    return solve(problem, problem.options().tol);
}

} // namespace evfair
