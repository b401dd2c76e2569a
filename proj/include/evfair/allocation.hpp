#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "evfair/network.hpp"

namespace evfair {

enum class SolveStatus { Optimal, Infeasible, NumericalFailure };
const char* to_string(SolveStatus s);

/// One vehicle asking for power at a bus. Zero-weight entries are carried
/// through the pipeline but excluded from the objective and receive P = 0.
struct RequestEntry {
    int vehicle = 0;
    BusId bus = 0;
    double weight = 0.0;
};

struct AllocationRequest {
    double t = 0.0;
    std::vector<RequestEntry> entries;
};

struct SolverOptions {
    double tol = 1e-8;        // convergence tolerance; see solve()
    int max_iterations = 200; // total Newton step cap
    double p_cap = 0.0;       // optional per-vehicle power cap; <= 0 disables.
                              // A binding cap voids the cone-tightness guarantee.
};

struct BranchVars {
    double re = 0.0;
    double im = 0.0;
};

/// One time step's cone program:
///
///   maximise   sum_l w_l log(P_l)
///   subject to nodal active balance   (per non-root bus)
///              nodal reactive balance (per non-root bus, zero EV reactive demand)
///              squared voltage bounds (per bus)
///              || (2 Re V_ij, 2 Im V_ij, V_ii - V_jj) ||_2 <= V_ii + V_jj  (per branch)
///              V_root,root = v_nominal^2
///
/// Sign convention of the balance rows: power flows from the feeder towards
/// loads, i.e. the net complex injection at a loaded bus equals minus its
/// consumption. This is validated against the exact AC power-flow oracle.
///
/// Presolve: subtrees carrying no positive-weight load draw no current, so
/// their voltages equal the nearest loaded ancestor's and their cone rows are
/// tight by construction. Those buses/branches are eliminated before the
/// numerical solve and reinstated in the result; their voltage bounds are
/// folded into the anchor bus.
class AllocationProblem {
public:
    /// Presolved numerical core. Variable vector z = [P | u | (re, im) per branch].
    struct Core {
        int m = 0;  // positive-weight power variables
        int nk = 0; // kept buses (root first, parents before children)
        int ek = 0; // kept branches
        int n_var() const { return m + nk + 2 * ek; }
        int n_eq() const { return 2 * (nk - 1) + 1; }
        int u_var(int kept_pos) const { return m + kept_pos; }
        int re_var(int kept_e) const { return m + nk + 2 * kept_e; }
        int im_var(int kept_e) const { return m + nk + 2 * kept_e + 1; }

        std::vector<int> pos_entry;   // request entry index per P variable
        std::vector<double> w_norm;   // weights scaled so max == 1
        double w_scale = 1.0;

        std::vector<int> kept_bus;      // dense bus index per kept position
        std::vector<int> bus_to_kept;   // dense bus -> kept position, -1 if pruned
        std::vector<int> kept_branch;   // branch index per kept cone
        std::vector<int> branch_to_kept;
        std::vector<double> lo, hi;     // effective squared-voltage bounds per kept bus

        struct Cone {
            int iu = 0;     // kept position of the branch 'from' bus
            int ju = 0;     // kept position of the branch 'to' bus
            double g = 0.0;
            double b = 0.0;
        };
        std::vector<Cone> cones;

        Eigen::MatrixXd A; // n_eq x n_var
        Eigen::VectorXd rhs;
    };

    const NetworkModel& network() const { return *net_; }
    const AllocationRequest& request() const { return request_; }
    const SolverOptions& options() const { return options_; }
    double v_nominal() const { return v_nominal_; }

    /// All positive weights absent (or no entries at all): the allocation is
    /// identically zero and no solve is performed.
    bool degenerate() const { return degenerate_; }

    /// Bounds proven empty during presolve.
    bool infeasible() const { return infeasible_; }
    const std::string& infeasible_reason() const { return infeasible_reason_; }

    // Logical problem dimensions (independent of presolve).
    int p_var_count() const { return static_cast<int>(core_.pos_entry.size()); }
    int v_var_count() const { return static_cast<int>(net_->bus_count()); }
    int cone_count() const { return static_cast<int>(net_->branch_count()); }

    const Core& core() const { return core_; }

private:
    friend AllocationProblem build_problem(const NetworkModel& net,
                                           const AllocationRequest& request, double v_nominal,
                                           SolverOptions options);

    const NetworkModel* net_ = nullptr;
    AllocationRequest request_;
    SolverOptions options_;
    double v_nominal_ = 1.0;
    bool degenerate_ = false;
    bool infeasible_ = false;
    std::string infeasible_reason_;
    Core core_;
};

/// Validates the request (chargeable non-root buses, non-negative weights),
/// prunes unloaded subtrees and assembles the equality system.
AllocationProblem build_problem(const NetworkModel& net, const AllocationRequest& request,
                                double v_nominal = 1.0, SolverOptions options = {});

struct AllocationResult {
    SolveStatus status = SolveStatus::NumericalFailure;
    bool degenerate = false;
    int iterations = 0;
    double objective = 0.0; // sum of w_l log P_l over positive weights
    std::string message;

    std::vector<double> powers;          // per request entry; 0 for zero weights
    std::vector<double> v_sq;            // per dense bus index
    std::vector<BranchVars> branch_vars; // per branch index

    /// Multiplier data for kkt_residuals, on the weight-normalized scale.
    struct Duals {
        bool available = false;
        double mu = 0.0;     // final barrier parameter
        double w_scale = 1.0;
        std::vector<double> y;      // equality multipliers (core row order)
        std::vector<double> slacks; // [box lo | box hi | cone | cap] in core order;
                                    // inequality multipliers are mu / slack
    } duals;
};

/// Interior-point solve. The log objective acts as its own barrier for P > 0;
/// voltage boxes and per-branch cones enter through a log / log-det barrier
/// scaled by a decreasing parameter mu. `tol` bounds the final mu: every
/// complementarity product in the KKT report is O(tol).
AllocationResult solve(const AllocationProblem& problem, double tol);
AllocationResult solve(const AllocationProblem& problem);

/// Per-branch slack of the second-order cone rows at a solution:
///   gap_e = (V_ii + V_jj) - || (2 Re V_ij, 2 Im V_ij, V_ii - V_jj) ||_2.
/// The relaxation reproduced a physical power flow iff all gaps vanish.
struct ExactnessReport {
    std::vector<double> gaps; // aligned with network branch order
    double max_gap = 0.0;
    double tol = 0.0;
    bool exact = false;
};
ExactnessReport check_exactness(const AllocationResult& result, const NetworkModel& net,
                                double tol = 1e-6);

/// Residuals of the original KKT system evaluated at the returned solution,
/// on the weight-normalized scale (all weights divided by their maximum).
struct KktReport {
    bool evaluated = false;
    std::string note;
    double stationarity = 0.0;
    double primal_equality = 0.0;
    double primal_inequality = 0.0;
    double dual_feasibility = 0.0;  // multiplier/cone-membership violation
    double complementarity = 0.0;   // max per-constraint product
    double max_residual() const;
};
KktReport kkt_residuals(const AllocationProblem& problem, const AllocationResult& result);

/// Human-readable dump of the presolved instance (variables, equality rows,
/// bounds, cone list) for cross-checking against external conic solvers.
void dump_problem(const AllocationProblem& problem, std::ostream& out);

} // namespace evfair
