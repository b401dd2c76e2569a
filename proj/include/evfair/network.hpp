#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "evfair/errors.hpp"

namespace evfair {

using BusId = int;

/// A node of the distribution grid. Voltage limits are on the magnitude,
/// per-unit; constraints act on the squared magnitude internally.
struct Bus {
    BusId id = 0;
    double v_min = 0.9;
    double v_max = 1.1;
    bool is_root = false;
    bool chargeable = false;
};

/// A line between two buses. g and b are derived from (r, x) on construction
/// with the convention y = g - jb, g = r/(r^2+x^2), b = x/(r^2+x^2), so b is
/// the susceptance magnitude of an inductive line.
struct Branch {
    BusId from = 0;
    BusId to = 0;
    double r = 0.0;
    double x = 0.0;
    double g = 0.0;
    double b = 0.0;
};

/// Conductance/susceptance pair for a series impedance r + jx.
/// Rejects zero-impedance lines.
struct Admittance {
    double g = 0.0;
    double b = 0.0;
};
Admittance admittance(double r, double x);

/// Validated radial network: connected, acyclic, exactly one root.
/// Immutable after construction; safe to share across threads.
class NetworkModel {
public:
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Branch>& branches() const { return branches_; }

    BusId root() const { return root_; }
    int root_index() const { return root_index_; }

    std::size_t bus_count() const { return buses_.size(); }
    std::size_t branch_count() const { return branches_.size(); }

    /// Dense index of a bus id; throws NetworkError for unknown ids.
    int bus_index(BusId id) const;
    const Bus& bus(BusId id) const { return buses_[bus_index(id)]; }

    /// Branch indices incident to the bus at dense index `bus_idx`.
    const std::vector<int>& incident(int bus_idx) const { return incident_[bus_idx]; }

    /// Dense bus index of the parent in the tree rooted at the root bus;
    /// -1 for the root itself.
    int parent_of(int bus_idx) const { return parent_[bus_idx]; }
    /// Branch index connecting `bus_idx` to its parent; -1 for the root.
    int parent_branch_of(int bus_idx) const { return parent_branch_[bus_idx]; }
    /// Dense bus indices in breadth-first order from the root (root first,
    /// every parent before its children).
    const std::vector<int>& bfs_order() const { return bfs_order_; }

    /// Bus ids marked chargeable, ascending.
    std::vector<BusId> chargeable_buses() const;

    bool is_chargeable(BusId id) const { return bus(id).chargeable; }

private:
    friend NetworkModel build_network(std::vector<Bus> buses, std::vector<Branch> branches);

    std::vector<Bus> buses_;
    std::vector<Branch> branches_;
    BusId root_ = 0;
    int root_index_ = 0;
    std::vector<std::vector<int>> incident_;
    std::vector<int> parent_;
    std::vector<int> parent_branch_;
    std::vector<int> bfs_order_;
};

/// Validates and assembles a network. Derives branch admittances, checks the
/// tree property, id uniqueness, voltage limit sanity and root uniqueness.
NetworkModel build_network(std::vector<Bus> buses, std::vector<Branch> branches);

/// Root(0) -- hub(1) -- leaves(2..n_leaves+1) topology with identical lines.
/// Leaves are the chargeable buses.
NetworkModel star_network(int n_leaves, double r, double x, double v_min = 0.9,
                          double v_max = 1.1);

/// Reads the versioned text format (see save_network) and validates as
/// build_network does. Parse failures carry file/line context.
NetworkModel load_network(const std::filesystem::path& path);
NetworkModel parse_network(std::istream& in, const std::string& origin = "<stream>");

/// Writes the structured text format:
///
///   evfair-network 1
///   [buses]
///   # id v_min v_max root chargeable
///   0 0.9 1.1 1 0
///   [branches]
///   # from to r x
///   ...
void save_network(const NetworkModel& net, std::ostream& out);
std::string serialize_network(const NetworkModel& net);

} // namespace evfair
