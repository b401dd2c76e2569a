#include "evfair/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace evfair {

Admittance admittance(double r, double x) {
    if (r < 0.0 || x < 0.0) {
        throw NetworkError("branch impedance must be non-negative (r=" + std::to_string(r) +
                           ", x=" + std::to_string(x) + ")");
    }
    const double z2 = r * r + x * x;
    if (z2 <= 0.0) {
        throw NetworkError("zero-impedance branch rejected (r = x = 0)");
    }
    return Admittance{r / z2, x / z2};
}

int NetworkModel::bus_index(BusId id) const {
    // Bus lists are small; linear scan keeps the model trivially copyable.
    for (std::size_t i = 0; i < buses_.size(); ++i) {
        if (buses_[i].id == id) return static_cast<int>(i);
    }
    throw NetworkError("unknown bus id " + std::to_string(id));
}

std::vector<BusId> NetworkModel::chargeable_buses() const {
    std::vector<BusId> out;
    for (const Bus& b : buses_) {
        if (b.chargeable) out.push_back(b.id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

NetworkModel build_network(std::vector<Bus> buses, std::vector<Branch> branches) {
    if (buses.empty()) throw NetworkError("network has no buses");

    std::unordered_map<BusId, int> index;
    index.reserve(buses.size());
    int root_index = -1;
    for (std::size_t i = 0; i < buses.size(); ++i) {
        const Bus& b = buses[i];
        if (!index.emplace(b.id, static_cast<int>(i)).second) {
            throw NetworkError("duplicate bus id " + std::to_string(b.id));
        }
        if (!(b.v_min > 0.0) || !(b.v_min <= b.v_max)) {
            throw NetworkError("bus " + std::to_string(b.id) +
                               ": voltage limits must satisfy 0 < v_min <= v_max");
        }
        if (b.is_root) {
            if (root_index >= 0) throw NetworkError("multiple root buses");
            root_index = static_cast<int>(i);
            if (b.chargeable) throw NetworkError("root bus cannot be chargeable");
        }
    }
    if (root_index < 0) throw NetworkError("no root bus");

    if (branches.size() != buses.size() - 1) {
        throw NetworkError("not a tree: " + std::to_string(branches.size()) + " branches for " +
                           std::to_string(buses.size()) + " buses");
    }

    std::vector<std::vector<int>> incident(buses.size());
    for (std::size_t e = 0; e < branches.size(); ++e) {
        Branch& br = branches[e];
        auto fi = index.find(br.from);
        auto ti = index.find(br.to);
        if (fi == index.end() || ti == index.end()) {
            throw NetworkError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                               " references an unknown bus");
        }
        if (br.from == br.to) {
            throw NetworkError("self-loop at bus " + std::to_string(br.from));
        }
        const Admittance y = admittance(br.r, br.x);
        br.g = y.g;
        br.b = y.b;
        incident[fi->second].push_back(static_cast<int>(e));
        incident[ti->second].push_back(static_cast<int>(e));
    }

    // BFS from the root: detects disconnection, and with |E| = |V|-1 already
    // checked, any revisit means a cycle.
    std::vector<int> parent(buses.size(), -2);
    std::vector<int> parent_branch(buses.size(), -1);
    std::vector<int> order;
    order.reserve(buses.size());
    parent[root_index] = -1;
    std::queue<int> q;
    q.push(root_index);
    std::size_t visited = 1;
    while (!q.empty()) {
        const int u = q.front();
        q.pop();
        order.push_back(u);
        for (int e : incident[u]) {
            const Branch& br = branches[e];
            const int v = (index.at(br.from) == u) ? index.at(br.to) : index.at(br.from);
            if (v == u) continue;
            if (parent[v] != -2) {
                if (parent_branch[u] != e) {
                    throw NetworkError("cycle detected through bus " + std::to_string(buses[v].id));
                }
                continue;
            }
            parent[v] = u;
            parent_branch[v] = e;
            ++visited;
            q.push(v);
        }
    }
    if (visited != buses.size()) {
        throw NetworkError("disconnected network: " + std::to_string(buses.size() - visited) +
                           " unreachable bus(es)");
    }

    NetworkModel net;
    net.buses_ = std::move(buses);
    net.branches_ = std::move(branches);
    net.root_ = net.buses_[root_index].id;
    net.root_index_ = root_index;
    net.incident_ = std::move(incident);
    net.parent_ = std::move(parent);
    net.parent_branch_ = std::move(parent_branch);
    net.bfs_order_ = std::move(order);
    return net;
}

NetworkModel star_network(int n_leaves, double r, double x, double v_min, double v_max) {
    if (n_leaves < 1) throw NetworkError("star network needs at least one leaf");
    std::vector<Bus> buses;
    buses.push_back(Bus{0, v_min, v_max, true, false});
    buses.push_back(Bus{1, v_min, v_max, false, false});
    std::vector<Branch> branches;
    branches.push_back(Branch{0, 1, r, x});
    for (int l = 0; l < n_leaves; ++l) {
        const BusId id = 2 + l;
        buses.push_back(Bus{id, v_min, v_max, false, true});
        branches.push_back(Branch{1, id, r, x});
    }
    return build_network(std::move(buses), std::move(branches));
}

namespace {

const char* kHeader = "evfair-network 1";

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

bool parse_flag(const std::string& tok, const std::string& origin, int line) {
    if (tok == "0") return false;
    if (tok == "1") return true;
    throw ParseError(origin, line, "expected flag 0 or 1, got '" + tok + "'");
}

double parse_num(const std::string& tok, const std::string& origin, int line,
                 const char* field) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError(origin, line, std::string("invalid number for field '") + field +
                                           "': '" + tok + "'");
    }
}

long parse_int(const std::string& tok, const std::string& origin, int line,
               const char* field) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ParseError(origin, line, std::string("invalid integer for field '") + field +
                                           "': '" + tok + "'");
    }
}

} // namespace

NetworkModel parse_network(std::istream& in, const std::string& origin) {
    std::string line;
    int lineno = 0;

    if (!std::getline(in, line)) throw ParseError(origin, 1, "empty file");
    ++lineno;
    if (trim(line) != kHeader) {
        throw ParseError(origin, lineno,
                         std::string("missing version header, expected '") + kHeader + "'");
    }

    enum class Section { None, Buses, Branches };
    Section section = Section::None;
    std::vector<Bus> buses;
    std::vector<Branch> branches;

    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t == "[buses]") {
            section = Section::Buses;
            continue;
        }
        if (t == "[branches]") {
            section = Section::Branches;
            continue;
        }
        if (t[0] == '[') throw ParseError(origin, lineno, "unknown section '" + t + "'");

        std::istringstream row(t);
        std::vector<std::string> tok;
        std::string w;
        while (row >> w) tok.push_back(w);

        switch (section) {
        case Section::None:
            throw ParseError(origin, lineno, "data before any [buses]/[branches] section");
        case Section::Buses: {
            if (tok.size() != 5) {
                throw ParseError(origin, lineno,
                                 "bus row needs 5 fields (id v_min v_max root chargeable), got " +
                                     std::to_string(tok.size()));
            }
            Bus b;
            b.id = static_cast<BusId>(parse_int(tok[0], origin, lineno, "id"));
            b.v_min = parse_num(tok[1], origin, lineno, "v_min");
            b.v_max = parse_num(tok[2], origin, lineno, "v_max");
            b.is_root = parse_flag(tok[3], origin, lineno);
            b.chargeable = parse_flag(tok[4], origin, lineno);
            buses.push_back(b);
            break;
        }
        case Section::Branches: {
            if (tok.size() != 4) {
                throw ParseError(origin, lineno,
                                 "branch row needs 4 fields (from to r x), got " +
                                     std::to_string(tok.size()));
            }
            Branch br;
            br.from = static_cast<BusId>(parse_int(tok[0], origin, lineno, "from"));
            br.to = static_cast<BusId>(parse_int(tok[1], origin, lineno, "to"));
            br.r = parse_num(tok[2], origin, lineno, "r");
            br.x = parse_num(tok[3], origin, lineno, "x");
            branches.push_back(br);
            break;
        }
        }
    }

    return build_network(std::move(buses), std::move(branches));
}

NetworkModel load_network(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    return parse_network(in, path.string());
}

void save_network(const NetworkModel& net, std::ostream& out) {
    out << kHeader << "\n";
    out << "[buses]\n";
    out << "# id v_min v_max root chargeable\n";
    char buf[160];
    for (const Bus& b : net.buses()) {
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g %d %d\n", b.id, b.v_min, b.v_max,
                      b.is_root ? 1 : 0, b.chargeable ? 1 : 0);
        out << buf;
    }
    out << "[branches]\n";
    out << "# from to r x\n";
    for (const Branch& br : net.branches()) {
        std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g\n", br.from, br.to, br.r, br.x);
        out << buf;
    }
}

std::string serialize_network(const NetworkModel& net) {
    std::ostringstream os;
    save_network(net, os);
    return os.str();
}

} // namespace evfair
