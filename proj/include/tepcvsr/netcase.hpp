#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tepcvsr {

struct Bus {
  int id = 0;
  bool is_slack = false;
  double base_kv = 0.0;
  friend bool operator==(const Bus&, const Bus&) = default;
};

/// Branch record. Reactance and susceptance are per unit on the case base.
/// A zero MATPOWER rating means "unlimited" and is stored as +inf.
struct Branch {
  int id = 0;  // 1-based row order in mpc.branch
  int from_bus = 0;
  int to_bus = 0;
  double resistance = 0.0;
  double reactance = 0.0;
  double susceptance = 0.0;  // 1 / reactance
  double charging = 0.0;
  double rate_a = 0.0;  // long-term rating, MW
  double rate_b = 0.0;  // short-term rating, MW
  double rate_c = 0.0;
  double tap_ratio = 0.0;
  double shift_deg = 0.0;
  bool in_service = true;
  bool is_transformer = false;
  friend bool operator==(const Branch&, const Branch&) = default;
};

struct Generator {
  int id = 0;  // 1-based row order in mpc.gen
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost = 0.0;  // $/MWh, linear term of gencost
  bool in_service = true;
  friend bool operator==(const Generator&, const Generator&) = default;
};

struct Load {
  int id = 0;  // 1-based, in bus order over buses with nonzero Pd
  int bus = 0;
  double p_demand = 0.0;  // MW
  friend bool operator==(const Load&, const Load&) = default;
};

/// The static grid. Read-only after construction.
class NetworkCase {
 public:
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Load> loads;
  std::vector<std::string> warnings;

  /// Checks every structural invariant and builds the lookup tables.
  /// Throws ValidationError on the first violation.
  void validate();

  const Bus& bus(int id) const;
  const Branch& branch(int id) const;
  const Generator& generator(int id) const;
  std::size_t bus_position(int id) const;
  bool has_bus(int id) const { return bus_pos_.count(id) != 0; }
  bool has_branch(int id) const { return branch_pos_.count(id) != 0; }
  int slack_bus() const;
  double total_demand() const;

  /// Compares the grid data only (warnings and lookup tables are ignored).
  friend bool operator==(const NetworkCase& a, const NetworkCase& b) {
    return a.base_mva == b.base_mva && a.buses == b.buses && a.branches == b.branches &&
           a.generators == b.generators && a.loads == b.loads;
  }

 private:
  std::unordered_map<int, std::size_t> bus_pos_;
  std::unordered_map<int, std::size_t> branch_pos_;
  std::unordered_map<int, std::size_t> gen_pos_;
};

/// Parses MATPOWER version 2 case text (baseMVA, bus, gen, branch, optional gencost).
/// Throws ParseError (with line number) or ValidationError.
NetworkCase parse_matpower(std::string_view text);
NetworkCase read_matpower_file(const std::filesystem::path& path);

/// Writes the case back in MATPOWER format; parse_matpower(write_matpower(c)) reproduces c.
std::string write_matpower(const NetworkCase& c);

/// In-service branches whose removal disconnects the in-service graph.
/// Throws ValidationError naming the components if the case is already disconnected.
std::set<int> islanding_contingencies(const NetworkCase& c);

/// Connected components of the in-service graph as sorted bus-id lists.
std::vector<std::vector<int>> connected_components(const NetworkCase& c);

}  // namespace tepcvsr
