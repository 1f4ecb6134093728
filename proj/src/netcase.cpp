#include "tepcvsr/netcase.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>

#include "tepcvsr/error.hpp"

namespace tepcvsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct MatrixRow {
  int line = 0;
  std::vector<double> values;
};

struct RawCase {
  std::optional<double> base_mva;
  std::optional<std::string> version;
  std::map<std::string, std::vector<MatrixRow>> matrices;
};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_number(std::string_view tok, int line) {
  if (tok == "Inf" || tok == "inf") return kInf;
  if (tok == "-Inf" || tok == "-inf") return -kInf;
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  if (!tok.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw ParseError(fmt::format("invalid number '{}'", tok), line);
  }
  return v;
}

std::vector<double> parse_row(std::string_view row, int line) {
  std::vector<double> out;
  std::size_t i = 0;
  while (i < row.size()) {
    while (i < row.size() && (row[i] == ' ' || row[i] == '\t' || row[i] == ',' || row[i] == '\r')) ++i;
    if (i >= row.size()) break;
    std::size_t j = i;
    while (j < row.size() && row[j] != ' ' && row[j] != '\t' && row[j] != ',' && row[j] != '\r') ++j;
    out.push_back(parse_number(row.substr(i, j - i), line));
    i = j;
  }
  return out;
}

std::string_view strip_comment(std::string_view line) {
  const auto pct = line.find('%');
  return pct == std::string_view::npos ? line : line.substr(0, pct);
}

RawCase scan(std::string_view text) {
  RawCase raw;
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int lineno = static_cast<int>(li) + 1;
    auto line = trim(strip_comment(lines[li]));
    if (line.rfind("mpc.", 0) != 0) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected '=' after field name", lineno);
    const std::string name(trim(line.substr(4, eq - 4)));
    auto rhs = trim(line.substr(eq + 1));

    if (rhs.empty() || rhs.front() != '[') {
      if (!rhs.empty() && rhs.back() == ';') rhs = trim(rhs.substr(0, rhs.size() - 1));
      if (name == "baseMVA") {
        raw.base_mva = parse_number(rhs, lineno);
      } else if (name == "version") {
        if (rhs.size() >= 2 && (rhs.front() == '\'' || rhs.front() == '"')) rhs = rhs.substr(1, rhs.size() - 2);
        raw.version = std::string(rhs);
      }
      continue;
    }

    // Matrix literal: collect text up to the closing bracket, splitting rows on ';' and newlines.
    std::vector<MatrixRow> rows;
    std::string_view body = rhs.substr(1);
    std::size_t cur = li;
    bool closed = false;
    while (true) {
      const int row_line = static_cast<int>(cur) + 1;
      auto close = body.find(']');
      auto chunk = close == std::string_view::npos ? body : body.substr(0, close);
      std::size_t start = 0;
      while (start <= chunk.size()) {
        auto semi = chunk.find(';', start);
        if (semi == std::string_view::npos) semi = chunk.size();
        auto piece = trim(chunk.substr(start, semi - start));
        if (!piece.empty()) rows.push_back({row_line, parse_row(piece, row_line)});
        start = semi + 1;
      }
      if (close != std::string_view::npos) {
        closed = true;
        break;
      }
      if (++cur >= lines.size()) break;
      body = trim(strip_comment(lines[cur]));
    }
    if (!closed) throw ParseError(fmt::format("matrix mpc.{} is not closed with ']'", name), lineno);
    li = cur;
    raw.matrices[name] = std::move(rows);
  }
  return raw;
}

const std::vector<MatrixRow>& require_matrix(const RawCase& raw, const std::string& name) {
  auto it = raw.matrices.find(name);
  if (it == raw.matrices.end()) throw ParseError(fmt::format("missing matrix mpc.{}", name), 0);
  return it->second;
}

void require_columns(const MatrixRow& row, std::size_t n, std::string_view matrix) {
  if (row.values.size() < n) {
    throw ParseError(fmt::format("mpc.{} row has {} columns, expected at least {}", matrix, row.values.size(), n),
                     row.line);
  }
}

int as_int(double v, int line, std::string_view what) {
  if (v != std::floor(v) || std::abs(v) > 1e9) {
    throw ParseError(fmt::format("{} must be an integer, got {}", what, v), line);
  }
  return static_cast<int>(v);
}

double rating(double v) { return v == 0.0 ? kInf : v; }

}  // namespace

void NetworkCase::validate() {
  bus_pos_.clear();
  branch_pos_.clear();
  gen_pos_.clear();

  if (!(base_mva > 0.0)) throw ValidationError("baseMVA must be positive");
  int slack_count = 0;
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (!bus_pos_.emplace(buses[i].id, i).second) {
      throw ValidationError(fmt::format("duplicate bus id {}", buses[i].id));
    }
    slack_count += buses[i].is_slack ? 1 : 0;
  }
  if (slack_count == 0) throw ValidationError("no slack bus (type 3) in case");
  if (slack_count > 1) throw ValidationError(fmt::format("{} slack buses in case, expected exactly one", slack_count));

  for (std::size_t i = 0; i < branches.size(); ++i) {
    auto& br = branches[i];
    if (!branch_pos_.emplace(br.id, i).second) throw ValidationError(fmt::format("duplicate branch id {}", br.id));
    if (!has_bus(br.from_bus) || !has_bus(br.to_bus)) {
      throw ValidationError(fmt::format("branch {} references unknown bus ({} -> {})", br.id, br.from_bus, br.to_bus));
    }
    if (br.from_bus == br.to_bus) throw ValidationError(fmt::format("branch {} is a self loop", br.id));
    if (br.in_service && !(br.reactance > 0.0)) {
      throw ValidationError(fmt::format(
          "branch {} ({}-{}) has non-positive reactance {}; series-capacitor overcompensation is unsupported", br.id,
          br.from_bus, br.to_bus, br.reactance));
    }
    br.susceptance = br.reactance != 0.0 ? 1.0 / br.reactance : 0.0;
    if (!(br.rate_a > 0.0) || !(br.rate_b > 0.0)) {
      throw ValidationError(fmt::format("branch {} has non-positive thermal rating", br.id));
    }
  }
  for (std::size_t i = 0; i < generators.size(); ++i) {
    const auto& g = generators[i];
    if (!gen_pos_.emplace(g.id, i).second) throw ValidationError(fmt::format("duplicate generator id {}", g.id));
    if (!has_bus(g.bus)) throw ValidationError(fmt::format("generator {} at unknown bus {}", g.id, g.bus));
    if (g.p_min > g.p_max) {
      throw ValidationError(fmt::format("generator {} has p_min {} > p_max {}", g.id, g.p_min, g.p_max));
    }
    if (g.cost < 0.0) throw ValidationError(fmt::format("generator {} has negative cost {}", g.id, g.cost));
  }
  for (const auto& l : loads) {
    if (!has_bus(l.bus)) throw ValidationError(fmt::format("load {} at unknown bus {}", l.id, l.bus));
    if (l.p_demand < 0.0) throw ValidationError(fmt::format("load {} at bus {} is negative", l.id, l.bus));
  }
}

const Bus& NetworkCase::bus(int id) const {
  auto it = bus_pos_.find(id);
  if (it == bus_pos_.end()) throw ValidationError(fmt::format("unknown bus {}", id));
  return buses[it->second];
}

const Branch& NetworkCase::branch(int id) const {
  auto it = branch_pos_.find(id);
  if (it == branch_pos_.end()) throw ValidationError(fmt::format("unknown branch {}", id));
  return branches[it->second];
}

const Generator& NetworkCase::generator(int id) const {
  auto it = gen_pos_.find(id);
  if (it == gen_pos_.end()) throw ValidationError(fmt::format("unknown generator {}", id));
  return generators[it->second];
}

std::size_t NetworkCase::bus_position(int id) const {
  auto it = bus_pos_.find(id);
  if (it == bus_pos_.end()) throw ValidationError(fmt::format("unknown bus {}", id));
  return it->second;
}

int NetworkCase::slack_bus() const {
  for (const auto& b : buses) {
    if (b.is_slack) return b.id;
  }
  throw ValidationError("no slack bus");
}

double NetworkCase::total_demand() const {
  double sum = 0.0;
  for (const auto& l : loads) sum += l.p_demand;
  return sum;
}

NetworkCase parse_matpower(std::string_view text) {
  const RawCase raw = scan(text);
  if (raw.version && *raw.version != "2") {
    throw ParseError(fmt::format("unsupported MATPOWER case version '{}'", *raw.version), 0);
  }

  NetworkCase c;
  if (!raw.base_mva) throw ParseError("missing mpc.baseMVA", 0);
  c.base_mva = *raw.base_mva;

  for (const auto& row : require_matrix(raw, "bus")) {
    require_columns(row, 13, "bus");
    Bus b;
    b.id = as_int(row.values[0], row.line, "bus number");
    const int type = as_int(row.values[1], row.line, "bus type");
    if (type < 1 || type > 4) throw ParseError(fmt::format("invalid bus type {}", type), row.line);
    if (type == 4) throw ValidationError(fmt::format("bus {} is isolated (type 4); isolated buses are unsupported", b.id));
    b.is_slack = type == 3;
    b.base_kv = row.values[9];
    const double pd = row.values[2];
    if (pd != 0.0) c.loads.push_back({static_cast<int>(c.loads.size()) + 1, b.id, pd});
    c.buses.push_back(b);
  }

  for (const auto& row : require_matrix(raw, "gen")) {
    require_columns(row, 10, "gen");
    Generator g;
    g.id = static_cast<int>(c.generators.size()) + 1;
    g.bus = as_int(row.values[0], row.line, "generator bus");
    g.in_service = row.values[7] > 0.0;
    g.p_max = row.values[8];
    g.p_min = row.values[9];
    c.generators.push_back(g);
  }

  for (const auto& row : require_matrix(raw, "branch")) {
    require_columns(row, 11, "branch");
    Branch br;
    br.id = static_cast<int>(c.branches.size()) + 1;
    br.from_bus = as_int(row.values[0], row.line, "branch from bus");
    br.to_bus = as_int(row.values[1], row.line, "branch to bus");
    br.resistance = row.values[2];
    br.reactance = row.values[3];
    br.charging = row.values[4];
    br.rate_a = rating(row.values[5]);
    br.rate_b = row.values[6] == 0.0 ? br.rate_a : row.values[6];
    br.rate_c = row.values[7] == 0.0 ? br.rate_b : row.values[7];
    br.tap_ratio = row.values[8];
    br.shift_deg = row.values[9];
    br.in_service = row.values[10] > 0.0;
    br.is_transformer = br.tap_ratio != 0.0 || br.shift_deg != 0.0;
    c.branches.push_back(br);
  }

  if (auto it = raw.matrices.find("gencost"); it != raw.matrices.end()) {
    const auto& rows = it->second;
    if (rows.size() < c.generators.size()) {
      throw ParseError(fmt::format("mpc.gencost has {} rows for {} generators", rows.size(), c.generators.size()),
                       rows.empty() ? 0 : rows.back().line);
    }
    for (std::size_t i = 0; i < c.generators.size(); ++i) {
      const auto& row = rows[i];
      require_columns(row, 4, "gencost");
      const int model = as_int(row.values[0], row.line, "gencost model");
      const int n = as_int(row.values[3], row.line, "gencost n");
      auto& g = c.generators[i];
      if (model == 2) {
        require_columns(row, 4 + static_cast<std::size_t>(n), "gencost");
        if (n >= 2) g.cost = row.values[4 + n - 2];
        bool higher = false;
        for (int j = 0; j + 2 < n; ++j) higher = higher || row.values[4 + j] != 0.0;
        if (higher) {
          c.warnings.push_back(
              fmt::format("generator {} has a polynomial cost of degree {}; using the linear term {}", g.id, n - 1, g.cost));
        }
      } else if (model == 1) {
        require_columns(row, 4 + 2 * static_cast<std::size_t>(n), "gencost");
        if (n >= 2) {
          const double x0 = row.values[4], y0 = row.values[5];
          const double x1 = row.values[4 + 2 * (n - 1)], y1 = row.values[5 + 2 * (n - 1)];
          g.cost = x1 != x0 ? (y1 - y0) / (x1 - x0) : 0.0;
        }
        c.warnings.push_back(
            fmt::format("generator {} has a piecewise-linear cost; using the average slope {}", g.id, g.cost));
      } else {
        throw ParseError(fmt::format("unknown gencost model {}", model), row.line);
      }
    }
  } else {
    c.warnings.push_back("case has no mpc.gencost; all generation costs are zero");
  }

  c.validate();
  return c;
}

NetworkCase read_matpower_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open case file '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_matpower(ss.str());
}

std::string write_matpower(const NetworkCase& c) {
  auto num = [](double v) { return std::isinf(v) ? std::string("0") : fmt::format("{:.17g}", v); };
  std::map<int, double> pd;
  for (const auto& l : c.loads) pd[l.bus] += l.p_demand;

  std::string out = "function mpc = written_case\nmpc.version = '2';\n";
  out += fmt::format("mpc.baseMVA = {};\n", num(c.base_mva));
  out += "mpc.bus = [\n";
  for (const auto& b : c.buses) {
    const int type = b.is_slack ? 3 : 1;
    out += fmt::format("\t{}\t{}\t{}\t0\t0\t0\t1\t1\t0\t{}\t1\t1.1\t0.9;\n", b.id, type, num(pd.count(b.id) ? pd[b.id] : 0.0),
                       num(b.base_kv));
  }
  out += "];\nmpc.gen = [\n";
  for (const auto& g : c.generators) {
    out += fmt::format("\t{}\t0\t0\t0\t0\t1\t{}\t{}\t{}\t{};\n", g.bus, num(c.base_mva), g.in_service ? 1 : 0,
                       num(g.p_max), num(g.p_min));
  }
  out += "];\nmpc.branch = [\n";
  for (const auto& br : c.branches) {
    out += fmt::format("\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t-360\t360;\n", br.from_bus, br.to_bus,
                       num(br.resistance), num(br.reactance), num(br.charging), num(br.rate_a), num(br.rate_b),
                       num(br.rate_c), num(br.tap_ratio), num(br.shift_deg), br.in_service ? 1 : 0);
  }
  out += "];\nmpc.gencost = [\n";
  for (const auto& g : c.generators) out += fmt::format("\t2\t0\t0\t2\t{}\t0;\n", num(g.cost));
  out += "];\n";
  return out;
}

std::vector<std::vector<int>> connected_components(const NetworkCase& c) {
  const std::size_t n = c.buses.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    const auto u = c.bus_position(br.from_bus), v = c.bus_position(br.to_bus);
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<int> comp(n, -1);
  std::vector<std::vector<int>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int label = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<std::size_t> stack{s};
    comp[s] = label;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      out.back().push_back(c.buses[u].id);
      for (auto v : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = label;
          stack.push_back(v);
        }
      }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

std::set<int> islanding_contingencies(const NetworkCase& c) {
  const auto comps = connected_components(c);
  if (comps.size() > 1) {
    std::string desc;
    for (const auto& comp : comps) {
      desc += desc.empty() ? "" : " | ";
      for (std::size_t i = 0; i < comp.size(); ++i) desc += (i ? "," : "") + std::to_string(comp[i]);
    }
    throw ValidationError(fmt::format("case is already disconnected into {} components: {}", comps.size(), desc));
  }

  // Tarjan's bridge search over the multigraph; the tree edge is skipped by edge id, not by
  // parent vertex, so parallel circuits are never reported as bridges.
  struct Edge {
    std::size_t to;
    int id;
  };
  const std::size_t n = c.buses.size();
  std::vector<std::vector<Edge>> adj(n);
  for (const auto& br : c.branches) {
    if (!br.in_service) continue;
    const auto u = c.bus_position(br.from_bus), v = c.bus_position(br.to_bus);
    adj[u].push_back({v, br.id});
    adj[v].push_back({u, br.id});
  }

  std::set<int> bridges;
  if (n == 0) return bridges;
  std::vector<int> disc(n, -1), low(n, 0);
  int timer = 0;
  struct Frame {
    std::size_t node;
    int via_edge;
    std::size_t next = 0;
  };
  std::vector<Frame> stack{{0, -1}};
  disc[0] = low[0] = timer++;
  while (!stack.empty()) {
    auto& f = stack.back();
    if (f.next < adj[f.node].size()) {
      const Edge e = adj[f.node][f.next++];
      if (e.id == f.via_edge) continue;
      if (disc[e.to] < 0) {
        disc[e.to] = low[e.to] = timer++;
        stack.push_back({e.to, e.id});
      } else {
        low[f.node] = std::min(low[f.node], disc[e.to]);
      }
      continue;
    }
    const Frame done = f;
    stack.pop_back();
    if (!stack.empty()) {
      auto& parent = stack.back();
      low[parent.node] = std::min(low[parent.node], low[done.node]);
      if (low[done.node] > disc[parent.node]) bridges.insert(done.via_edge);
    }
  }
  return bridges;
}

}  // namespace tepcvsr
