#include "embedflow/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "embedflow/sampled_chart.hpp"

namespace embedflow::io {

using nlohmann::json;

namespace {

json numbers(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

json numbers(const Vec& v) {
  return numbers(std::vector<double>(v.data(), v.data() + v.size()));
}

json to_json(const WPoint& w) {
  return {{"node", io::to_json(w.node)}, {"q", numbers(w.q)}, {"v", numbers(w.v)}};
}

json to_json(const PairWitness& p) {
  return {{"a", io::to_json(p.a)},
          {"b", io::to_json(p.b)},
          {"param_a", numbers(p.param_a)},
          {"param_b", numbers(p.param_b)},
          {"ambient_distance", number(p.ambient_distance)},
          {"model_distance", number(p.model_distance)},
          {"ratio", number(p.ratio)}};
}

std::string g17(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

}  // namespace

json number(double x) {
  return std::isfinite(x) ? json(x) : json(nullptr);
}

json to_json(const NodeRef& n) {
  return {{"chart", n.chart}, {"index", n.index}};
}

json to_json(const CertificationReport& r) {
  json j;
  j["shape"] = r.shape;
  j["N"] = r.N;
  j["k"] = r.k;
  j["K"] = number(r.K);
  j["K_where"] = to_json(r.K_where);
  j["W_cap"] = number(r.W_cap);
  j["P_max"] = number(r.P_max);
  j["G"] = number(r.G);
  j["G_where"] = to_json(r.G_where);
  j["Gp"] = numbers(r.Gp);
  j["delta0_min"] = number(r.delta0_min);
  j["delta1_min"] = number(r.delta1_min);
  j["delta2_min"] = number(r.delta2_min);
  j["delta_pointwise_min"] = number(r.delta_pointwise_min);
  j["delta_where"] = to_json(r.delta_where);
  j["delta"] = number(r.delta);
  j["epsilon"] = number(r.epsilon);
  j["t_star"] = number(r.t_star);
  j["options"] = {{"sigma_grid", r.options.sigma_grid},
                  {"v_max", r.options.v_max},
                  {"cap", r.options.cap},
                  {"shells", r.options.shells},
                  {"directions", r.options.directions}};
  j["ball_norm"] = "euclidean on (parameter, frame coefficients)";
  j["matrix_norm"] = "max absolute entry";
  j["resolutions"] = r.resolutions;
  j["w_points"] = r.w_points;
  j["excluded_nodes"] = r.excluded_nodes;
  j["flagged_nodes"] = r.flagged_nodes;
  return j;
}

json to_json(const VerifierReport& r) {
  return {{"pass", r.pass},
          {"immersion_ok", r.immersion_ok},
          {"injectivity_ok", r.injectivity_ok},
          {"min_singular_value", number(r.min_singular_value)},
          {"min_singular_where", to_json(r.min_singular_where)},
          {"stretch", number(r.stretch)},
          {"bilipschitz_worst_pair", to_json(r.bilipschitz_worst_pair)},
          {"pairs_tested", r.pairs_tested},
          {"reach_estimate", number(r.reach_estimate)},
          {"focal_min_distance", number(r.focal_min_distance)}};
}

json to_json(const ReachEstimate& r) {
  return {{"delta_hat", number(r.delta_hat)},
          {"upper_bracket", number(r.upper_bracket)},
          {"bracket_hit", r.bracket_hit},
          {"witness", to_json(r.witness)},
          {"warnings", r.warnings}};
}

json to_json(const FocalEstimate& r) {
  return {{"distance", number(r.distance)},
          {"where", to_json(r.where)},
          {"direction", numbers(r.direction)},
          {"det_where", to_json(r.det_where)},
          {"det_ratio", number(r.det_ratio)},
          {"det_sign_change", r.det_sign_change},
          {"excluded_nodes", r.excluded_nodes}};
}

json to_json(const UniqueNearestResult& r) {
  return {{"unique", r.unique},
          {"samples", r.samples},
          {"failures", r.failures},
          {"worst_foot_error", number(r.worst_foot_error)}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_constants_csv(const std::string& path, const CertificationReport& r) {
  std::ofstream out = open_out(path);
  out << "name,value\n";
  auto row = [&](const std::string& name, double v) { out << name << ',' << g17(v) << '\n'; };
  row("K", r.K);
  row("W_cap", r.W_cap);
  row("P_max", r.P_max);
  row("G", r.G);
  for (std::size_t i = 0; i < r.Gp.size(); ++i) row("Gp" + std::to_string(i), r.Gp[i]);
  row("delta0_min", r.delta0_min);
  row("delta1_min", r.delta1_min);
  row("delta2_min", r.delta2_min);
  row("delta_pointwise_min", r.delta_pointwise_min);
  row("delta", r.delta);
  row("epsilon", r.epsilon);
  row("t_star", r.t_star);
}

void write_state_csv(const std::string& path, const ChartAtlas& atlas, const SampleGrid& grid) {
  std::ofstream out = open_out(path);
  out << "chart";
  for (int i = 0; i < atlas.dim(); ++i) out << ",q" << i;
  for (int i = 0; i < atlas.ambient_dim(); ++i) out << ",x" << i;
  out << '\n';
  const std::vector<NodeRef> nodes = grid.nodes();
  const std::vector<Vec> values = node_values(atlas, grid);
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    out << nodes[n].chart;
    const Vec q = grid.param(nodes[n]);
    for (int i = 0; i < q.size(); ++i) out << ',' << g17(q(i));
    for (int i = 0; i < values[n].size(); ++i) out << ',' << g17(values[n](i));
    out << '\n';
  }
}

ChartAtlas read_state_csv(const std::string& path, const ChartAtlas& like, const SampleGrid& grid) {
  std::ifstream in(path);
  if (!in) throw StateError("cannot open state file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw StateError("state file '" + path + "' is empty");
  const int k = like.dim();
  const int N = like.ambient_dim();
  const std::size_t columns = 1 + static_cast<std::size_t>(k + N);
  if (static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1 != columns) {
    throw StateError("state header does not have " + std::to_string(columns) + " columns");
  }

  // Offsets of each chart's nodes in grid.nodes() order.
  std::vector<std::size_t> base(grid.charts() + 1, 0);
  for (std::size_t c = 0; c < grid.charts(); ++c) base[c + 1] = base[c] + grid.lattice(c).size();
  std::vector<Vec> values(base.back());
  std::vector<bool> seen(base.back(), false);

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size()) {
        throw StateError("row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
      cells.push_back(x);
    }
    if (cells.size() != columns) throw StateError("row " + std::to_string(row) + ": wrong number of columns");
    const double cid = cells[0];
    if (!(cid >= 0.0) || cid != std::floor(cid) || cid >= static_cast<double>(grid.charts())) {
      throw StateError("row " + std::to_string(row) + ": bad chart id");
    }
    const auto c = static_cast<std::size_t>(cid);
    Vec q(k), x(N);
    for (int i = 0; i < k; ++i) q(i) = cells[1 + static_cast<std::size_t>(i)];
    for (int i = 0; i < N; ++i) x(i) = cells[1 + static_cast<std::size_t>(k + i)];
    const auto idx = grid.lattice(c).locate(q);
    if (!idx) throw StateError("row " + std::to_string(row) + ": parameters are not a lattice node");
    const std::size_t flat = base[c] + *idx;
    if (seen[flat]) throw StateError("row " + std::to_string(row) + ": node listed twice");
    seen[flat] = true;
    values[flat] = x;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw StateError("state file does not cover every lattice node");
  }
  return atlas_from_values(like, grid, values);
}

void write_obj(const std::string& path, const ChartAtlas& atlas, const SampleGrid& grid) {
  if (atlas.dim() != 2 || atlas.ambient_dim() != 3) {
    throw std::invalid_argument("OBJ export needs a surface in 3-space");
  }
  std::ofstream out = open_out(path);
  const std::vector<Vec> values = node_values(atlas, grid);
  for (const Vec& x : values) out << "v " << g17(x(0)) << ' ' << g17(x(1)) << ' ' << g17(x(2)) << '\n';
  std::size_t base = 1;  // OBJ indices start at 1
  for (std::size_t c = 0; c < grid.charts(); ++c) {
    const ChartLattice& lat = grid.lattice(c);
    for (std::size_t i = 0; i < lat.size(); ++i) {
      const auto a = lat.neighbor(i, 0, 1);
      const auto b = lat.neighbor(i, 1, 1);
      if (!a || !b) continue;
      const auto ab = lat.neighbor(*a, 1, 1);
      if (!ab) continue;
      out << "f " << base + i << ' ' << base + *a << ' ' << base + *ab << '\n';
      out << "f " << base + i << ' ' << base + *ab << ' ' << base + *b << '\n';
    }
    base += lat.size();
  }
}

void write_penalty_csv(const std::string& path, const FlowTrajectory& traj) {
  std::ofstream out = open_out(path);
  out << "step,penalty,t_star,step_taken,halvings,k_phi,min_singular_value\n";
  for (const FlowState& s : traj.states) {
    out << s.step_index << ',' << g17(s.penalty_value) << ','
        << (s.certificate ? g17(s.certificate->t_star) : std::string("nan")) << ',' << g17(s.step_taken) << ','
        << s.halvings << ',' << g17(s.k_phi) << ',' << g17(s.verifier.min_singular_value) << '\n';
  }
}

}  // namespace embedflow::io
