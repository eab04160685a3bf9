#include "embedflow/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "embedflow/expression.hpp"
#include "embedflow/fixtures.hpp"

namespace embedflow {

using nlohmann::json;

namespace {

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

AxisKind axis_kind(const std::string& s) {
  if (s == "periodic") return AxisKind::periodic;
  if (s == "boundary") return AxisKind::boundary;
  if (s == "seam") return AxisKind::seam;
  throw ConfigError("axis kind must be periodic, boundary or seam, got '" + s + "'");
}

const char* axis_kind_name(AxisKind k) {
  switch (k) {
    case AxisKind::periodic: return "periodic";
    case AxisKind::boundary: return "boundary";
    case AxisKind::seam: return "seam";
  }
  return "?";
}

ChartSpec parse_chart_spec(const json& j, std::size_t index) {
  const std::string where = "shape.charts[" + std::to_string(index) + "]";
  only_keys(j, where, {"variables", "coords", "domain"});
  ChartSpec c;
  c.variables = j.at("variables").get<std::vector<std::string>>();
  const json& coords = j.at("coords");
  c.coords = coords.is_string() ? expr::split_tuple(coords.get<std::string>()) : coords.get<std::vector<std::string>>();
  for (const json& a : j.at("domain")) {
    only_keys(a, where + ".domain", {"lower", "upper", "kind"});
    Axis ax;
    ax.lower = a.at("lower").get<double>();
    ax.upper = a.at("upper").get<double>();
    ax.kind = axis_kind(a.value("kind", std::string("boundary")));
    c.domain.axes.push_back(ax);
  }
  return c;
}

}  // namespace

RunConfig parse_config(const json& j) {
  try {
    only_keys(j, "config", {"shape", "resolution", "derivative_mode", "h", "certify", "penalty", "flow", "verify",
                            "output_dir", "seed"});
    RunConfig cfg;
    const json& shape = j.at("shape");
    only_keys(shape, "shape", {"builtin", "params", "charts"});
    if (shape.contains("builtin") == shape.contains("charts")) {
      throw ConfigError("shape needs exactly one of 'builtin' and 'charts'");
    }
    if (shape.contains("builtin")) {
      cfg.shape.builtin = shape.at("builtin").get<std::string>();
      read(shape, "params", cfg.shape.params);
    } else {
      if (shape.contains("params")) throw ConfigError("'params' applies to builtin shapes only");
      std::size_t i = 0;
      for (const json& c : shape.at("charts")) cfg.shape.charts.push_back(parse_chart_spec(c, i++));
    }

    if (j.contains("resolution")) {
      const json& r = j.at("resolution");
      cfg.resolution = r.is_array() ? r.get<std::vector<int>>() : std::vector<int>{r.get<int>()};
    }
    if (j.contains("derivative_mode")) {
      const std::string m = j.at("derivative_mode").get<std::string>();
      if (m == "analytic") cfg.derivative_mode = DerivativeMode::analytic;
      else if (m == "finite_difference") cfg.derivative_mode = DerivativeMode::finite_difference;
      else throw ConfigError("derivative_mode must be analytic or finite_difference");
    }
    read(j, "h", cfg.h);

    if (j.contains("certify")) {
      const json& c = j.at("certify");
      only_keys(c, "certify", {"sigma_grid", "v_max", "cap", "shells", "directions"});
      read(c, "sigma_grid", cfg.flow.certify.sigma_grid);
      read(c, "v_max", cfg.flow.certify.v_max);
      read(c, "cap", cfg.flow.certify.cap);
      read(c, "shells", cfg.flow.certify.shells);
      read(c, "directions", cfg.flow.certify.directions);
    }
    if (j.contains("penalty")) {
      const json& p = j.at("penalty");
      only_keys(p, "penalty", {"data_points", "weight_data", "weight_vol", "bump_bandwidth", "tie_tolerance"});
      if (p.contains("data_points")) {
        for (const json& y : p.at("data_points")) {
          const auto v = y.get<std::vector<double>>();
          cfg.flow.penalty.data_points.push_back(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
        }
      }
      read(p, "weight_data", cfg.flow.penalty.weight_data);
      read(p, "weight_vol", cfg.flow.penalty.weight_vol);
      read(p, "tie_tolerance", cfg.flow.penalty.tie_tolerance);
      if (p.contains("bump_bandwidth")) {
        cfg.flow.penalty.bump_bandwidth = p.at("bump_bandwidth").get<double>();
        if (!(cfg.flow.penalty.bump_bandwidth > 0.0)) throw ConfigError("penalty.bump_bandwidth must be positive");
      }
    }
    if (j.contains("flow")) {
      const json& f = j.at("flow");
      only_keys(f, "flow", {"sigma_step", "max_steps", "grad_tol", "max_halvings"});
      read(f, "sigma_step", cfg.flow.sigma_step);
      read(f, "max_steps", cfg.flow.max_steps);
      read(f, "grad_tol", cfg.flow.grad_tol);
      read(f, "max_halvings", cfg.flow.max_halvings);
    }
    if (j.contains("verify")) {
      const json& v = j.at("verify");
      only_keys(v, "verify", {"sv_tol", "inj_tol"});
      read(v, "sv_tol", cfg.flow.verify.sv_tol);
      read(v, "inj_tol", cfg.flow.verify.inj_tol);
    }
    read(j, "output_dir", cfg.output_dir);
    read(j, "seed", cfg.seed);
    validate(cfg);
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
  return parse_config(j);
}

void validate(const RunConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(!cfg.resolution.empty(), "resolution must not be empty");
  for (int r : cfg.resolution) require(r >= 8, "every resolution must be at least 8 intervals");
  require(cfg.h > 0.0, "h must be positive");
  const CertifyOptions& c = cfg.flow.certify;
  require(c.sigma_grid > 0.0 && c.sigma_grid <= 1.0, "certify.sigma_grid must lie in (0, 1]");
  require(c.v_max > 0.0, "certify.v_max must be positive");
  require(c.cap > 0.0, "certify.cap must be positive");
  require(c.shells >= 1, "certify.shells must be at least 1");
  require(c.directions >= 4, "certify.directions must be at least 4");
  const PenaltyConfig& p = cfg.flow.penalty;
  require(p.weight_data >= 0.0 && p.weight_vol >= 0.0, "penalty weights must be nonnegative");
  require(p.weight_data > 0.0 || p.weight_vol > 0.0, "penalty weights must not both be zero");
  require(p.tie_tolerance > 0.0, "penalty.tie_tolerance must be positive");
  require(p.bump_bandwidth >= 0.0, "penalty.bump_bandwidth must be positive");
  require(cfg.flow.sigma_step > 0.0 && cfg.flow.sigma_step <= 1.0, "flow.sigma_step must lie in (0, 1]");
  require(cfg.flow.grad_tol > 0.0, "flow.grad_tol must be positive");
  require(cfg.flow.max_steps >= 0, "flow.max_steps must be nonnegative");
  require(cfg.flow.max_halvings >= 0, "flow.max_halvings must be nonnegative");
  require(cfg.flow.verify.sv_tol > 0.0, "verify.sv_tol must be positive");
  require(cfg.flow.verify.inj_tol > 0.0, "verify.inj_tol must be positive");
  for (std::size_t i = 0; i < cfg.shape.charts.size(); ++i) {
    const ChartSpec& ch = cfg.shape.charts[i];
    const std::string where = "shape.charts[" + std::to_string(i) + "]";
    require(!ch.variables.empty(), where + " needs variables");
    require(!ch.coords.empty(), where + " needs coordinate expressions");
    require(ch.domain.dim() == static_cast<int>(ch.variables.size()), where + " needs one domain axis per variable");
    for (const Axis& a : ch.domain.axes) require(a.upper > a.lower, where + " has an empty domain axis");
    require(ch.coords.size() == cfg.shape.charts[0].coords.size(), "all charts need the same ambient dimension");
    require(ch.variables.size() == cfg.shape.charts[0].variables.size(), "all charts need the same dimension");
  }
  require(!cfg.shape.builtin.empty() || !cfg.shape.charts.empty(), "shape needs a builtin name or charts");
}

json to_json(const RunConfig& cfg) {
  json j;
  json shape;
  if (!cfg.shape.builtin.empty()) {
    shape["builtin"] = cfg.shape.builtin;
    shape["params"] = cfg.shape.params;
  } else {
    for (const ChartSpec& c : cfg.shape.charts) {
      json cj;
      cj["variables"] = c.variables;
      cj["coords"] = c.coords;
      for (const Axis& a : c.domain.axes) cj["domain"].push_back({{"lower", a.lower}, {"upper", a.upper}, {"kind", axis_kind_name(a.kind)}});
      shape["charts"].push_back(cj);
    }
  }
  j["shape"] = shape;
  j["resolution"] = cfg.resolution;
  j["derivative_mode"] = cfg.derivative_mode == DerivativeMode::analytic ? "analytic" : "finite_difference";
  j["h"] = cfg.h;
  const CertifyOptions& c = cfg.flow.certify;
  j["certify"] = {{"sigma_grid", c.sigma_grid}, {"v_max", c.v_max}, {"cap", c.cap}, {"shells", c.shells}, {"directions", c.directions}};
  const PenaltyConfig& p = cfg.flow.penalty;
  json pj = {{"weight_data", p.weight_data}, {"weight_vol", p.weight_vol}, {"tie_tolerance", p.tie_tolerance}};
  pj["data_points"] = json::array();
  for (const Vec& y : p.data_points) pj["data_points"].push_back(std::vector<double>(y.data(), y.data() + y.size()));
  if (p.bump_bandwidth > 0.0) pj["bump_bandwidth"] = p.bump_bandwidth;
  j["penalty"] = pj;
  j["flow"] = {{"sigma_step", cfg.flow.sigma_step}, {"max_steps", cfg.flow.max_steps}, {"grad_tol", cfg.flow.grad_tol},
               {"max_halvings", cfg.flow.max_halvings}};
  j["verify"] = {{"sv_tol", cfg.flow.verify.sv_tol}, {"inj_tol", cfg.flow.verify.inj_tol}};
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  return j;
}

ChartAtlas build_atlas(const RunConfig& cfg) {
  ChartAtlas atlas = [&] {
    if (!cfg.shape.builtin.empty()) {
      try {
        return fixtures::builtin(cfg.shape.builtin, cfg.shape.params, {cfg.derivative_mode, cfg.h});
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    std::vector<std::shared_ptr<const Chart>> charts;
    double extent = 1.0;
    for (const ChartSpec& spec : cfg.shape.charts) {
      for (const Axis& a : spec.domain.axes) extent += a.length();
      try {
        charts.push_back(expr::make_chart(expr::parse_chart(spec.coords, spec.variables), spec.domain,
                                          cfg.derivative_mode, cfg.h));
      } catch (const expr::ParseError& e) {
        throw ConfigError(std::string("chart expression: ") + e.what());
      }
    }
    // Periodic axes go on circles of their own length; charts sit far apart.
    std::vector<ChartDomain> domains;
    for (const ChartSpec& spec : cfg.shape.charts) domains.push_back(spec.domain);
    const double offset = 10.0 * extent;
    ManifoldModel model = [domains, offset](std::size_t c, const Vec& q) {
      const ChartDomain& d = domains.at(c);
      Vec m = Vec::Zero(2 * d.dim() + 1);
      for (int a = 0; a < d.dim(); ++a) {
        const Axis& ax = d.axes[static_cast<std::size_t>(a)];
        if (ax.kind == AxisKind::periodic) {
          const double r = ax.length() / (2.0 * std::numbers::pi);
          const double th = (q(a) - ax.lower) / r;
          m(2 * a) = r * std::cos(th);
          m(2 * a + 1) = r * std::sin(th);
        } else {
          m(2 * a) = q(a);
        }
      }
      m(2 * d.dim()) = offset * static_cast<double>(c);
      return m;
    };
    return ChartAtlas("expression", std::move(charts), std::move(model));
  }();
  for (const Vec& y : cfg.flow.penalty.data_points) {
    if (y.size() != atlas.ambient_dim()) throw ConfigError("data point dimension does not match the ambient space");
  }
  return atlas;
}

SampleGrid build_grid(const ChartAtlas& atlas, const RunConfig& cfg) {
  if (cfg.resolution.size() == 1) return SampleGrid::uniform(atlas, cfg.resolution[0]);
  if (static_cast<int>(cfg.resolution.size()) != atlas.dim()) {
    throw ConfigError("resolution needs one entry or one entry per chart axis");
  }
  std::vector<ChartLattice> lattices;
  for (std::size_t c = 0; c < atlas.size(); ++c) {
    std::vector<AxisLattice> axes;
    for (int a = 0; a < atlas.dim(); ++a) {
      axes.emplace_back(atlas.chart(c).domain().axes[static_cast<std::size_t>(a)], cfg.resolution[static_cast<std::size_t>(a)]);
    }
    lattices.emplace_back(std::move(axes));
  }
  return SampleGrid(std::move(lattices));
}

}  // namespace embedflow
