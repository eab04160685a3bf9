// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "embedflow/certify.hpp"
#include "embedflow/cli.hpp"
#include "embedflow/fixtures.hpp"
#include "embedflow/flow.hpp"
#include "embedflow/penalty.hpp"
#include "embedflow/qift.hpp"
#include "embedflow/sampled_chart.hpp"
#include "embedflow/verify.hpp"
#include "perturb.hpp"
#include "qift_fixtures.hpp"

using namespace embedflow;
namespace fx = embedflow::fixtures;
namespace fs = std::filesystem;

namespace {

constexpr double pi = 3.141592653589793238462643383279502884;

// Collects failures; a criterion passes when none were recorded.
struct Outcome {
  std::vector<std::string> failures;
  std::string summary;

  void require(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

struct Fixture {
  std::string name;
  ChartAtlas atlas;
  int resolution;
};

std::vector<Fixture> embedded_fixtures() {
  return {{"circle", fx::circle(1.0), 64},       {"ellipse", fx::ellipse(2.0, 1.0), 64},
          {"sphere", fx::sphere(1.0), 16},       {"torus", fx::torus(2.0, 0.5), 32},
          {"flat_patch", fx::flat_patch(), 32},  {"graph_patch", fx::graph_patch(1.0), 16},
          {"tilted_circle", fx::tilted_circle(), 64}};
}

double mean_radius(const FlowState& s) {
  double r = 0.0;
  const auto x = node_values(s.atlas, s.grid);
  for (const Vec& v : x) r += v.norm();
  return r / static_cast<double>(x.size());
}

// A smooth random ambient field sin(B x + c) mixed by A, projected onto the
// normal space at every node and scaled to a random maximum length <= 1.
std::vector<Vec> random_normal_field(const ChartAtlas& atlas, const SampleGrid& grid, std::mt19937_64& rng) {
  const int n = atlas.ambient_dim();
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mat A(n, n), B(n, n);
  Vec c(n);
  for (int i = 0; i < n; ++i) {
    c(i) = 2.0 * pi * unit(rng);
    for (int j = 0; j < n; ++j) {
      A(i, j) = gauss(rng);
      B(i, j) = 1.5 * gauss(rng);
    }
  }
  std::vector<Vec> u;
  double longest = 0.0;
  for (const NodeRef& node : grid.nodes()) {
    const Chart& ch = atlas.chart(node.chart);
    const Vec q = grid.param(node);
    const Vec x = ch.point(q);
    const Vec raw = A * (B * x + c).array().sin().matrix();
    const Mat Q = ch.jacobian(q).householderQr().householderQ() * Mat::Identity(n, atlas.dim());
    u.push_back(raw - Q * (Q.transpose() * raw));
    longest = std::max(longest, u.back().norm());
  }
  const double scale = (0.05 + 0.95 * unit(rng)) / longest;
  for (Vec& v : u) v *= scale;
  return u;
}

// Criterion 1
Outcome curvature_exactness() {
  Outcome o;
  const fx::Options fd{DerivativeMode::finite_difference, 1e-4};
  double worst_a = 0.0, worst_fd = 0.0;
  for (double r : {0.5, 1.0, 2.0}) {
    for (const auto& [analytic, numeric, res] :
         {std::tuple{fx::circle(r), fx::circle(r, fd), 64}, std::tuple{fx::sphere(r), fx::sphere(r, fd), 16}}) {
      const double ka = max_principal_curvature(analytic, SampleGrid::uniform(analytic, res)).K;
      const double kf = max_principal_curvature(numeric, SampleGrid::uniform(numeric, res)).K;
      worst_a = std::max(worst_a, std::abs(ka - 1.0 / r));
      worst_fd = std::max(worst_fd, std::abs(kf - 1.0 / r));
      o.require(std::abs(ka - 1.0 / r) <= 1e-6, analytic.name() + fmt(" r=%g analytic K=%.12g", r, ka));
      o.require(std::abs(kf - 1.0 / r) <= 1e-4, numeric.name() + fmt(" r=%g fd K=%.12g", r, kf));
    }
  }
  const auto tor = fx::torus(2.0, 0.5);
  const auto tor_fd = fx::torus(2.0, 0.5, fd);
  const double kt = max_principal_curvature(tor, SampleGrid::uniform(tor, 32)).K;
  const double kt_fd = max_principal_curvature(tor_fd, SampleGrid::uniform(tor_fd, 32)).K;
  o.require(std::abs(kt - 2.0) <= 1e-3, fmt("torus K=%.12g", kt));
  o.require(std::abs(kt_fd - 2.0) <= 1e-3, fmt("torus fd K=%.12g", kt_fd));
  o.summary = fmt("max |K - 1/r| analytic %.2e, fd %.2e", worst_a, worst_fd) + fmt("; torus K %.9f", kt);
  return o;
}

// Criterion 2
Outcome focal_soundness() {
  Outcome o;
  const auto circle = fx::circle(1.0);
  const Chart& ch = circle.chart(0);
  double worst = 0.0;
  for (int i = 0; i < 64; ++i) {
    const Vec q = Vec::Constant(1, 2.0 * pi * i / 64.0);
    const FrameJet jet = frame_jet(ch, q, false);
    const double inward = jet.w.col(0).dot(ch.point(q)) < 0.0 ? 1.0 : -1.0;
    for (int j = 0; j < 64; ++j) {
      const double s = j / 64.0;
      const double det = endpoint_jacobian(ch, jet, q, Vec::Constant(1, inward * s)).det;
      worst = std::max(worst, std::abs(std::abs(det) - (1.0 - s)));
    }
  }
  o.require(worst <= 1e-8, fmt("max | |det DE| - (1 - |v|) | = %.3e", worst));
  const FocalEstimate f = focal_oracle(circle, SampleGrid::uniform(circle, 64));
  o.require(std::abs(f.distance - 1.0) <= 1e-3, fmt("focal distance %.12g", f.distance));
  o.summary = fmt("det defect %.2e over 64x64, focal distance %.9f", worst, f.distance);
  return o;
}

// Criterion 3
Outcome delta_soundness() {
  Outcome o;
  std::ostringstream s;
  for (const auto& [name, atlas, res] : std::vector<std::tuple<std::string, ChartAtlas, int>>{
           {"circle", fx::circle(1.0), 64},
           {"ellipse", fx::ellipse(2.0, 1.0), 64},
           {"sphere", fx::sphere(1.0), 16},
           {"torus", fx::torus(2.0, 0.5), 32}}) {
    const SampleGrid grid = SampleGrid::uniform(atlas, res);
    const CertificationReport rep = certify(atlas, grid);
    const ReachEstimate reach = reach_oracle(atlas, grid, rep.epsilon);
    o.require(rep.delta > 0.0, name + " certified delta is not positive");
    o.require(rep.delta <= reach.delta_hat, name + fmt(" delta %.3e > reach %.3e", rep.delta, reach.delta_hat));
    s << name << ' ' << fmt("%.3e<=%.3e ", rep.delta, reach.delta_hat);
  }
  o.summary = s.str();
  return o;
}

// Criteria 4 and 5 share the sweep.
struct Sweep {
  Outcome bounded_steps;
  Outcome immersion;
};

Sweep deformation_sweep() {
  Sweep out;
  std::mt19937_64 rng(2024);
  std::size_t cases = 0, passed = 0;
  double smallest_sv = std::numeric_limits<double>::infinity();
  for (const Fixture& f : embedded_fixtures()) {
    const SampleGrid grid = SampleGrid::uniform(f.atlas, f.resolution);
    const ChartAtlas base = sample_atlas(f.atlas, grid);
    const CertificationReport rep = certify(f.atlas, grid);
    std::size_t fixture_pass = 0;
    for (int field = 0; field < 32; ++field) {
      const std::vector<Vec> u = random_normal_field(f.atlas, grid, rng);
      for (int k = 0; k < 16; ++k) {
        const double s = -1.0 + 2.0 * k / 15.0;
        const VerifierReport vr = verify_embedding(displace(base, grid, u, s * rep.t_star), grid);
        ++cases;
        if (vr.pass) ++fixture_pass;
        const VerifierReport vi = verify_embedding(displace(base, grid, u, 0.999 * s * rep.epsilon), grid);
        smallest_sv = std::min(smallest_sv, vi.min_singular_value);
        out.immersion.require(vi.min_singular_value > 0.0, f.name + " singular deformed Jacobian");
      }
    }
    passed += fixture_pass;
    out.bounded_steps.require(fixture_pass == 512, f.name + ": " + std::to_string(fixture_pass) + "/512 pass");
  }

  const auto circle = fx::circle(1.0);
  const SampleGrid grid = SampleGrid::uniform(circle, 64);
  std::vector<Vec> inward;
  for (const Vec& x : node_values(circle, grid)) inward.push_back(-x.normalized());
  const VerifierReport collapse = verify_embedding(displace(sample_atlas(circle, grid), grid, inward, 1.0), grid);
  out.bounded_steps.require(!collapse.pass, "circle pushed to its centre still passes the verifier");
  out.bounded_steps.summary = std::to_string(passed) + "/" + std::to_string(cases) +
                         " deformed fixtures pass; forced counterexample " + (collapse.pass ? "passes" : "fails");
  out.immersion.summary = fmt("smallest deformed singular value %.6f", smallest_sv);
  return out;
}

// Criterion 6
Outcome invariance() {
  Outcome o;
  double worst = 0.0;
  for (const Fixture& f : embedded_fixtures()) {
    const SampleGrid grid = SampleGrid::uniform(f.atlas, f.resolution);
    const double r = normal_project(f.atlas, grid, grad_volume(f.atlas, grid).vectors).tangential_residual;
    worst = std::max(worst, r);
    o.require(r < 1e-8, f.name + fmt(" volume gradient tangential residual %.3e", r));
  }
  const auto e = fx::ellipse(2.0, 1.0);
  const SampleGrid grid = SampleGrid::uniform(e, 64);
  const ChartVectorField squeeze = [](std::size_t, const Vec& q) { return Vec::Constant(1, std::sin(q(0))); };
  const Functional dir = [](const ChartAtlas& a, const SampleGrid& g) { return dirichlet_energy(a, g); };
  const Functional vol = [](const ChartAtlas& a, const SampleGrid& g) { return volume(a, g); };
  const double dres = normal_project(e, grid, dirichlet_gradient(e, grid)).tangential_residual;
  const double ddef = invariance_check(e, grid, dir, squeeze, 0.2).defect;
  const double vdef = invariance_check(e, grid, vol, squeeze, 0.2).defect;
  o.require(dres > 1e-3, fmt("dirichlet tangential residual %.3e", dres));
  o.require(ddef > 1e-2, fmt("dirichlet invariance defect %.3e", ddef));
  o.require(vdef < 1e-6, fmt("volume invariance defect %.3e", vdef));
  o.summary = fmt("volume residual %.2e; ellipse dirichlet residual %.3e", worst, dres) +
              fmt(", defects dirichlet %.3e / volume %.2e", ddef, vdef);
  return o;
}

// Criterion 7
Outcome gradient_correctness() {
  Outcome o;
  std::mt19937_64 rng(77);
  double worst = 0.0;
  const double t = 1e-5;
  auto check = [&](const std::string& name, const ChartAtlas& atlas, const SampleGrid& grid,
                   const PenaltyConfig& cfg, const perturb::Bump& h) {
    const double pair = l2_pairing(atlas, grid, penalty_gradient(atlas, grid, cfg).vectors,
                                   perturb::on_nodes(atlas, grid, h));
    const double fd = (penalty_value(perturb::perturbed(atlas, h, t), grid, cfg) -
                       penalty_value(perturb::perturbed(atlas, h, -t), grid, cfg)) /
                      (2.0 * t);
    const double rel = std::abs(pair - fd) / std::abs(fd);
    worst = std::max(worst, rel);
    o.require(rel <= 1e-4, name + fmt(" pairing %.10g vs fd %.10g", pair, fd));
  };
  PenaltyConfig vol;
  vol.weight_data = 0.0;
  for (const auto& [name, atlas, res] : std::vector<std::tuple<std::string, ChartAtlas, int>>{
           {"circle", fx::circle(1.0), 64},
           {"ellipse", fx::ellipse(2.0, 1.0), 64},
           {"torus", fx::torus(2.0, 0.5), 32},
           {"sphere", fx::sphere(1.0), 24}}) {
    const SampleGrid grid = SampleGrid::uniform(atlas, res);
    for (int i = 0; i < 20; ++i) check(name + " volume", atlas, grid, vol, perturb::random_bump(atlas, grid, rng, 0.8, 1.4));
  }

  // Data term plus volume on the circle, data points off the curve.
  const auto circle = fx::circle(1.0);
  const SampleGrid grid = SampleGrid::uniform(circle, 128);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const double a = pi * unit(rng);
    Vec y(2);
    y << std::cos(a), std::sin(a);
    PenaltyConfig both;
    both.data_points = {(1.0 + 0.5 * unit(rng)) * y};
    Vec centre = y;
    centre(0) += 0.2 * unit(rng);
    centre(1) += 0.2 * unit(rng);
    Vec dir(2);
    dir << unit(rng), unit(rng);
    check("circle data+volume", circle, grid, both, perturb::Bump{centre.normalized(), 1.0, dir.normalized()});
  }
  o.summary = fmt("worst relative pairing error %.2e over 100 bumps", worst);
  return o;
}

// Criterion 8
Outcome flow_reproduction() {
  Outcome o;
  const auto sphere = fx::sphere(1.0);
  FlowConfig sc;
  sc.penalty.data_points = {Vec::Zero(3)};
  sc.max_steps = 50;
  const FlowTrajectory st = flow_run(sphere, SampleGrid::uniform(sphere, 8), sc);
  o.require(st.states.size() >= 51, "sphere flow stopped after " + std::to_string(st.states.size() - 1) +
                                        " steps: " + to_string(st.termination) + " " + st.diagnostic);
  for (std::size_t n = 1; n < st.states.size(); ++n) {
    o.require(mean_radius(st.states[n]) < mean_radius(st.states[n - 1]),
              "sphere mean radius did not decrease at step " + std::to_string(n));
    o.require(st.states[n].verifier.pass, "sphere step " + std::to_string(n) + " fails the verifier");
  }

  const auto circle = fx::circle(1.0);
  FlowConfig cc;
  cc.penalty.weight_data = 0.0;
  cc.max_steps = 20;
  const FlowTrajectory ct = flow_run(circle, SampleGrid::uniform(circle, 64), cc);
  o.require(ct.states.size() == 21, "circle flow stopped early: " + ct.diagnostic);
  double r = 1.0, worst = 0.0;
  for (std::size_t n = 1; n < ct.states.size(); ++n) {
    r -= cc.sigma_step * ct.states[n - 1].certificate->t_star;
    for (const Vec& x : node_values(ct.states[n].atlas, ct.states[n].grid)) {
      worst = std::max(worst, std::abs(x.norm() - r));
    }
  }
  o.require(worst <= 1e-6, fmt("circle radius deviates from the recurrence by %.3e", worst));
  o.summary = std::to_string(st.states.size() - 1) + " sphere steps, mean radius " +
              fmt("%.15f -> %.15f", mean_radius(st.states.front()), mean_radius(st.states.back())) +
              fmt("; circle recurrence error %.2e", worst);
  return o;
}

// Criterion 9
Outcome quantitative_ift() {
  Outcome o;
  std::mt19937_64 rng(9);
  double worst_contraction = 0.0, worst_residual = 0.0, worst_lip = 0.0;
  for (const QiftProblem& p : {qift_fixtures::linear(), qift_fixtures::square(), qift_fixtures::cubic()}) {
    const QiftConstants c = qift_constants(p);
    // Independent contraction measurement on a dense lattice of V_delta.
    const double A = p.jac_x(p.x0, p.lambda0)(0, 0);
    double contraction = 0.0;
    for (int i = -100; i <= 100; ++i) {
      for (int j = -100; j <= 100; ++j) {
        const Vec x = p.x0 + Vec::Constant(1, c.delta * i / 100.0);
        const Vec l = p.lambda0 + Vec::Constant(1, c.delta * j / 100.0);
        contraction = std::max(contraction, std::abs(1.0 - p.jac_x(x, l)(0, 0) / A));
      }
    }
    worst_contraction = std::max(worst_contraction, contraction);
    o.require(contraction <= 0.5 + 1e-12, fmt("contraction %.6f on V_delta", contraction));

    std::uniform_real_distribution<double> ud(-c.delta1, c.delta1);
    std::vector<std::pair<double, double>> solved;
    for (int i = 0; i < 50; ++i) {
      double d = ud(rng);
      while (std::abs(d) >= c.delta1) d = ud(rng);
      const Vec l = p.lambda0 + Vec::Constant(1, d);
      const QiftSolution s = qift_solve(p, c, l);
      const double res = p.F(s.x, l).norm();
      worst_residual = std::max(worst_residual, res);
      o.require(res < 1e-10, fmt("|F(g(l), l)| = %.3e", res));
      solved.emplace_back(l(0), s.x(0));
    }
    for (std::size_t i = 0; i + 1 < solved.size(); ++i) {
      const auto [a, ga] = solved[i];
      const auto [b, gb] = solved[i + 1];
      if (a == b) continue;
      const double q = std::abs(ga - gb) / std::abs(a - b) / (2.0 * c.M * c.B);
      worst_lip = std::max(worst_lip, q);
      o.require(q <= 1.0 + 1e-9, fmt("Lipschitz quotient %.6f of 2MB", q));
    }
  }
  o.summary = fmt("contraction %.4f, residual %.2e", worst_contraction, worst_residual) +
              fmt(", Lipschitz / 2MB %.4f", worst_lip);
  return o;
}

// Criterion 10
Outcome chain_arithmetic() {
  Outcome o;
  const auto circle = fx::circle(1.0);
  const SampleGrid grid = SampleGrid::uniform(circle, 64);
  const TaylorBounds tb = taylor_bounds(circle, grid, 0.999);
  o.require(std::abs(tb.G - 1.999) <= 1e-3, fmt("grid G = %.9f", tb.G));
  const Vec q = Vec::Zero(1), v = Vec::Zero(1);
  const double d0 = delta0_at(circle.chart(0), q, v, tb.G);
  const double d1 = delta1_at(circle.chart(0), q, v, tb.G);
  const double d2 = delta2_at(circle.chart(0), q, v, tb.G, tb.Gp);
  // DE(0, 0) is a rotation with sup norm 1 and inverse sup norm P = 1, N = 2.
  const double P = 1.0, N = 2.0;
  const double s0 = 1.0 / (2.0 * N * P * tb.G);
  const double s1 = s0 / (2.0 * P);
  const double s2 = s1 / std::sqrt(N * (tb.Gp[0] * tb.Gp[0] + tb.Gp[1] * tb.Gp[1]));
  for (const auto& [got, scalar, frozen, name] : {std::tuple{d0, s0, 0.125063, "delta0"},
                                                  std::tuple{d1, s1, 0.0625313, "delta1"},
                                                  std::tuple{d2, s2, 0.0156407, "delta2"}}) {
    o.require(std::abs(got - frozen) <= 1e-4, std::string(name) + fmt(" = %.9g, expected %.9g", got, frozen));
    o.require(std::abs(scalar - frozen) <= 1e-4, std::string(name) + fmt(" scalar = %.9g, expected %.9g", scalar, frozen));
    o.require(std::abs(got - scalar) <= 1e-12, std::string(name) + fmt(" library %.12g vs scalar %.12g", got, scalar));
  }
  o.summary = fmt("G = %.6f, delta0 = %.7f", tb.G, d0) + fmt(", delta1 = %.7f, delta2 = %.7f", d1, d2);
  return o;
}

// Criterion 11
Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "embedflow_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "config.json";
  std::ofstream(cfg) << R"j({"shape": {"builtin": "torus"}, "resolution": 16, "flow": {"max_steps": 2},
    "penalty": {"data_points": [[2.5, 0, 0.2]]}, "seed": 3})j";
  std::ostringstream sink;
  for (const char* sub : {"certify", "flow", "verify"}) {
    for (const char* run : {"a", "b"}) {
      const std::string out = (root / run).string(), cs = cfg.string();
      const char* argv[] = {"embedflow", sub, "--config", cs.c_str(), "--out", out.c_str()};
      const int code = cli::run(6, argv, sink, sink);
      o.require(code == 0, std::string(sub) + " exited with " + std::to_string(code));
    }
  }
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    ++files;
    const fs::path other = root / "b" / e.path().filename();
    o.require(fs::exists(other) && slurp(e.path()) == slurp(other), e.path().filename().string() + " differs");
  }
  o.require(files >= 8, "expected at least 8 output files");
  o.summary = std::to_string(files) + " output files byte-identical across two runs";
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int id, const Outcome& o, double seconds) {
    const bool ok = o.failures.empty();
    if (!ok) ++failed;
    std::printf("%s criterion %d (%.1fs): %s\n", ok ? "PASS" : "FAIL", id, seconds, o.summary.c_str());
    for (std::size_t i = 0; i < o.failures.size() && i < 10; ++i) std::printf("    %s\n", o.failures[i].c_str());
    if (o.failures.size() > 10) std::printf("    ... %zu more\n", o.failures.size() - 10);
    std::fflush(stdout);
  };
  auto timed = [](auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = f();
    return std::pair{std::move(result), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
  };

  {
    auto [o, s] = timed(curvature_exactness);
    report(1, o, s);
  }
  {
    auto [o, s] = timed(focal_soundness);
    report(2, o, s);
  }
  {
    auto [o, s] = timed(delta_soundness);
    report(3, o, s);
  }
  {
    auto [sw, s] = timed(deformation_sweep);
    report(4, sw.bounded_steps, s);
    report(5, sw.immersion, s);
  }
  const std::vector<std::pair<int, std::function<Outcome()>>> rest{
      {6, invariance}, {7, gradient_correctness}, {8, flow_reproduction},
      {9, quantitative_ift}, {10, chain_arithmetic}, {11, determinism}};
  for (const auto& [id, f] : rest) {
    auto [o, s] = timed(f);
    report(id, o, s);
  }
  return failed == 0 ? 0 : 1;
}
