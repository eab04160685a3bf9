#include "embedflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "close_pairs.hpp"
#include "embedflow/certify.hpp"

namespace embedflow {

namespace {

double bbox_diagonal(const std::vector<Vec>& pts) {
  if (pts.empty()) return 0.0;
  Vec lo = pts[0], hi = pts[0];
  for (const Vec& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  return (hi - lo).norm();
}

// Smallest ambient / model length ratio over lattice edges.
double lattice_stretch(const ChartAtlas& atlas, const SampleGrid& grid) {
  double s = std::numeric_limits<double>::infinity();
  for (const NodeRef& n : grid.nodes()) {
    const auto& lat = grid.lattice(n.chart);
    const Chart& c = atlas.chart(n.chart);
    const Vec p0 = lat.node(n.index);
    const Vec x0 = c.point(p0);
    const Vec m0 = atlas.model_point(n.chart, p0);
    for (int a = 0; a < lat.dim(); ++a) {
      if (auto nb = lat.neighbor(n.index, a, 1)) {
        const Vec p1 = lat.node(*nb);
        const double model = (atlas.model_point(n.chart, p1) - m0).norm();
        if (model > 0.0) s = std::min(s, (c.point(p1) - x0).norm() / model);
      }
    }
  }
  return std::isfinite(s) ? s : 0.0;
}

PairWitness witness(const std::vector<NodeRef>& nodes, const SampleGrid& grid, std::size_t i, std::size_t j,
                    double ambient, double model, double ratio) {
  PairWitness w;
  w.a = nodes[i];
  w.b = nodes[j];
  w.param_a = grid.param(nodes[i]);
  w.param_b = grid.param(nodes[j]);
  w.ambient_distance = ambient;
  w.model_distance = model;
  w.ratio = ratio;
  return w;
}

// Unit normals (ambient) whose segments [-eps, eps] cover every normal line
// at a point, for a frame with the given columns.
std::vector<Vec> segment_directions(const Mat& frame, int directions) {
  const int c = static_cast<int>(frame.cols());
  std::vector<Vec> out;
  if (c == 1) {
    out.push_back(frame.col(0));
  } else if (c == 2) {
    const int half = std::max(1, directions / 2);
    for (int j = 0; j < half; ++j) {
      const double a = M_PI * j / half;
      out.push_back(std::cos(a) * frame.col(0) + std::sin(a) * frame.col(1));
    }
  } else {
    for (const Vec& coeff : normal_directions(c, directions)) out.push_back(frame * coeff);
  }
  return out;
}

}  // namespace

VerifierReport verify_embedding(const ChartAtlas& atlas, const SampleGrid& grid, const VerifyOptions& opt) {
  VerifierReport r;
  const auto nodes = grid.nodes();
  std::vector<Vec> x(nodes.size()), model(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Chart& c = atlas.chart(nodes[i].chart);
    const Vec p = grid.param(nodes[i]);
    x[i] = c.point(p);
    model[i] = atlas.model_point(nodes[i].chart, p);
    Eigen::JacobiSVD<Mat> svd(c.jacobian(p));
    const double s = svd.singularValues().minCoeff();
    if (s < r.min_singular_value) {
      r.min_singular_value = s;
      r.min_singular_where = nodes[i];
    }
  }
  r.immersion_ok = r.min_singular_value > opt.sv_tol;

  r.stretch = lattice_stretch(atlas, grid);
  const double h_model = model_spacing(atlas, grid);
  const double diameter = bbox_diagonal(model);
  // Pairs farther apart than this cannot fail the ratio test. The floor
  // still catches coincident points when the stretch has collapsed to zero.
  const double radius = opt.inj_tol * r.stretch * diameter * (1.0 + 1e-12) + 1e-12 * (1.0 + bbox_diagonal(x));
  r.injectivity_ok = true;
  detail::for_each_close_pair(x, radius, [&](std::size_t i, std::size_t j, double amb) {
    const double m = (model[i] - model[j]).norm();
    if (m <= opt.separation * h_model) return;
    ++r.pairs_tested;
    const double scale = r.stretch * m;
    const double ratio = scale > 0.0 ? amb / scale : (amb > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    if (ratio < r.bilipschitz_worst_pair.ratio) r.bilipschitz_worst_pair = witness(nodes, grid, i, j, amb, m, ratio);
    if (ratio <= opt.inj_tol) r.injectivity_ok = false;
  });
  r.pass = r.immersion_ok && r.injectivity_ok;
  return r;
}

double segment_distance(const Vec& p0, const Vec& p1, const Vec& q0, const Vec& q1) {
  const Vec d1 = p1 - p0;
  const Vec d2 = q1 - q0;
  const Vec r = p0 - q0;
  const double a = d1.squaredNorm();
  const double e = d2.squaredNorm();
  const double f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (a <= 0.0 && e <= 0.0) return r.norm();
  if (a <= 0.0) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= 0.0) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > 0.0 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

ReachEstimate reach_oracle(const ChartAtlas& atlas, const SampleGrid& grid, double epsilon, const ReachOptions& opt) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("reach oracle needs epsilon > 0");
  ReachEstimate out;
  const auto nodes = grid.nodes();
  std::vector<Vec> x(nodes.size()), model(nodes.size());
  std::vector<std::vector<Vec>> dirs(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Chart& c = atlas.chart(nodes[i].chart);
    const Vec p = grid.param(nodes[i]);
    x[i] = c.point(p);
    model[i] = atlas.model_point(nodes[i].chart, p);
    dirs[i] = segment_directions(normal_frame(c.jacobian(p), x[i]).basis, opt.directions);
  }
  out.upper_bracket = bbox_diagonal(x);
  out.delta_hat = out.upper_bracket;
  out.bracket_hit = true;

  const double focal = focal_oracle(atlas, grid).distance;
  if (epsilon >= focal) {
    out.warnings.push_back("epsilon is at or beyond the sampled focal distance; segments may graze focal points");
  }

  const double same_point = 1e-9 * (1.0 + bbox_diagonal(model));
  detail::for_each_close_pair(x, 2.0 * epsilon + opt.graze_tol, [&](std::size_t i, std::size_t j, double amb) {
    if (amb >= out.delta_hat) return;
    const double m = (model[i] - model[j]).norm();
    if (m <= same_point) return;  // one point of M seen from two charts
    for (const Vec& a : dirs[i]) {
      for (const Vec& b : dirs[j]) {
        if (segment_distance(x[i] - epsilon * a, x[i] + epsilon * a, x[j] - epsilon * b, x[j] + epsilon * b) <=
            opt.graze_tol) {
          out.delta_hat = amb;
          out.bracket_hit = false;
          out.witness = witness(nodes, grid, i, j, amb, m, 0.0);
          return;
        }
      }
    }
  });
  return out;
}

FocalEstimate focal_oracle(const ChartAtlas& atlas, const SampleGrid& grid) {
  FocalEstimate out;
  struct Candidate {
    double distance;
    NodeRef node;
    Vec direction;
  };
  std::vector<Candidate> candidates;
  for (const NodeRef& n : grid.nodes()) {
    if (grid.lattice(n.chart).near_boundary(n.index)) {
      ++out.excluded_nodes;
      continue;
    }
    const Chart& c = atlas.chart(n.chart);
    const Vec p = grid.param(n);
    const Mat J = c.jacobian(p);
    const NormalCurvature nc = max_normal_curvature(J, c.hessian(p), normal_frame(J, c.point(p)).basis);
    if (nc.magnitude <= 0.0) continue;
    candidates.push_back({1.0 / nc.magnitude, n, nc.direction});
  }
  if (candidates.empty()) return out;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });
  out.distance = candidates.front().distance;
  out.where = candidates.front().node;
  out.direction = candidates.front().direction;

  // The determinant check needs a frame jet; on lattice-only charts some
  // nodes have none, so use the closest-to-focal node that does.
  for (const Candidate& cand : candidates) {
    const Chart& c = atlas.chart(cand.node.chart);
    const Vec q = grid.param(cand.node);
    const FrameJet jet = frame_jet(c, q, false);
    if (!jet.valid) continue;
    const Vec coeff = jet.w.transpose() * cand.direction;
    auto det = [&](double s) { return endpoint_jacobian(c, jet, q, Vec(s * cand.distance * coeff)).det; };
    out.det_where = cand.node;
    out.det_ratio = std::abs(det(1.0) / det(0.0));
    out.det_sign_change = (det(0.95) > 0.0) != (det(1.05) > 0.0);
    break;
  }
  return out;
}

UniqueNearestResult unique_nearest_oracle(const ChartAtlas& atlas, const SampleGrid& grid, double epsilon,
                                          std::size_t samples, std::uint64_t seed, double foot_tol) {
  UniqueNearestResult out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_chart(0, atlas.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t ci = pick_chart(rng);
    const Chart& c = atlas.chart(ci);
    Vec q(c.dim());
    for (int a = 0; a < c.dim(); ++a) {
      const Axis& ax = c.domain().axes[static_cast<std::size_t>(a)];
      // Keep off true boundaries, where the nearest point may be a boundary point.
      const double margin = ax.kind == AxisKind::boundary ? 0.1 * ax.length() : 0.0;
      q(a) = ax.lower + margin + (ax.length() - 2.0 * margin) * unit(rng);
    }
    const Vec x = c.point(q);
    const Mat frame = normal_frame(c.jacobian(q), x).basis;
    Vec coeff(frame.cols());
    for (int i = 0; i < coeff.size(); ++i) coeff(i) = gauss(rng);
    coeff.normalize();
    const double t = epsilon * (2.0 * unit(rng) - 1.0);
    const Vec y = x + t * (frame * coeff);
    const NearestPoint np = nearest_point(atlas, grid, y);
    const double err = (atlas.model_point(np.chart, np.param) - atlas.model_point(ci, q)).norm();
    out.worst_foot_error = std::max(out.worst_foot_error, err);
    ++out.samples;
    if (np.tie || np.diverged || err > foot_tol) ++out.failures;
  }
  out.unique = out.failures == 0;
  return out;
}

}  // namespace embedflow
