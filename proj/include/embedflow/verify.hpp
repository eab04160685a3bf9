#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "embedflow/geometry.hpp"

namespace embedflow {

struct VerifyOptions {
  double sv_tol = 1e-6;   // immersion: smallest Jacobian singular value must exceed this
  double inj_tol = 0.1;   // injectivity: ambient > inj_tol * stretch * model distance
  double separation = 2.0;  // pairs closer than this many model spacings are not tested
};

struct PairWitness {
  NodeRef a;
  NodeRef b;
  Vec param_a;
  Vec param_b;
  double ambient_distance = std::numeric_limits<double>::infinity();
  double model_distance = 0.0;
  /// ambient / (stretch * model); the pair fails when this is <= inj_tol.
  double ratio = std::numeric_limits<double>::infinity();
};

struct VerifierReport {
  double min_singular_value = std::numeric_limits<double>::infinity();
  NodeRef min_singular_where;
  /// Smallest ambient / model length ratio over lattice edges; scales the
  /// injectivity threshold so uniformly shrunk embeddings are not penalized.
  double stretch = 0.0;
  PairWitness bilipschitz_worst_pair;
  std::size_t pairs_tested = 0;
  bool immersion_ok = false;
  bool injectivity_ok = false;
  bool pass = false;
  double reach_estimate = std::numeric_limits<double>::quiet_NaN();
  double focal_min_distance = std::numeric_limits<double>::quiet_NaN();
};

/// Immersion and injectivity checks on the sample grid.
VerifierReport verify_embedding(const ChartAtlas& atlas, const SampleGrid& grid, const VerifyOptions& opt = {});

/// Minimum distance between the segments [p0, p1] and [q0, q1].
double segment_distance(const Vec& p0, const Vec& p1, const Vec& q0, const Vec& q1);

struct ReachOptions {
  int directions = 16;        // normal directions per point in codimension two
  double graze_tol = 1e-9;    // segments closer than this count as meeting
};

struct ReachEstimate {
  double delta_hat = 0.0;
  double upper_bracket = 0.0;  // diameter of the sampled bounding box
  bool bracket_hit = false;    // no meeting segments were found
  PairWitness witness;         // closest pair whose segments meet
  std::vector<std::string> warnings;
};

/// Largest d such that normal segments of half-length epsilon based at any
/// two distinct sampled points closer than d never meet. The predicate is
/// monotone in d, so this is the ambient distance of the closest pair whose
/// segments meet, or the upper bracket when none do.
ReachEstimate reach_oracle(const ChartAtlas& atlas, const SampleGrid& grid, double epsilon,
                           const ReachOptions& opt = {});

struct FocalEstimate {
  double distance = std::numeric_limits<double>::infinity();  // min over nodes of 1 / p_max
  NodeRef where;
  Vec direction;               // unit normal attaining it
  NodeRef det_where;           // node of the determinant check (where, unless its frame jet is flagged)
  double det_ratio = std::numeric_limits<double>::quiet_NaN();  // |det DE| at the focal point over v = 0
  bool det_sign_change = false;  // det DE changes sign across the focal point
  std::size_t excluded_nodes = 0;
};

/// Grid minimum of the focal distance, excluding nodes next to a boundary of M.
FocalEstimate focal_oracle(const ChartAtlas& atlas, const SampleGrid& grid);

struct UniqueNearestResult {
  bool unique = true;
  std::size_t samples = 0;
  std::size_t failures = 0;
  double worst_foot_error = 0.0;  // model distance between generating and recovered foot
};

/// Samples y = phi(q) + t v with |t| <= epsilon and checks that nearest_point
/// recovers q without a tie.
UniqueNearestResult unique_nearest_oracle(const ChartAtlas& atlas, const SampleGrid& grid, double epsilon,
                                          std::size_t samples = 1000, std::uint64_t seed = 1,
                                          double foot_tol = 1e-6);

}  // namespace embedflow
