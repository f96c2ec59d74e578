#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "mslm/embedding.hpp"
#include "mslm/geometry.hpp"
#include "mslm/heatmap.hpp"

namespace mslm {

struct Keypoint {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;  // registered depth; 0 when unknown
  Embedding descriptor;
};

/// A mapped camera view: global + local descriptors with depth and odometry.
struct ReferenceFrame {
  Embedding global;
  std::vector<Keypoint> keypoints;
  Intrinsics intrinsics;
  Pose pose;  // camera-to-world
};

struct QueryFrame {
  Embedding global;
  std::vector<Keypoint> keypoints;
  Intrinsics intrinsics;
};

struct Correspondence {
  Vec3 world = Vec3::Zero();
  Vec2 pixel = Vec2::Zero();
};

struct Retrieval {
  std::size_t index = 0;
  double similarity = 0.0;
};

/// Highest cosine similarity, ties to the lowest index. Throws on empty db.
Retrieval retrieve_reference(std::span<const double> query_global, std::span<const ReferenceFrame> db);

/// Mutual nearest neighbours (L2 on descriptors) passing the ratio test on
/// both sides; reference keypoints without depth are skipped.
std::vector<Correspondence> match_local(std::span<const Keypoint> query, const ReferenceFrame& ref,
                                        double ratio = 0.8);

struct PnpParams {
  int iterations = 1000;
  double reproj_tol_px = 3.0;
  std::size_t min_inliers = 4;  // consensus needed to report a pose at all
};

struct PnpResult {
  Pose pose;  // camera-to-world
  std::vector<std::size_t> inliers;
};

/// Candidate camera-from-world transforms for three world points and their
/// unit bearing vectors (Grunert's quartic).
std::vector<Pose> solve_p3p(std::span<const Vec3, 3> world, std::span<const Vec3, 3> bearings);

/// Reprojection error in pixels for a camera-to-world pose; infinite when the
/// point is behind the camera.
double reprojection_error(const Pose& cam_to_world, const Intrinsics& k, const Correspondence& c);

/// P3P + RANSAC with LM refinement on the inliers. nullopt when fewer than 4
/// correspondences or no consensus of min_inliers.
std::optional<PnpResult> pnp_ransac(std::span<const Correspondence> corr, const Intrinsics& k,
                                    const PnpParams& params, std::mt19937_64& rng);

struct LocalizeParams {
  PnpParams pnp;
  double ratio = 0.8;
  std::size_t min_inliers = 12;
};

struct Localization {
  Heatmap heatmap;
  bool success = false;
  std::optional<Pose> pose;
  std::size_t reference = 0;
  std::size_t inliers = 0;
};

/// Retrieval → matching → PnP, then a point heatmap at the recovered camera
/// position. Failures yield an all-zero heatmap with success = false.
Localization localize_image(const QueryFrame& query, std::span<const ReferenceFrame> db, double eps,
                            const GridSpec& spec, const LocalizeParams& params, std::mt19937_64& rng);

// Reference db on disk: a text manifest `refdb.txt` next to per-frame blobs
// (global: 1×D, keypoints: N×(3+Dk) rows of u, v, depth, descriptor…).
void save_reference_db(std::span<const ReferenceFrame> db, const std::filesystem::path& dir);
std::vector<ReferenceFrame> load_reference_db(const std::filesystem::path& dir);
void save_query_frame(const QueryFrame& q, const std::filesystem::path& dir);
QueryFrame load_query_frame(const std::filesystem::path& dir);

}  // namespace mslm
