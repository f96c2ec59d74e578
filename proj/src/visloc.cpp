#include "mslm/visloc.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mslm/binio.hpp"
#include "mslm/error.hpp"

namespace mslm {

Retrieval retrieve_reference(std::span<const double> query, std::span<const ReferenceFrame> db) {
  if (db.empty()) throw InvalidArgument("reference database is empty");
  Retrieval best{0, -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (db[i].global.size() != query.size()) throw DimensionMismatch("global descriptor dim mismatch");
    const double s = cosine(query, db[i].global);
    if (s > best.similarity) best = {i, s};
  }
  return best;
}

namespace {

double sq_dist(const Embedding& a, const Embedding& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

struct Nearest {
  std::size_t index = 0;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
};

template <class Get>
Nearest nearest(const Embedding& d, std::size_t n, Get&& get) {
  Nearest r;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = sq_dist(d, get(i));
    if (s < r.best) {
      r.second = r.best;
      r.best = s;
      r.index = i;
    } else if (s < r.second) {
      r.second = s;
    }
  }
  return r;
}

bool passes_ratio(const Nearest& n, double ratio) {
  // Compare distances, not squared distances.
  return std::isinf(n.second) || std::sqrt(n.best) < ratio * std::sqrt(n.second);
}

}  // namespace

std::vector<Correspondence> match_local(std::span<const Keypoint> query, const ReferenceFrame& ref,
                                        double ratio) {
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < ref.keypoints.size(); ++i) {
    if (ref.keypoints[i].depth > 0.0) usable.push_back(i);
  }
  std::vector<Correspondence> out;
  if (usable.empty() || query.empty()) return out;
  for (std::size_t qi = 0; qi < query.size(); ++qi) {
    const auto fwd = nearest(query[qi].descriptor, usable.size(),
                             [&](std::size_t i) -> const Embedding& { return ref.keypoints[usable[i]].descriptor; });
    if (!passes_ratio(fwd, ratio)) continue;
    const Keypoint& rk = ref.keypoints[usable[fwd.index]];
    const auto back = nearest(rk.descriptor, query.size(),
                              [&](std::size_t i) -> const Embedding& { return query[i].descriptor; });
    if (back.index != qi || !passes_ratio(back, ratio)) continue;
    const Vec3 pc = back_project(rk.pixel, rk.depth, ref.intrinsics);
    out.push_back({to_world(pc, ref.pose), query[qi].pixel});
  }
  return out;
}

namespace {

std::vector<double> real_roots(std::vector<double> coeffs /* highest degree first */) {
  double scale = 0.0;
  for (double c : coeffs) scale = std::max(scale, std::abs(c));
  while (coeffs.size() > 1 && std::abs(coeffs.front()) <= 1e-14 * scale) coeffs.erase(coeffs.begin());
  const int deg = static_cast<int>(coeffs.size()) - 1;
  std::vector<double> roots;
  if (deg < 1) return roots;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) comp(0, i) = -coeffs[i + 1] / coeffs[0];
  for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  for (int i = 0; i < deg; ++i) {
    const auto ev = es.eigenvalues()[i];
    if (std::abs(ev.imag()) > 1e-6 * std::max(1.0, std::abs(ev.real()))) continue;
    double x = ev.real();
    for (int it = 0; it < 5; ++it) {  // Newton polish
      double p = 0.0, dp = 0.0;
      for (double c : coeffs) {
        dp = dp * x + p;
        p = p * x + c;
      }
      if (dp == 0.0) break;
      x -= p / dp;
    }
    roots.push_back(x);
  }
  return roots;
}

// Rigid transform mapping src onto dst in the least-squares sense (Kabsch).
Pose kabsch(std::span<const Vec3> src, std::span<const Vec3> dst) {
  Vec3 cs = Vec3::Zero(), cd = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs /= static_cast<double>(src.size());
  cd /= static_cast<double>(src.size());
  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;
  Pose p;
  p.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  p.translation = cd - p.rotation * cs;
  return p;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

Mat3 so3_exp(const Vec3& w) {
  const double th = w.norm();
  if (th < 1e-12) return Mat3::Identity() + skew(w);
  return Eigen::AngleAxisd(th, w / th).toRotationMatrix();
}

double reproj_cam(const Pose& cam_from_world, const Intrinsics& k, const Correspondence& c) {
  const Vec3 p = cam_from_world.apply(c.world);
  if (!(p.z() > 1e-9)) return std::numeric_limits<double>::infinity();
  return (k.project(p) - c.pixel).norm();
}

// Levenberg–Marquardt on the reprojection error, camera-from-world pose.
Pose refine(Pose pose, const Intrinsics& k, std::span<const Correspondence> corr,
            std::span<const std::size_t> idx) {
  auto cost = [&](const Pose& p) {
    double s = 0.0;
    for (std::size_t i : idx) {
      const double e = reproj_cam(p, k, corr[i]);
      s += e * e;
    }
    return s;
  };
  double current = cost(pose);
  double lambda = 1e-3;
  for (int it = 0; it < 30 && std::isfinite(current); ++it) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i : idx) {
      const Vec3 p = pose.apply(corr[i].world);
      const double iz = 1.0 / p.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0, -k.fx * p.x() * iz * iz, 0, k.fy * iz, -k.fy * p.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dp;
      dp.leftCols<3>() = -skew(p);
      dp.rightCols<3>() = Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = dproj * dp;
      const Vec2 r = k.project(p) - corr[i].pixel;
      jtj += j.transpose() * j;
      jtr += j.transpose() * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Eigen::Matrix<double, 6, 6> a = jtj;
      a.diagonal() *= (1.0 + lambda);
      const Eigen::Matrix<double, 6, 1> delta = a.ldlt().solve(-jtr);
      const Mat3 dr = so3_exp(delta.head<3>());
      Pose cand;
      cand.rotation = dr * pose.rotation;
      cand.translation = dr * pose.translation + delta.tail<3>();
      const double c = cost(cand);
      if (c < current) {
        const double gain = current - c;
        pose = cand;
        current = c;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (gain < 1e-14 * (1.0 + current)) return pose;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  // Re-orthonormalize.
  Eigen::JacobiSVD<Mat3> svd(pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  pose.rotation = svd.matrixU() * svd.matrixV().transpose();
  return pose;
}

std::vector<std::size_t> inliers_of(const Pose& cam_from_world, const Intrinsics& k,
                                    std::span<const Correspondence> corr, double tol, double* total) {
  std::vector<std::size_t> in;
  double sum = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double e = reproj_cam(cam_from_world, k, corr[i]);
    if (e <= tol) {
      in.push_back(i);
      sum += e;
    }
  }
  if (total) *total = sum;
  return in;
}

Vec3 bearing(const Intrinsics& k, const Vec2& px) {
  return Vec3((px.x() - k.cx) / k.fx, (px.y() - k.cy) / k.fy, 1.0).normalized();
}

}  // namespace

std::vector<Pose> solve_p3p(std::span<const Vec3, 3> w, std::span<const Vec3, 3> j) {
  std::vector<Pose> out;
  const double a2 = (w[1] - w[2]).squaredNorm();
  const double b2 = (w[0] - w[2]).squaredNorm();
  const double c2 = (w[0] - w[1]).squaredNorm();
  if (a2 < 1e-18 || b2 < 1e-18 || c2 < 1e-18) return out;
  const double ca = j[1].dot(j[2]);
  const double cb = j[0].dot(j[2]);
  const double cg = j[0].dot(j[1]);
  const double amc = (a2 - c2) / b2;
  const double apc = (a2 + c2) / b2;
  const double bmc = (b2 - c2) / b2;
  const double bma = (b2 - a2) / b2;

  const double a4 = (amc - 1) * (amc - 1) - 4 * c2 / b2 * ca * ca;
  const double a3 = 4 * (amc * (1 - amc) * cb - (1 - apc) * ca * cg + 2 * c2 / b2 * ca * ca * cb);
  const double a2c = 2 * (amc * amc - 1 + 2 * amc * amc * cb * cb + 2 * bmc * ca * ca -
                          4 * apc * ca * cb * cg + 2 * bma * cg * cg);
  const double a1 = 4 * (-amc * (1 + amc) * cb + 2 * a2 / b2 * cg * cg * cb - (1 - apc) * ca * cg);
  const double a0 = (1 + amc) * (1 + amc) - 4 * a2 / b2 * cg * cg;

  for (double v : real_roots({a4, a3, a2c, a1, a0})) {
    if (!(v > 0.0)) continue;
    const double den = 2.0 * (cg - v * ca);
    if (std::abs(den) < 1e-12) continue;
    const double u = ((-1 + amc) * v * v - 2 * amc * cb * v + 1 + amc) / den;
    if (!(u > 0.0)) continue;
    const double q = 1 + v * v - 2 * v * cb;
    if (!(q > 0.0)) continue;
    const double s1 = std::sqrt(b2 / q);
    const Vec3 cam[3] = {s1 * j[0], u * s1 * j[1], v * s1 * j[2]};
    const Vec3 world[3] = {w[0], w[1], w[2]};
    out.push_back(kabsch(world, cam));
  }
  return out;
}

double reprojection_error(const Pose& cam_to_world, const Intrinsics& k, const Correspondence& c) {
  return reproj_cam(cam_to_world.inverse(), k, c);
}

std::optional<PnpResult> pnp_ransac(std::span<const Correspondence> corr, const Intrinsics& k,
                                    const PnpParams& params, std::mt19937_64& rng) {
  if (corr.size() < 4) return std::nullopt;
  std::vector<Vec3> bearings;
  bearings.reserve(corr.size());
  for (const auto& c : corr) bearings.push_back(bearing(k, c.pixel));

  std::uniform_int_distribution<std::size_t> pick(0, corr.size() - 1);
  std::optional<Pose> best;
  std::vector<std::size_t> best_in;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < params.iterations; ++it) {
    std::size_t s[4];
    for (int i = 0; i < 4; ++i) {
      bool fresh;
      do {
        s[i] = pick(rng);
        fresh = std::find(s, s + i, s[i]) == s + i;
      } while (!fresh);
    }
    const Vec3 w[3] = {corr[s[0]].world, corr[s[1]].world, corr[s[2]].world};
    const Vec3 j[3] = {bearings[s[0]], bearings[s[1]], bearings[s[2]]};
    std::optional<Pose> pick_pose;
    double pick_err = std::numeric_limits<double>::infinity();
    for (const Pose& cand : solve_p3p(std::span<const Vec3, 3>(w), std::span<const Vec3, 3>(j))) {
      const double e = reproj_cam(cand, k, corr[s[3]]);
      if (e < pick_err) {
        pick_err = e;
        pick_pose = cand;
      }
    }
    if (!pick_pose || pick_err > params.reproj_tol_px) continue;
    double total = 0.0;
    auto in = inliers_of(*pick_pose, k, corr, params.reproj_tol_px, &total);
    if (in.size() > best_in.size() || (in.size() == best_in.size() && total < best_err)) {
      best = pick_pose;
      best_in = std::move(in);
      best_err = total;
    }
  }
  if (!best || best_in.size() < std::max<std::size_t>(4, params.min_inliers)) return std::nullopt;

  Pose pose = *best;
  for (int round = 0; round < 3; ++round) {
    const Pose refined = refine(pose, k, corr, best_in);
    auto in = inliers_of(refined, k, corr, params.reproj_tol_px, nullptr);
    if (in.size() < best_in.size()) break;
    pose = refined;
    const bool stable = in == best_in;
    best_in = std::move(in);
    if (stable) break;
  }
  if (best_in.size() < std::max<std::size_t>(4, params.min_inliers)) return std::nullopt;
  return PnpResult{pose.inverse(), std::move(best_in)};
}

Localization localize_image(const QueryFrame& query, std::span<const ReferenceFrame> db, double eps,
                            const GridSpec& spec, const LocalizeParams& params, std::mt19937_64& rng) {
  Localization out{Heatmap(spec, eps), false, std::nullopt, 0, 0};
  if (db.empty()) return out;
  const Retrieval r = retrieve_reference(query.global, db);
  out.reference = r.index;
  const auto corr = match_local(query.keypoints, db[r.index], params.ratio);
  const auto pnp = pnp_ransac(corr, query.intrinsics, params.pnp, rng);
  if (!pnp) return out;
  out.inliers = pnp->inliers.size();
  if (out.inliers < params.min_inliers) return out;
  auto hit = voxel_index(pnp->pose.translation, spec);
  hit.index.pz = std::clamp(hit.index.pz, 0, spec.z - 1);
  if (!in_bounds(hit.index, spec)) return out;
  out.heatmap = point_heatmap(hit.index, eps, spec);
  out.pose = pnp->pose;
  out.success = true;
  return out;
}

namespace {

binio::FloatBlob keypoint_blob(const std::vector<Keypoint>& kps) {
  binio::FloatBlob b;
  const std::size_t dk = kps.empty() ? 0 : kps.front().descriptor.size();
  b.rows = static_cast<std::uint32_t>(kps.size());
  b.cols = static_cast<std::uint32_t>(3 + dk);
  for (const auto& k : kps) {
    if (k.descriptor.size() != dk) throw DimensionMismatch("keypoint descriptor dims differ");
    b.data.push_back(static_cast<float>(k.pixel.x()));
    b.data.push_back(static_cast<float>(k.pixel.y()));
    b.data.push_back(static_cast<float>(k.depth));
    for (double d : k.descriptor) b.data.push_back(static_cast<float>(d));
  }
  return b;
}

std::vector<Keypoint> keypoints_from(const binio::FloatBlob& b) {
  if (b.rows > 0 && b.cols < 3) throw FormatError("keypoint blob needs >= 3 columns", 0);
  std::vector<Keypoint> out(b.rows);
  for (std::uint32_t r = 0; r < b.rows; ++r) {
    const float* row = b.data.data() + std::size_t{r} * b.cols;
    out[r].pixel = Vec2(row[0], row[1]);
    out[r].depth = row[2];
    out[r].descriptor.assign(row + 3, row + b.cols);
  }
  return out;
}

binio::FloatBlob vector_blob(const Embedding& v) {
  return {1, static_cast<std::uint32_t>(v.size()), std::vector<float>(v.begin(), v.end())};
}

Embedding vector_from(const binio::FloatBlob& b) { return Embedding(b.data.begin(), b.data.end()); }

void write_intrinsics(std::ostream& os, const Intrinsics& k) {
  os << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' ' << k.width << ' ' << k.height;
}

Intrinsics read_intrinsics(std::istream& is) {
  Intrinsics k;
  is >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height;
  return k;
}

}  // namespace

void save_reference_db(std::span<const ReferenceFrame> db, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream m(dir / "refdb.txt");
  m.precision(17);
  m << "mslm-refdb 1\n";
  for (std::size_t i = 0; i < db.size(); ++i) {
    const std::string g = "frame" + std::to_string(i) + "_global.bin";
    const std::string kp = "frame" + std::to_string(i) + "_keypoints.bin";
    binio::save_blob(dir / g, vector_blob(db[i].global));
    binio::save_blob(dir / kp, keypoint_blob(db[i].keypoints));
    m << "frame " << g << ' ' << kp << ' ';
    write_intrinsics(m, db[i].intrinsics);
    double pose[16];
    db[i].pose.to_row_major(pose);
    for (double v : pose) m << ' ' << v;
    m << '\n';
  }
}

std::vector<ReferenceFrame> load_reference_db(const std::filesystem::path& dir) {
  std::ifstream m(dir / "refdb.txt");
  if (!m) throw Error("cannot open reference db manifest in " + dir.string());
  std::string line;
  std::getline(m, line);
  if (line != "mslm-refdb 1") throw FormatError("bad reference db header", 0);
  std::vector<ReferenceFrame> db;
  while (std::getline(m, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string tag, g, kp;
    is >> tag >> g >> kp;
    if (tag != "frame") throw FormatError("unexpected manifest record '" + tag + "'", 0);
    ReferenceFrame f;
    f.intrinsics = read_intrinsics(is);
    double pose[16];
    for (double& v : pose) is >> v;
    if (!is) throw FormatError("malformed frame record", 0);
    f.pose = Pose::from_row_major(pose);
    f.global = vector_from(binio::load_blob(dir / g));
    f.keypoints = keypoints_from(binio::load_blob(dir / kp));
    db.push_back(std::move(f));
  }
  return db;
}

void save_query_frame(const QueryFrame& q, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  binio::save_blob(dir / "global.bin", vector_blob(q.global));
  binio::save_blob(dir / "keypoints.bin", keypoint_blob(q.keypoints));
  std::ofstream m(dir / "query.txt");
  m.precision(17);
  m << "mslm-query 1\n";
  write_intrinsics(m, q.intrinsics);
  m << '\n';
}

QueryFrame load_query_frame(const std::filesystem::path& dir) {
  std::ifstream m(dir / "query.txt");
  if (!m) throw Error("cannot open query manifest in " + dir.string());
  std::string line;
  std::getline(m, line);
  if (line != "mslm-query 1") throw FormatError("bad query header", 0);
  QueryFrame q;
  q.intrinsics = read_intrinsics(m);
  if (!m) throw FormatError("malformed query intrinsics", 0);
  q.global = vector_from(binio::load_blob(dir / "global.bin"));
  q.keypoints = keypoints_from(binio::load_blob(dir / "keypoints.bin"));
  return q;
}

}  // namespace mslm
