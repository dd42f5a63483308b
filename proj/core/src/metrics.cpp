#include "vpcd/metrics.hpp"

#include "vpcd/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>

namespace vpcd::metrics {
namespace {

std::map<int, std::vector<const TrackPoint*>> by_frame(std::span<const TrackPoint> pts) {
  std::map<int, std::vector<const TrackPoint*>> out;
  for (const auto& p : pts) out[p.frame].push_back(&p);
  return out;
}

double comb2(double n) { return 0.5 * n * (n - 1.0); }

Plane gaussian_window() {
  constexpr int kSize = 11;
  constexpr double kSigma = 1.5;
  Plane w(kSize, kSize);
  for (int r = 0; r < kSize; ++r)
    for (int c = 0; c < kSize; ++c) {
      const double dy = r - kSize / 2;
      const double dx = c - kSize / 2;
      w(r, c) = std::exp(-(dx * dx + dy * dy) / (2.0 * kSigma * kSigma));
    }
  return w / w.sum();
}

}  // namespace

TrackingReport mot_eval(std::span<const TrackPoint> predicted, std::span<const TrackPoint> truth,
                        const MotOptions& opts) {
  TrackingReport rep;
  const auto pred_frames = by_frame(predicted);
  const auto gt_frames = by_frame(truth);
  std::set<int> frames;
  for (const auto& [f, _] : pred_frames) frames.insert(f);
  for (const auto& [f, _] : gt_frames) frames.insert(f);
  rep.frames = static_cast<int>(frames.size());

  std::map<int, int> last_match;   // gt id -> pred id it was last matched to
  std::map<int, int> gt_frames_n;  // counted frames per gt id
  std::map<int, int> gt_matched_n;
  double dist_sum = 0.0;
  static const std::vector<const TrackPoint*> kNone;

  for (int f : frames) {
    const auto pit = pred_frames.find(f);
    const auto git = gt_frames.find(f);
    const auto& preds = pit != pred_frames.end() ? pit->second : kNone;
    const auto& gts = git != gt_frames.end() ? git->second : kNone;
    std::vector<int> gt_to_pred(gts.size(), -1);
    std::vector<bool> pred_used(preds.size(), false);

    // Keep the previous correspondence while it stays within the radius.
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const auto lm = last_match.find(gts[g]->id);
      if (lm == last_match.end()) continue;
      for (std::size_t p = 0; p < preds.size(); ++p) {
        if (pred_used[p] || preds[p]->id != lm->second) continue;
        if ((preds[p]->position - gts[g]->position).norm() <= opts.match_radius) {
          gt_to_pred[g] = static_cast<int>(p);
          pred_used[p] = true;
        }
        break;
      }
    }
    std::vector<int> free_gt, free_pred;
    for (std::size_t g = 0; g < gts.size(); ++g)
      if (gt_to_pred[g] < 0) free_gt.push_back(static_cast<int>(g));
    for (std::size_t p = 0; p < preds.size(); ++p)
      if (!pred_used[p]) free_pred.push_back(static_cast<int>(p));
    if (!free_gt.empty() && !free_pred.empty()) {
      const double big = 1e6;
      Eigen::MatrixXd cost(static_cast<Eigen::Index>(free_gt.size()), static_cast<Eigen::Index>(free_pred.size()));
      for (std::size_t i = 0; i < free_gt.size(); ++i)
        for (std::size_t j = 0; j < free_pred.size(); ++j) {
          const double d = (preds[static_cast<std::size_t>(free_pred[j])]->position -
                            gts[static_cast<std::size_t>(free_gt[i])]->position).norm();
          cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d <= opts.match_radius ? d : big;
        }
      const std::vector<int> sol = solve_assignment(cost);
      for (std::size_t i = 0; i < free_gt.size(); ++i) {
        const int j = sol[i];
        if (j < 0 || cost(static_cast<Eigen::Index>(i), j) >= big) continue;
        gt_to_pred[static_cast<std::size_t>(free_gt[i])] = free_pred[static_cast<std::size_t>(j)];
        pred_used[static_cast<std::size_t>(free_pred[static_cast<std::size_t>(j)])] = true;
      }
    }

    for (std::size_t g = 0; g < gts.size(); ++g) {
      const TrackPoint& gt = *gts[g];
      const bool counts = gt.visibility >= opts.min_visibility;
      const int p = gt_to_pred[g];
      if (p >= 0) {
        const TrackPoint& pr = *preds[static_cast<std::size_t>(p)];
        if (counts) {
          const auto lm = last_match.find(gt.id);
          if (lm != last_match.end() && lm->second != pr.id) ++rep.id_switches;
          ++rep.matches;
          dist_sum += (pr.position - gt.position).norm();
          ++gt_matched_n[gt.id];
        }
        last_match[gt.id] = pr.id;
      } else if (counts) {
        ++rep.false_negatives;
      }
      if (counts) {
        ++rep.ground_truth;
        ++gt_frames_n[gt.id];
      }
    }
    for (std::size_t p = 0; p < preds.size(); ++p)
      if (!pred_used[p]) ++rep.false_positives;
  }
  if (rep.ground_truth > 0)
    rep.mota = 1.0 - static_cast<double>(rep.false_positives + rep.false_negatives + rep.id_switches) /
                         static_cast<double>(rep.ground_truth);
  rep.motp = rep.matches > 0 ? dist_sum / rep.matches / opts.match_radius : 0.0;
  for (const auto& [id, n] : gt_frames_n) {
    const auto m = gt_matched_n.find(id);
    if (m != gt_matched_n.end() && m->second >= 0.8 * n) ++rep.mostly_tracked;
  }
  return rep;
}

TrackingReport combine(std::span<const TrackingReport> reports) {
  TrackingReport out;
  double dist = 0.0;
  for (const auto& r : reports) {
    out.mostly_tracked += r.mostly_tracked;
    out.id_switches += r.id_switches;
    out.false_positives += r.false_positives;
    out.false_negatives += r.false_negatives;
    out.matches += r.matches;
    out.ground_truth += r.ground_truth;
    out.frames += r.frames;
    dist += r.motp * r.matches;
  }
  if (out.ground_truth > 0)
    out.mota = 1.0 - static_cast<double>(out.false_positives + out.false_negatives + out.id_switches) /
                         static_cast<double>(out.ground_truth);
  out.motp = out.matches > 0 ? dist / out.matches : 0.0;
  return out;
}

double ari(std::span<const int> predicted, std::span<const int> truth, bool include_background,
           int background_label) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("ari: size mismatch");
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  double n = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!include_background && truth[i] == background_label) continue;
    table[{truth[i], predicted[i]}] += 1.0;
    rows[truth[i]] += 1.0;
    cols[predicted[i]] += 1.0;
    n += 1.0;
  }
  if (n < 2.0) return 1.0;
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, v] : table) index += comb2(v);
  for (const auto& [_, v] : rows) sum_rows += comb2(v);
  for (const auto& [_, v] : cols) sum_cols += comb2(v);
  const double expected = sum_rows * sum_cols / comb2(n);
  const double max_index = 0.5 * (sum_rows + sum_cols);
  // Both sides a single cluster (or all singletons): the index is 0/0.
  if (max_index == expected) return rows.size() == cols.size() && table.size() == rows.size() ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

std::vector<int> instance_labels(std::span<const ObjectInstance> instances, int height, int width) {
  std::vector<int> labels(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
  for (std::size_t i = instances.size(); i-- > 0;) {
    const Plane m = instances[i].render_mask();
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c)
        if (m(r, c) > 0.5) labels[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)] = static_cast<int>(i) + 1;
  }
  return labels;
}

double frame_mse(const RgbImage& a, const RgbImage& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw std::invalid_argument("frame_mse: shape mismatch");
  return mean_squared_error(a, b);
}

double psnr(const RgbImage& a, const RgbImage& b) {
  const double mse = frame_mse(a, b);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Plane& a, const Plane& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("ssim: shape mismatch");
  static const Plane w = gaussian_window();
  const int k = static_cast<int>(w.rows());
  const int h = static_cast<int>(a.rows()) - k + 1;
  const int wd = static_cast<int>(a.cols()) - k + 1;
  if (h < 1 || wd < 1) throw std::invalid_argument("ssim: image smaller than the window");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < wd; ++c) {
      const auto pa = a.block(r, c, k, k);
      const auto pb = b.block(r, c, k, k);
      const double ma = (w * pa).sum();
      const double mb = (w * pb).sum();
      const double va = (w * pa.square()).sum() - ma * ma;
      const double vb = (w * pb.square()).sum() - mb * mb;
      const double cov = (w * pa * pb).sum() - ma * mb;
      total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  return total / (static_cast<double>(h) * wd);
}

double ssim(const RgbImage& a, const RgbImage& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw std::invalid_argument("ssim: shape mismatch");
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += ssim(a.channel(c), b.channel(c));
  return s / 3.0;
}

std::vector<int> match_positions(std::span<const Vec2> predicted, std::span<const Vec2> truth, double radius) {
  std::vector<int> out(truth.size(), -1);
  if (predicted.empty() || truth.empty()) return out;
  const double big = 1e6;
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(truth.size()), static_cast<Eigen::Index>(predicted.size()));
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t j = 0; j < predicted.size(); ++j) {
      const double d = (predicted[j] - truth[i]).norm();
      cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d <= radius ? d : big;
    }
  const std::vector<int> sol = solve_assignment(cost);
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (sol[i] >= 0 && cost(static_cast<Eigen::Index>(i), sol[i]) < big) out[i] = sol[i];
  return out;
}

PositionCurve position_mse(std::span<const PositionSample> samples, int horizon, double penalty_distance) {
  PositionCurve c;
  const auto n = static_cast<std::size_t>(horizon);
  std::vector<double> sum(n, 0.0), sum2(n, 0.0);
  c.count.assign(n, 0);
  c.unmatched.assign(n, 0);
  for (const auto& s : samples) {
    if (s.step < 1 || s.step > horizon) continue;
    const auto k = static_cast<std::size_t>(s.step - 1);
    double e = penalty_distance * penalty_distance;
    if (s.predicted) {
      e = (*s.predicted - s.truth).squared_norm();
    } else {
      ++c.unmatched[k];
    }
    sum[k] += e;
    sum2[k] += e * e;
    ++c.count[k];
  }
  for (std::size_t k = 0; k < n; ++k) {
    const double m = c.count[k] > 0 ? sum[k] / c.count[k] : 0.0;
    const double var = c.count[k] > 0 ? std::max(0.0, sum2[k] / c.count[k] - m * m) : 0.0;
    c.mean.push_back(m);
    c.stddev.push_back(std::sqrt(var));
  }
  return c;
}

void write_trajectories(const std::filesystem::path& path, std::span<const TrajectoryRecord> records) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.precision(10);
  f << "track_id,t,x,y,vx,vy\n";
  for (const auto& r : records)
    f << r.track_id << ',' << r.t << ',' << r.position.x << ',' << r.position.y << ',' << r.velocity.x << ','
      << r.velocity.y << '\n';
}

}  // namespace vpcd::metrics
