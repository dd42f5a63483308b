#include "vpcd/tracker.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace vpcd {
namespace {

double appearance_distance(const Plane& a, const Plane& b) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return std::sqrt((a - b).square().sum());
  const auto h = std::max(a.rows(), b.rows());
  const auto w = std::max(a.cols(), b.cols());
  Plane pa = Plane::Zero(h, w);
  Plane pb = Plane::Zero(h, w);
  pa.topLeftCorner(a.rows(), a.cols()) = a;
  pb.topLeftCorner(b.rows(), b.cols()) = b;
  return std::sqrt((pa - pb).square().sum());
}

bool state_less(const ParsedState& a, const ParsedState& b) {
  if (a.position.y != b.position.y) return a.position.y < b.position.y;
  if (a.position.x != b.position.x) return a.position.x < b.position.x;
  return a.color < b.color;
}

}  // namespace

void MatchWeights::validate() const {
  if (lambda_c < 0.0 || lambda_z < 0.0) throw std::invalid_argument("match weights must be >= 0");
  if (lambda_c == 0.0 && lambda_p == 0.0 && lambda_z == 0.0)
    throw std::invalid_argument("at least one match weight must be positive");
  if (!(gate >= 0.0)) throw std::invalid_argument("match gate must be >= 0");
}

ParsedState parsed_state(const ObjectInstance& obj, const PrototypeSet& prototypes) {
  const Prototype* proto = find_prototype(prototypes, obj.prototype_id);
  return {obj.color, proto != nullptr ? &proto->appearance : nullptr, obj.center_of_mass};
}

double match_cost(const ParsedState& parsed, const ObjectTrack& track, const MatchWeights& w,
                  bool use_predicted_position) {
  double cost = w.lambda_c * color_distance(parsed.color, track.color);
  if (parsed.appearance != nullptr && track.appearance.size() > 0) {
    const double lp = w.appearance_weight(static_cast<int>(track.appearance.size()));
    if (lp > 0.0) cost += lp * appearance_distance(*parsed.appearance, track.appearance);
  }
  const Vec2 z = use_predicted_position ? track.predicted_position() : track.position;
  cost += w.lambda_z * (parsed.position - z).norm();
  return cost;
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int rows = static_cast<int>(cost.rows());
  const int cols = static_cast<int>(cost.cols());
  if (rows == 0) return {};
  if (cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);
  if (rows > cols) {
    const auto by_col = solve_assignment(cost.transpose());
    std::vector<int> out(static_cast<std::size_t>(rows), -1);
    for (int c = 0; c < cols; ++c) out[static_cast<std::size_t>(by_col[static_cast<std::size_t>(c)])] = c;
    return out;
  }
  // Shortest augmenting paths with potentials; rows <= cols.
  const double inf = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::size_t>(rows);
  const auto m = static_cast<std::size_t>(cols);
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) out[p[j] - 1] = static_cast<int>(j - 1);
  return out;
}

Assignment assign(std::span<const ParsedState> parsed, std::span<const ObjectTrack> tracks,
                  const MatchWeights& w, bool use_predicted_position) {
  Assignment out;
  const int np = static_cast<int>(parsed.size());
  const int nt = static_cast<int>(tracks.size());

  // Canonical orders make the result independent of the input permutation.
  std::vector<int> po(static_cast<std::size_t>(np));
  std::iota(po.begin(), po.end(), 0);
  std::stable_sort(po.begin(), po.end(), [&](int a, int b) {
    return state_less(parsed[static_cast<std::size_t>(a)], parsed[static_cast<std::size_t>(b)]);
  });
  std::vector<int> to(static_cast<std::size_t>(nt));
  std::iota(to.begin(), to.end(), 0);
  std::stable_sort(to.begin(), to.end(), [&](int a, int b) {
    return tracks[static_cast<std::size_t>(a)].track_id < tracks[static_cast<std::size_t>(b)].track_id;
  });

  Eigen::MatrixXd cost(np, nt);
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nt; ++j)
      cost(i, j) = match_cost(parsed[static_cast<std::size_t>(po[static_cast<std::size_t>(i)])],
                              tracks[static_cast<std::size_t>(to[static_cast<std::size_t>(j)])], w,
                              use_predicted_position);

  const auto row_to_col = solve_assignment(cost);
  std::vector<bool> track_used(static_cast<std::size_t>(nt), false);
  for (int i = 0; i < np; ++i) {
    const int j = row_to_col.empty() ? -1 : row_to_col[static_cast<std::size_t>(i)];
    const int pi = po[static_cast<std::size_t>(i)];
    if (j < 0 || cost(i, j) > w.gate) {
      out.unmatched_parsed.push_back(pi);
      continue;
    }
    const int tj = to[static_cast<std::size_t>(j)];
    out.matches.emplace_back(pi, tj);
    out.total_cost += cost(i, j);
    track_used[static_cast<std::size_t>(tj)] = true;
  }
  for (int j = 0; j < nt; ++j)
    if (!track_used[static_cast<std::size_t>(j)]) out.unmatched_tracks.push_back(j);
  std::sort(out.matches.begin(), out.matches.end());
  std::sort(out.unmatched_parsed.begin(), out.unmatched_parsed.end());
  return out;
}

std::vector<int> SceneState::active_prototypes() const {
  std::vector<int> ids;
  for (const auto& t : tracks_) ids.push_back(t.prototype_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<int> SceneState::align(std::span<const ObjectInstance> parsed,
                                   const PrototypeSet& prototypes, int frame_index) {
  std::vector<ParsedState> states;
  states.reserve(parsed.size());
  for (const auto& obj : parsed) states.push_back(parsed_state(obj, prototypes));
  const Assignment a = assign(states, tracks_, cfg_.weights, cfg_.predicted_gating);
  return update(a, parsed, prototypes, frame_index);
}

std::vector<int> SceneState::update(const Assignment& assignment,
                                    std::span<const ObjectInstance> parsed,
                                    const PrototypeSet& prototypes, int frame_index) {
  std::vector<int> ids(parsed.size(), -1);
  const auto absorb = [&](ObjectTrack& t, const ObjectInstance& obj) {
    t.color = obj.color;
    t.prototype_id = obj.prototype_id;
    if (const Prototype* p = find_prototype(prototypes, obj.prototype_id)) t.appearance = p->appearance;
    t.position = obj.center_of_mass;
    t.last_instance = obj;
    t.last_seen_frame = frame_index;
    t.missed = 0;
  };

  for (const auto& [pi, tj] : assignment.matches) {
    ObjectTrack& t = tracks_[static_cast<std::size_t>(tj)];
    const ObjectInstance& obj = parsed[static_cast<std::size_t>(pi)];
    const int gap = std::max(1, frame_index - t.last_seen_frame);
    const Vec2 observed_from = t.last_instance.center_of_mass;
    const Vec2 d = obj.center_of_mass - observed_from;
    absorb(t, obj);
    t.velocity_history.push_back({d.x / gap, d.y / gap});
    while (static_cast<int>(t.velocity_history.size()) > std::max(1, cfg_.history))
      t.velocity_history.pop_front();
    t.age += 1;
    ids[static_cast<std::size_t>(pi)] = t.track_id;
  }

  std::vector<bool> drop(tracks_.size(), false);
  for (int tj : assignment.unmatched_tracks) {
    ObjectTrack& t = tracks_[static_cast<std::size_t>(tj)];
    t.missed += 1;
    t.age += 1;
    t.position = t.predicted_position();
    if (t.missed > cfg_.max_missed) drop[static_cast<std::size_t>(tj)] = true;
  }
  std::vector<ObjectTrack> kept;
  kept.reserve(tracks_.size() + assignment.unmatched_parsed.size());
  for (std::size_t j = 0; j < tracks_.size(); ++j)
    if (!drop[j]) kept.push_back(std::move(tracks_[j]));

  for (int pi : assignment.unmatched_parsed) {
    ObjectTrack t;
    t.track_id = next_id_++;
    absorb(t, parsed[static_cast<std::size_t>(pi)]);
    kept.push_back(std::move(t));
    ids[static_cast<std::size_t>(pi)] = kept.back().track_id;
  }
  tracks_ = std::move(kept);
  return ids;
}

}  // namespace vpcd
