#include "vpcd/cli/commands.hpp"

#include "parallel.hpp"
#include "vpcd/checkpoint.hpp"
#include "vpcd/cli/plot.hpp"
#include "vpcd/image_io.hpp"
#include "vpcd/metrics.hpp"
#include "vpcd/motion.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <span>
#include <sstream>

#ifndef VPCD_VERSION
#define VPCD_VERSION "unknown"
#endif

namespace vpcd::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kTestFirstIndex = 1000000;

fs::path run_dir(const RunConfig& cfg) { return fs::path(cfg.out); }
fs::path decomp_ckpt(const RunConfig& cfg) { return run_dir(cfg) / "decomp.ckpt"; }
fs::path motion_ckpt(const RunConfig& cfg) { return run_dir(cfg) / "motion.ckpt"; }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

void write_manifest(const RunConfig& cfg, const std::string& command, const std::vector<fs::path>& inputs) {
  json in = json::object();
  for (const auto& p : inputs)
    if (fs::exists(p)) in[p.string()] = io::file_checksum(p);
  const json m = {{"command", command},
                  {"version", VPCD_VERSION},
                  {"seed", cfg.seed},
                  {"variant", to_string(cfg.variant)},
                  {"config", cfg.to_ini()},
                  {"inputs", in}};
  write_text(run_dir(cfg) / ("manifest_" + command + ".json"), m.dump(2) + "\n");
}

std::vector<fs::path> split_sequences(const RunConfig& cfg, const std::string& split) {
  const fs::path dir = dataset_dir(cfg) / split;
  if (!fs::exists(dir / "dataset.json"))
    throw ValidationError("no dataset at " + dir.string() + " (run 'vpcd gen' first)");
  auto seqs = datagen::list_sequences(dir);
  if (split == "test" && cfg.eval.max_sequences >= 0 && static_cast<int>(seqs.size()) > cfg.eval.max_sequences)
    seqs.resize(static_cast<std::size_t>(cfg.eval.max_sequences));
  return seqs;
}

PrototypeSet load_prototypes(const RunConfig& cfg) {
  if (!fs::exists(decomp_ckpt(cfg)))
    throw ValidationError("missing checkpoint " + decomp_ckpt(cfg).string() + " (run 'vpcd train decomp' first)");
  return checkpoint::get_prototypes(checkpoint::load(decomp_ckpt(cfg)));
}

std::vector<int> row_major(const Eigen::ArrayXXi& labels) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(labels.size()));
  for (Eigen::Index r = 0; r < labels.rows(); ++r)
    for (Eigen::Index c = 0; c < labels.cols(); ++c) out.push_back(labels(r, c));
  return out;
}

// Label ids stored losslessly in the red channel of an 8-bit PNG.
void write_label_strip(const fs::path& path, const std::vector<std::vector<int>>& labels, int h, int w) {
  RgbImage img(h, w * static_cast<int>(labels.size()));
  for (std::size_t k = 0; k < labels.size(); ++k)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        const int id = std::clamp(labels[k][static_cast<std::size_t>(r * w + c)], 0, 255);
        img.at(0, r, static_cast<int>(k) * w + c) = id / 255.0;
      }
  io::write_png(path, img);
}

std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

void write_loss_curve(const fs::path& path, const std::vector<learning::LossRecord>& curve,
                      const std::vector<std::string>& names, bool append) {
  const bool header = !append || !fs::exists(path);
  std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  if (header) {
    f << "step,loss";
    for (const auto& n : names) f << ',' << n;
    f << '\n';
  }
  for (const auto& r : curve) {
    f << r.step << ',' << csv_number(r.loss);
    for (double c : r.components) f << ',' << csv_number(c);
    f << '\n';
  }
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream f(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!cells.empty()) rows.push_back(std::move(cells));
  }
  return rows;
}

void train_decomp(const RunConfig& cfg, bool resume, std::ostream& log) {
  const auto seqs = split_sequences(cfg, "train");
  if (seqs.empty()) throw ValidationError("training split is empty");
  learning::FrameBank bank;
  for (const auto& s : seqs)
    for (const auto& f : datagen::load_sequence(s).frames) bank.add(f);
  log << "decomp: " << bank.size() << " frames from " << seqs.size() << " sequences\n";

  std::optional<learning::DecompTrainState> start;
  if (resume) {
    if (!fs::exists(decomp_ckpt(cfg))) throw ValidationError("nothing to resume: " + decomp_ckpt(cfg).string());
    const auto ck = checkpoint::load(decomp_ckpt(cfg));
    learning::DecompTrainState st;
    st.prototypes = checkpoint::get_prototypes(ck);
    st.step = std::stoi(ck.meta.at("step"));
    if (const auto* m = ck.find("adam/m")) {
      st.adam_m = checkpoint::to_vector(*m);
      st.adam_v = checkpoint::to_vector(ck.at("adam/v"));
      st.adam_steps = std::stol(ck.meta.at("adam_steps"));
    }
    log << "decomp: resuming at step " << st.step << "\n";
    start = std::move(st);
  }
  const auto res = learning::train_decomposition(bank, cfg.decomp, start ? &*start : nullptr,
                                                 [&](int step, double loss) {
                                                   if (step % 50 == 0) log << "  step " << step << " loss " << loss << "\n";
                                                 });
  checkpoint::Checkpoint ck;
  ck.meta["kind"] = "decomp";
  ck.meta["step"] = std::to_string(res.state.step);
  ck.meta["seed"] = std::to_string(cfg.seed);
  ck.meta["adam_steps"] = std::to_string(res.state.adam_steps);
  checkpoint::put_prototypes(ck, res.state.prototypes);
  ck.put("adam/m", res.state.adam_m);
  ck.put("adam/v", res.state.adam_v);
  checkpoint::save(ck, decomp_ckpt(cfg));
  write_loss_curve(run_dir(cfg) / "decomp_loss.csv", res.curve, {"reconstruction", "sparsity", "smoothness", "objects"},
                   resume);
  log << "decomp: " << res.reseeds << " reseeds, checkpoint " << decomp_ckpt(cfg).string() << " ("
      << ck.parameter_count() << " parameters)\n";
  if (res.diverged) throw std::runtime_error("decomposition diverged at step " + std::to_string(res.state.step + 1) +
                                             "; last good checkpoint saved");
}

void train_motion(const RunConfig& cfg, std::ostream& log) {
  if (!fs::exists(decomp_ckpt(cfg)))
    throw ValidationError("motion training requires a decomposition checkpoint (run 'vpcd train decomp' first)");
  const std::string before = io::file_checksum(decomp_ckpt(cfg));
  const PrototypeSet protos = load_prototypes(cfg);
  const auto seqs = split_sequences(cfg, "train");
  if (seqs.empty()) throw ValidationError("training split is empty");
  // Parsing dominates; sequences are parsed in parallel and merged in order.
  std::vector<learning::MotionDataset> parts(seqs.size());
  parallel_for(static_cast<int>(seqs.size()), cfg.jobs, [&](int i) {
    const auto frames = datagen::load_sequence(seqs[static_cast<std::size_t>(i)]).frames;
    parts[static_cast<std::size_t>(i)] = learning::collect_motion_data(
        1, [&](int) { return frames; }, protos, cfg.motion, cfg.parse, cfg.tracker);
  });
  learning::MotionDataset data;
  for (auto& p : parts) {
    const int offset = static_cast<int>(data.objects.size());
    const int woffset = static_cast<int>(data.windows.size());
    for (auto& o : p.objects) {
      o.window += woffset;
      data.objects.push_back(std::move(o));
    }
    for (auto& w : p.windows) {
      for (int& idx : w.objects) idx += offset;
      data.windows.push_back(std::move(w));
    }
    data.sequences += p.sequences;
    data.skipped_sequences += p.skipped_sequences;
    if (p.height > 0) {
      data.height = p.height;
      data.width = p.width;
    }
  }
  log << "motion: " << data.objects.size() << " object windows from " << data.sequences << " sequences ("
      << data.skipped_sequences << " skipped)\n";
  const auto res = learning::fit_motion(data, cfg.motion, [&](int step, double loss) {
    if (step % 500 == 0) log << "  step " << step << " loss " << loss << "\n";
  });
  checkpoint::Checkpoint ck;
  ck.meta["kind"] = "motion";
  ck.meta["step"] = std::to_string(cfg.motion.steps);
  ck.meta["seed"] = std::to_string(cfg.seed);
  ck.meta["decomp_checksum"] = before;
  checkpoint::put_prototypes(ck, protos);
  checkpoint::put_net(ck, res.net);
  checkpoint::save(ck, motion_ckpt(cfg));
  write_loss_curve(run_dir(cfg) / "motion_loss.csv", res.curve, {}, false);
  if (io::file_checksum(decomp_ckpt(cfg)) != before)
    throw std::runtime_error("decomposition checkpoint changed during motion training");
  log << "motion: checkpoint " << motion_ckpt(cfg).string() << " (" << ck.parameter_count()
      << " learnable parameters)\n";
}

struct SequenceTracking {
  metrics::TrackingReport report;
  std::string name;
};

}  // namespace

void cmd_gen(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = dataset_dir(cfg);
  datagen::generate(cfg.data.spec, cfg.data.train_count, dir / "train", 0, cfg.jobs);
  datagen::generate(cfg.data.spec, cfg.data.test_count, dir / "test", kTestFirstIndex, cfg.jobs);
  write_manifest(cfg, "gen", {dir / "train" / "dataset.json", dir / "test" / "dataset.json"});
  log << "gen: " << cfg.data.train_count << " train + " << cfg.data.test_count << " test sequences in "
      << dir.string() << "\n";
}

void cmd_train(const RunConfig& cfg, Stage stage, bool resume, std::ostream& log) {
  fs::create_directories(run_dir(cfg));
  if (stage == Stage::Decomp) {
    train_decomp(cfg, resume, log);
    write_manifest(cfg, "train_decomp", {dataset_dir(cfg) / "train" / "dataset.json", decomp_ckpt(cfg)});
  } else {
    if (resume) throw ValidationError("motion training does not support --resume");
    train_motion(cfg, log);
    write_manifest(cfg, "train_motion",
                   {dataset_dir(cfg) / "train" / "dataset.json", decomp_ckpt(cfg), motion_ckpt(cfg)});
  }
}

void cmd_track(const RunConfig& cfg, std::ostream& log) {
  const PrototypeSet protos = cfg.eval.gt_passthrough ? PrototypeSet{} : load_prototypes(cfg);
  const auto seqs = split_sequences(cfg, "test");
  const datagen::SceneSpec spec = datagen::load_dataset_spec(dataset_dir(cfg) / "test");
  const datagen::ShapeBank bank(spec);
  const fs::path out = run_dir(cfg) / "track";
  fs::create_directories(out / "labels");
  metrics::MotOptions mot{cfg.eval.match_radius, cfg.eval.min_visibility};

  std::vector<SequenceTracking> results(seqs.size());
  parallel_for(static_cast<int>(seqs.size()), cfg.jobs, [&](int i) {
    const auto& path = seqs[static_cast<std::size_t>(i)];
    const datagen::Sequence seq = datagen::load_sequence(path);
    std::vector<metrics::TrackPoint> gt, pred;
    for (std::size_t t = 0; t < seq.truth.size(); ++t)
      for (const auto& o : seq.truth[t].objects) gt.push_back({static_cast<int>(t), o.id, o.center, o.visibility});
    std::ostringstream file;
    file << "# frame track_id x y prototype_id r g b\n" << std::setprecision(10);
    std::vector<std::vector<int>> labels;
    if (cfg.eval.gt_passthrough) {
      for (std::size_t t = 0; t < seq.truth.size(); ++t)
        for (const auto& o : seq.truth[t].objects) {
          pred.push_back({static_cast<int>(t), o.id, o.center});
          file << t << ' ' << o.id << ' ' << o.center.x << ' ' << o.center.y << ' ' << o.shape << ' ' << o.color[0]
               << ' ' << o.color[1] << ' ' << o.color[2] << '\n';
        }
    } else {
      const VideoParse vp = parse_video(seq.frames, protos, cfg.parse, cfg.tracker);
      for (const auto& r : vp.records) {
        pred.push_back({r.frame, r.track_id, r.position});
        file << r.frame << ' ' << r.track_id << ' ' << r.position.x << ' ' << r.position.y << ' ' << r.prototype_id
             << ' ' << r.color[0] << ' ' << r.color[1] << ' ' << r.color[2] << '\n';
      }
      if (i < cfg.eval.strips) {
        for (const auto& f : vp.frames) {
          std::vector<int> lab = metrics::instance_labels(f.objects, spec.height, spec.width);
          for (int& v : lab)
            if (v > 0) v = f.ids[static_cast<std::size_t>(v - 1)];
          labels.push_back(std::move(lab));
        }
      }
    }
    if (i < cfg.eval.strips && cfg.eval.gt_passthrough)
      for (const auto& ft : seq.truth) labels.push_back(row_major(datagen::label_map(ft, bank, spec)));
    const std::string name = path.filename().string();
    write_text(out / (name + ".txt"), file.str());
    if (!labels.empty()) write_label_strip(out / "labels" / (name + ".png"), labels, spec.height, spec.width);
    results[static_cast<std::size_t>(i)] = {metrics::mot_eval(pred, gt, mot), name};
  });

  std::vector<metrics::TrackingReport> reports;
  json per = json::array();
  const auto to_json = [](const metrics::TrackingReport& r) {
    json j = {{"motp", r.motp},
              {"mostly_tracked", r.mostly_tracked},
              {"id_switches", r.id_switches},
              {"false_positives", r.false_positives},
              {"false_negatives", r.false_negatives},
              {"matches", r.matches},
              {"ground_truth", r.ground_truth},
              {"frames", r.frames}};
    j["mota"] = r.mota ? json(*r.mota) : json(nullptr);
    return j;
  };
  for (const auto& r : results) {
    reports.push_back(r.report);
    json j = to_json(r.report);
    j["sequence"] = r.name;
    per.push_back(j);
  }
  const auto total = metrics::combine(reports);
  const json report = {{"variant", to_string(cfg.variant)},
                       {"match_radius", cfg.eval.match_radius},
                       {"gt_passthrough", cfg.eval.gt_passthrough},
                       {"aggregate", to_json(total)},
                       {"sequences", per}};
  write_text(out / "report.json", report.dump(2) + "\n");
  write_manifest(cfg, "track", {dataset_dir(cfg) / "test" / "dataset.json", decomp_ckpt(cfg)});
  log << "track (" << to_string(cfg.variant) << "): " << seqs.size() << " sequences, MOTA "
      << (total.mota ? csv_number(*total.mota) : std::string("n/a")) << ", MOTP " << total.motp << ", IDSW "
      << total.id_switches << ", FP " << total.false_positives << ", FN " << total.false_negatives << "\n";
}

void cmd_predict(const RunConfig& cfg, std::ostream& log) {
  PrototypeSet protos;
  std::optional<VelocityNet> net;
  if (cfg.eval.netless) {
    protos = load_prototypes(cfg);
  } else {
    if (!fs::exists(motion_ckpt(cfg)))
      throw ValidationError("missing checkpoint " + motion_ckpt(cfg).string() +
                            " (run 'vpcd train motion' or pass --netless)");
    const auto ck = checkpoint::load(motion_ckpt(cfg));
    protos = checkpoint::get_prototypes(ck);
    net = checkpoint::get_net(ck);
  }
  const auto seqs = split_sequences(cfg, "test");
  const datagen::SceneSpec spec = datagen::load_dataset_spec(dataset_dir(cfg) / "test");
  const datagen::ShapeBank bank(spec);
  const fs::path out = run_dir(cfg) / "predict";
  fs::create_directories(out / "strips");
  fs::create_directories(out / "trajectories");

  motion::RolloutConfig rc;
  rc.seeds = cfg.eval.seeds;
  rc.horizon = cfg.eval.horizon;
  rc.use_net = !cfg.eval.netless;
  rc.closed_loop = cfg.eval.closed_loop;
  rc.subpixel_render = cfg.eval.subpixel_render;
  rc.min_confidence = cfg.motion.min_confidence;
  rc.parse = cfg.parse;
  rc.tracker = cfg.tracker;
  const int horizon = cfg.eval.horizon;

  struct PerSequence {
    std::vector<double> ssim, mse, psnr, ari;
    std::vector<metrics::PositionSample> samples;
    bool failed = false;
    std::string error;
  };
  std::vector<PerSequence> results(seqs.size());
  parallel_for(static_cast<int>(seqs.size()), cfg.jobs, [&](int i) {
    auto& res = results[static_cast<std::size_t>(i)];
    const auto& path = seqs[static_cast<std::size_t>(i)];
    const datagen::Sequence seq = datagen::load_sequence(path);
    motion::Rollout ro;
    try {
      ro = motion::rollout(std::span<const RgbImage>(seq.frames).first(static_cast<std::size_t>(cfg.eval.seeds)), protos, net ? &*net : nullptr, rc);
    } catch (const std::runtime_error& e) {
      res.failed = true;
      res.error = e.what();
      return;
    }
    const int last = cfg.eval.seeds - 1;
    std::vector<Vec2> seed_pos, truth_pos;
    for (const auto& o : ro.seed_objects) seed_pos.push_back(o.position);
    const auto& truth_last = seq.truth[static_cast<std::size_t>(last)].objects;
    for (const auto& o : truth_last) truth_pos.push_back(o.center);
    const auto match = metrics::match_positions(seed_pos, truth_pos, cfg.eval.match_radius);
    std::vector<metrics::TrajectoryRecord> traj;
    for (const auto& o : ro.seed_objects)
      traj.push_back({o.track_id, last, o.position, {o.velocity.vx, o.velocity.vy}});
    for (int k = 1; k <= horizon; ++k) {
      const auto t = static_cast<std::size_t>(last + k);
      const RgbImage& pred = ro.frames[static_cast<std::size_t>(k - 1)];
      res.ssim.push_back(metrics::ssim(pred, seq.frames[t]));
      res.mse.push_back(metrics::frame_mse(pred, seq.frames[t]));
      res.psnr.push_back(metrics::psnr(pred, seq.frames[t]));
      const auto& objs = ro.objects[static_cast<std::size_t>(k - 1)];
      std::vector<ObjectInstance> inst;
      for (const auto& o : objs) {
        inst.push_back(o.instance);
        traj.push_back({o.track_id, static_cast<int>(t), o.position, {o.velocity.vx, o.velocity.vy}});
      }
      res.ari.push_back(metrics::ari(metrics::instance_labels(inst, spec.height, spec.width),
                                     row_major(datagen::label_map(seq.truth[t], bank, spec))));
      for (std::size_t j = 0; j < truth_last.size(); ++j) {
        std::optional<Vec2> truth;
        for (const auto& o : seq.truth[t].objects)
          if (o.id == truth_last[j].id) truth = o.center;
        if (!truth) continue;  // left the frame
        std::optional<Vec2> p;
        if (match[j] >= 0) p = objs[static_cast<std::size_t>(match[j])].position;
        res.samples.push_back({k, p, *truth});
      }
    }
    const std::string name = path.filename().string();
    metrics::write_trajectories(out / "trajectories" / (name + ".csv"), traj);
    if (i < cfg.eval.strips) {
      std::vector<RgbImage> truth_row{seq.frames[static_cast<std::size_t>(last)]};
      std::vector<RgbImage> pred_row{ro.seed_reconstruction};
      for (int k = 1; k <= horizon; ++k) {
        truth_row.push_back(seq.frames[static_cast<std::size_t>(last + k)]);
        pred_row.push_back(ro.frames[static_cast<std::size_t>(k - 1)]);
      }
      io::write_png(out / "strips" / (name + ".png"), plot::vstack({plot::hstack(truth_row), plot::hstack(pred_row)}));
    }
  });

  std::vector<metrics::PositionSample> samples;
  std::vector<double> ssim(static_cast<std::size_t>(horizon), 0.0), mse = ssim, psnr = ssim, ari = ssim;
  int ok = 0;
  for (const auto& r : results) {
    if (r.failed) continue;
    ++ok;
    for (int k = 0; k < horizon; ++k) {
      const auto ku = static_cast<std::size_t>(k);
      ssim[ku] += r.ssim[ku];
      mse[ku] += r.mse[ku];
      psnr[ku] += std::min(r.psnr[ku], 100.0);
      ari[ku] += r.ari[ku];
    }
    samples.insert(samples.end(), r.samples.begin(), r.samples.end());
  }
  const auto curve = metrics::position_mse(samples, horizon, cfg.eval.penalty_distance);
  std::ostringstream csv;
  csv << std::setprecision(10) << "step,ssim,mse,psnr,ari,position_mse,position_std,unmatched\n";
  double mean_ssim = 0.0;
  for (int k = 0; k < horizon; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const double n = std::max(ok, 1);
    csv << k + 1 << ',' << ssim[ku] / n << ',' << mse[ku] / n << ',' << psnr[ku] / n << ',' << ari[ku] / n << ','
        << curve.mean[ku] << ',' << curve.stddev[ku] << ',' << curve.unmatched[ku] << '\n';
    mean_ssim += ssim[ku] / n;
  }
  write_text(out / "metrics_per_step.csv", csv.str());
  json failures = json::array();
  for (std::size_t i = 0; i < results.size(); ++i)
    if (results[i].failed) failures.push_back({{"sequence", seqs[i].filename().string()}, {"error", results[i].error}});
  const json summary = {{"sequences", seqs.size()},
                        {"failed", failures},
                        {"seeds", cfg.eval.seeds},
                        {"horizon", horizon},
                        {"netless", cfg.eval.netless},
                        {"mean_ssim", horizon > 0 ? mean_ssim / horizon : 1.0},
                        {"final_position_mse", horizon > 0 ? curve.mean.back() : 0.0},
                        {"note", "perceptual metrics are replaced by MSE, PSNR and SSIM"}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_manifest(cfg, "predict",
                 {dataset_dir(cfg) / "test" / "dataset.json", cfg.eval.netless ? decomp_ckpt(cfg) : motion_ckpt(cfg)});
  log << "predict: " << ok << "/" << seqs.size() << " sequences, mean SSIM "
      << (horizon > 0 ? mean_ssim / horizon : 1.0);
  if (horizon > 0) log << ", position MSE at step " << horizon << " " << curve.mean.back();
  log << "\n";
}

int cmd_plot(const fs::path& dir, std::ostream& log) {
  if (!fs::is_directory(dir)) throw ValidationError("not a run directory: " + dir.string());
  const fs::path out = dir / "plots";
  int written = 0;
  const auto save = [&](const std::string& name, const RgbImage& img) {
    fs::create_directories(out);
    io::write_png(out / name, img);
    ++written;
  };
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (e.path().parent_path() == out) continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    const std::string rel = fs::relative(p, dir).replace_extension().string();
    std::string stem = rel;
    std::replace(stem.begin(), stem.end(), '/', '_');
    if (p.extension() == ".csv" && p.parent_path().filename() == "trajectories") {
      const auto rows = read_csv(p);
      std::map<int, std::vector<Vec2>> paths;
      for (std::size_t r = 1; r < rows.size(); ++r)
        paths[std::stoi(rows[r][0])].push_back({std::stod(rows[r][2]), std::stod(rows[r][3])});
      std::vector<std::vector<Vec2>> list;
      for (auto& [_, v] : paths) list.push_back(std::move(v));
      save(stem + ".png", plot::trajectory_plot(list, 64, 64));
    } else if (p.extension() == ".csv") {
      const auto rows = read_csv(p);
      if (rows.size() < 2) continue;
      for (std::size_t c = 1; c < rows[0].size(); ++c) {
        plot::Series s;
        for (std::size_t r = 1; r < rows.size(); ++r) {
          if (c >= rows[r].size()) continue;
          s.x.push_back(std::stod(rows[r][0]));
          s.y.push_back(std::stod(rows[r][c]));
        }
        save(stem + "_" + rows[0][c] + ".png", plot::line_plot({s}));
      }
    } else if (p.extension() == ".ckpt") {
      const auto ck = checkpoint::load(p);
      if (ck.meta.contains("prototype_ids")) save(stem + "_prototypes.png", plot::prototype_sheet(checkpoint::get_prototypes(ck)));
    } else if (p.extension() == ".png" && p.parent_path().filename() == "labels") {
      const RgbImage img = io::read_png(p);
      const int h = img.height();
      const int n = img.width() / h;
      std::vector<std::vector<int>> labels(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k)
        for (int r = 0; r < h; ++r)
          for (int c = 0; c < h; ++c)
            labels[static_cast<std::size_t>(k)].push_back(io::to_byte(img.at(0, r, k * h + c)));
      save("segmentation_" + p.stem().string() + ".png", plot::label_strip(labels, h, h));
    }
  }
  if (written == 0) {
    log << "nothing to plot in " << dir.string() << "\n";
  } else {
    log << "plot: " << written << " images in " << out.string() << "\n";
  }
  return written;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"vpcd: unsupervised video parsing, tracking and prediction"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides ov;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--seed", ov.seed, "master seed");
    sub->add_option("--out", ov.out, "run directory");
    sub->add_option("--variant", ov.variant, "frame-independent | aligned | state-only | two-stage | full");
    sub->add_option("--jobs", ov.jobs, "worker threads");
  };
  auto* gen = app.add_subcommand("gen", "generate the train and test datasets");
  add_common(gen);
  auto* train = app.add_subcommand("train", "train a stage: decomp or motion");
  add_common(train);
  std::string stage;
  bool resume = false;
  train->add_option("stage", stage, "decomp | motion")->required()->check(CLI::IsMember({"decomp", "motion"}));
  train->add_flag("--resume", resume, "continue from the stage checkpoint");
  auto* track = app.add_subcommand("track", "track the test split and score it");
  add_common(track);
  bool gt_passthrough = false;
  track->add_flag("--gt-passthrough", gt_passthrough, "score the ground truth itself");
  auto* predict = app.add_subcommand("predict", "roll out future frames on the test split");
  add_common(predict);
  predict->add_option("--horizon", ov.horizon, "predicted frames");
  predict->add_option("--seeds", ov.seeds, "seed frames");
  bool netless = false;
  predict->add_flag("--netless", netless, "raw phase-difference velocities");
  auto* plotc = app.add_subcommand("plot", "render curves and sheets of a run directory");
  std::string plot_dir;
  plotc->add_option("run_dir", plot_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }
  try {
    if (plotc->parsed()) {
      cmd_plot(plot_dir, out);
      return kExitOk;
    }
    if (netless) ov.netless = true;
    RunConfig cfg = load_config(config_path, ov);
    if (gt_passthrough) cfg.eval.gt_passthrough = true;
    if (gen->parsed()) cmd_gen(cfg, out);
    if (train->parsed()) cmd_train(cfg, stage == "decomp" ? Stage::Decomp : Stage::Motion, resume, out);
    if (track->parsed()) cmd_track(cfg, out);
    if (predict->parsed()) cmd_predict(cfg, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace vpcd::cli
