/* Copyright 2026 The GeoBEV Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "geobev/config.hpp"
#include "geobev/error.hpp"
#include "geobev/metrics.hpp"
#include "geobev/pipeline.hpp"

namespace geobev {

namespace fs = std::filesystem;

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.dir = dir;
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw_io("dataset directory not found: " + dir);

  KeyValueFile meta = KeyValueFile::parse_file((root / "meta.txt").string());
  ds.meta.timesteps = meta.take_int("timesteps", 0);
  ds.meta.window = meta.take_int("window", 0);
  ds.meta.cameras = meta.take_int("cameras", 0);
  ds.meta.img_h = meta.take_int("img_h", 0);
  ds.meta.img_w = meta.take_int("img_w", 0);
  ds.meta.dt = meta.take_real("dt", 0.5);
  const double gx = meta.take_real("grid_extent_x", 0.0);
  const double gy = meta.take_real("grid_extent_y", 0.0);
  const double gr = meta.take_real("grid_resolution", 0.0);
  meta.finish();
  if (ds.meta.timesteps < 1 || ds.meta.window < 1 || ds.meta.cameras < 1 ||
      ds.meta.img_h < 8 || ds.meta.img_w < 8) {
    throw_config("dataset meta.txt has invalid geometry values");
  }
  ds.meta.grid = BevGridSpec::create(gx, gy, gr);

  ds.rig = load_rig((root / "rig.txt").string());
  if (static_cast<int>(ds.rig.size()) != ds.meta.cameras) {
    throw_config("dataset rig.txt camera count disagrees with meta.txt");
  }

  std::ifstream manifest(root / "manifest.txt");
  if (!manifest) throw_io("cannot open manifest: " + (root / "manifest.txt").string());
  std::string line;
  std::set<std::string> scenes;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t colon = line.find(':');
    if (colon == std::string::npos) {
      throw_config("manifest line " + std::to_string(line_no) +
                   ": expected '<scene>:<t>'");
    }
    SampleRef ref;
    ref.scene = line.substr(0, colon);
    try {
      ref.present_t = std::stoi(line.substr(colon + 1));
    } catch (...) {
      throw_config("manifest line " + std::to_string(line_no) +
                   ": bad frame index");
    }
    if (ref.present_t < 0 || ref.present_t >= ds.meta.timesteps) {
      throw_config("manifest line " + std::to_string(line_no) +
                   ": frame index out of range");
    }
    scenes.insert(ref.scene);
    ds.samples.push_back(std::move(ref));
  }
  ds.scene_names.assign(scenes.begin(), scenes.end());
  return ds;
}

Sample load_sample(const Dataset& ds, const SampleRef& ref, int temporal_field) {
  if (temporal_field < 1) throw_config("temporal_field must be >= 1");
  if (ref.present_t - temporal_field + 1 < 0) {
    throw_config("sample " + ref.scene + ":" + std::to_string(ref.present_t) +
                 " lacks history for temporal_field " +
                 std::to_string(temporal_field) +
                 " (regenerate the dataset with a larger window)");
  }
  const fs::path scene_dir = fs::path(ds.dir) / ref.scene;
  Sample s;
  s.frames.resize(static_cast<std::size_t>(temporal_field));
  for (int i = 0; i < temporal_field; ++i) {
    const int t = ref.present_t - temporal_field + 1 + i;
    auto& row = s.frames[static_cast<std::size_t>(i)];
    row.reserve(static_cast<std::size_t>(ds.meta.cameras));
    for (int c = 0; c < ds.meta.cameras; ++c) {
      const fs::path p = scene_dir / ("img_" + std::to_string(t) + "_" +
                                      std::to_string(c) + ".gtns");
      row.push_back(load_gtns(p.string()));
    }
  }
  s.label = load_gtns(
      (scene_dir / ("label_" + std::to_string(ref.present_t) + ".gtns")).string());
  s.instances = load_gtns(
      (scene_dir / ("inst_" + std::to_string(ref.present_t) + ".gtns")).string());
  if (s.label.ndim() != 2 || s.label.dim(0) != ds.meta.grid.rows ||
      s.label.dim(1) != ds.meta.grid.cols) {
    throw_config("label grid shape disagrees with dataset meta");
  }
  return s;
}

SampleSplit split_samples(const Dataset& ds, double val_split) {
  SampleSplit split;
  const std::size_t n_scenes = ds.scene_names.size();
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(val_split * static_cast<double>(n_scenes)));
  if (n_scenes > 0 && n_val >= n_scenes && val_split > 0.0) {
    throw_config("val_split leaves no training scenes");
  }
  std::set<std::string> val_scenes(ds.scene_names.end() - static_cast<long>(n_val),
                                   ds.scene_names.end());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (val_scenes.count(ds.samples[i].scene)) {
      split.val.push_back(i);
    } else {
      split.train.push_back(i);
    }
  }
  return split;
}

namespace {

struct EvalAccumulator {
  // per-class intersection/union over all cells of all samples
  std::vector<long> inter, uni;
  PanopticCounts pq_counts;

  explicit EvalAccumulator(int num_classes)
      : inter(static_cast<std::size_t>(num_classes), 0),
        uni(static_cast<std::size_t>(num_classes), 0) {}

  void add(const Tensor& logits, const Tensor& label, const Tensor& instances) {
    const int k = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
    Tensor pred_mask({h, w}, 0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int best = 0;
        double best_v = logits.at(0, y, x);
        for (int c = 1; c < k; ++c) {
          if (logits.at(c, y, x) > best_v) {
            best_v = logits.at(c, y, x);
            best = c;
          }
        }
        const int gt = static_cast<int>(label.at(y, x));
        for (int c = 0; c < k; ++c) {
          const bool p = best == c, g = gt == c;
          inter[static_cast<std::size_t>(c)] += (p && g) ? 1 : 0;
          uni[static_cast<std::size_t>(c)] += (p || g) ? 1 : 0;
        }
        if (best == 1) pred_mask.at(y, x) = 1.0;
      }
    }
    // Instances for the foreground class come from connected components of
    // the predicted mask; ground-truth ids are rasterized per vehicle.
    const Tensor pred_inst = connected_components(pred_mask);
    const PanopticCounts c = panoptic_match(pred_inst, instances);
    pq_counts.tp += c.tp;
    pq_counts.fp += c.fp;
    pq_counts.fn += c.fn;
    pq_counts.sum_matched_iou += c.sum_matched_iou;
  }

  double class_iou(int c) const {
    if (uni[static_cast<std::size_t>(c)] == 0) return 1.0;
    return static_cast<double>(inter[static_cast<std::size_t>(c)]) /
           static_cast<double>(uni[static_cast<std::size_t>(c)]);
  }
};

struct InnerEval {
  std::vector<double> iou_per_class;
  double pq = 0.0, sq = 0.0, rq = 0.0;
};

InnerEval eval_on_samples(const Dataset& ds, const std::vector<std::size_t>& idx,
                          const ModelParams& params, const ModelGeometry& geom,
                          const TrainConfig& cfg) {
  EvalAccumulator acc(cfg.num_classes);
  for (std::size_t i : idx) {
    const Sample s = load_sample(ds, ds.samples[i], cfg.temporal_field);
    const Tensor logits = model_forward(s, params, geom, cfg, nullptr);
    acc.add(logits, s.label, s.instances);
  }
  InnerEval out;
  for (int c = 0; c < cfg.num_classes; ++c) {
    out.iou_per_class.push_back(acc.class_iou(c));
  }
  const PanopticResult pr = panoptic_from_counts(acc.pq_counts);
  out.pq = pr.pq;
  out.sq = pr.sq;
  out.rq = pr.rq;
  return out;
}

std::string format_real(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const std::string& data_dir,
                  const std::string& out_dir) {
  cfg.validate();
  const Dataset ds = load_dataset(data_dir);
  if (ds.meta.window < cfg.temporal_field) {
    throw_config("dataset window " + std::to_string(ds.meta.window) +
                 " is shorter than temporal_field " +
                 std::to_string(cfg.temporal_field));
  }
  const SampleSplit split = split_samples(ds, cfg.val_split);
  if (split.train.empty()) throw_config("no training samples in " + data_dir);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) {
    throw_io("cannot create output directory: " + out_dir);
  }

  ModelParams params = init_model(cfg, ds.meta);
  const ModelGeometry geom = build_geometry(cfg, ds.meta, ds.rig);
  AdamState adam = init_adam(params);

  TrainResult result;
  result.checkpoint_path = (fs::path(out_dir) / "checkpoint.gcgr").string();
  result.metrics_csv_path = (fs::path(out_dir) / "metrics.csv").string();

  // With a validation split the checkpoint holds the best-val-IoU epoch
  // (ties keep the earlier epoch); otherwise the final parameters.
  ModelParams best_params = params;
  double best_val = -1.0;

  std::ofstream csv(result.metrics_csv_path, std::ios::trunc);
  if (!csv) throw_io("cannot write metrics csv: " + result.metrics_csv_path);
  csv << "epoch,step,loss,val_iou\n";

  const long batches_per_epoch =
      (static_cast<long>(split.train.size()) + cfg.batch_size - 1) /
      cfg.batch_size;
  const long budget = cfg.max_steps > 0
                          ? cfg.max_steps
                          : static_cast<long>(cfg.epochs) * batches_per_epoch;
  long step = 0;
  int epoch = 0;
  bool stop = budget == 0;
  while (!stop) {
    ++epoch;
    double epoch_loss = 0.0;
    long epoch_steps = 0;
    std::size_t cursor = 0;
    while (cursor < split.train.size()) {
      // gradient averaged over the batch; one Adam step per batch
      const std::size_t batch_end = std::min(
          split.train.size(), cursor + static_cast<std::size_t>(cfg.batch_size));
      ModelParams grads;
      double batch_loss = 0.0;
      std::size_t batch_n = 0;
      for (; cursor < batch_end; ++cursor, ++batch_n) {
        const Sample s =
            load_sample(ds, ds.samples[split.train[cursor]], cfg.temporal_field);
        ModelForwardCache cache;
        const Tensor logits = model_forward(s, params, geom, cfg, &cache);
        LossResult loss = cross_entropy_loss(logits, s.label);
        ModelParams g = model_backward(params, geom, cfg, cache, loss.grad_logits);
        batch_loss += loss.value;
        if (batch_n == 0) {
          grads = std::move(g);
        } else {
          std::vector<Tensor*> into;
          grads.for_each_param(
              [&](const std::string&, Tensor& t) { into.push_back(&t); });
          std::size_t slot = 0;
          g.for_each_param([&](const std::string&, Tensor& t) {
            Tensor& acc = *into[slot++];
            for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += t[j];
          });
        }
      }
      if (batch_n > 1) {
        grads.for_each_param([&](const std::string&, Tensor& t) {
          for (std::size_t j = 0; j < t.size(); ++j) {
            t[j] /= static_cast<double>(batch_n);
          }
        });
      }
      adam_step(params, grads, cfg, adam);
      ++step;
      ++epoch_steps;
      const double mean_batch_loss = batch_loss / static_cast<double>(batch_n);
      epoch_loss += mean_batch_loss;
      result.step_losses.push_back(mean_batch_loss);
      if (step >= budget) {
        stop = true;
        break;
      }
    }
    double val_iou = std::numeric_limits<double>::quiet_NaN();
    if (!split.val.empty()) {
      val_iou = eval_on_samples(ds, split.val, params, geom, cfg)
                    .iou_per_class[1];
      if (val_iou > best_val) {
        best_val = val_iou;
        best_params = params;
      }
    }
    const double mean_loss =
        epoch_steps > 0 ? epoch_loss / static_cast<double>(epoch_steps) : 0.0;
    result.epoch_rows.push_back(
        {static_cast<double>(epoch), static_cast<double>(step), mean_loss,
         val_iou});
    csv << epoch << "," << step << "," << format_real(mean_loss) << ","
        << format_real(val_iou) << "\n";
    csv.flush();
    if (cfg.max_steps == 0 && epoch >= cfg.epochs) stop = true;
  }
  csv.close();
  save_checkpoint(split.val.empty() ? params : best_params,
                  result.checkpoint_path);
  return result;
}

EvalResult evaluate(const TrainConfig& cfg, const std::string& checkpoint_path,
                    const std::string& data_dir, const std::string& out_csv) {
  cfg.validate();
  const Dataset ds = load_dataset(data_dir);
  if (ds.meta.window < cfg.temporal_field) {
    throw_config("dataset window is shorter than temporal_field");
  }
  ModelParams params = init_model(cfg, ds.meta);
  load_checkpoint(params, checkpoint_path);
  const ModelGeometry geom = build_geometry(cfg, ds.meta, ds.rig);

  std::vector<std::size_t> all(ds.samples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const InnerEval inner = eval_on_samples(ds, all, params, geom, cfg);

  EvalResult out;
  out.iou_per_class = inner.iou_per_class;
  out.pq = inner.pq;
  out.sq = inner.sq;
  out.rq = inner.rq;
  std::ostringstream pretty;
  pretty << "samples evaluated: " << ds.samples.size() << "\n";
  pretty << "class        iou\n";
  for (std::size_t c = 0; c < out.iou_per_class.size(); ++c) {
    const char* name = c == 0 ? "background" : (c == 1 ? "vehicle" : "extra");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-12s %.4f\n", name, out.iou_per_class[c]);
    pretty << buf;
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "pq %.4f  sq %.4f  rq %.4f\n", out.pq, out.sq,
                out.rq);
  pretty << buf;
  out.pretty = pretty.str();

  if (!out_csv.empty()) {
    std::ofstream csv(out_csv, std::ios::trunc);
    if (!csv) throw_io("cannot write eval csv: " + out_csv);
    csv << "metric,value\n";
    for (std::size_t c = 0; c < out.iou_per_class.size(); ++c) {
      csv << "iou_class_" << c << "," << format_real(out.iou_per_class[c])
          << "\n";
    }
    csv << "pq," << format_real(out.pq) << "\n";
    csv << "sq," << format_real(out.sq) << "\n";
    csv << "rq," << format_real(out.rq) << "\n";
  }
  return out;
}

namespace {

int worker_thread_count() {
  const char* env = std::getenv("GEOBEV_THREADS");
  if (!env || !*env) return 1;
  const int n = std::atoi(env);
  return n < 1 ? 1 : n;
}

}  // namespace

std::vector<AblateRow> ablate(const TrainConfig& base,
                              const std::string& data_dir,
                              const std::string& out_csv) {
  base.validate();
  const Dataset probe = load_dataset(data_dir);
  const std::vector<int> t_values = {1, 3, 5, 7};
  if (probe.meta.window < 7) {
    throw_config("ablate needs a dataset exported with window >= 7");
  }

  struct Cell {
    TemporalModule module;
    int temporal_field;
  };
  std::vector<Cell> cells;
  cells.push_back({TemporalModule::kStatic, 1});
  for (TemporalModule m : {TemporalModule::kConv3d, TemporalModule::kConvGru,
                           TemporalModule::kGeoConvGru}) {
    for (int t : t_values) cells.push_back({m, t});
  }

  const fs::path out_path(out_csv);
  const fs::path work_root =
      out_path.parent_path().empty() ? fs::path(".") : out_path.parent_path();

  std::vector<AblateRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size() || failed.load()) break;
      try {
        TrainConfig cfg = base;
        cfg.module = cells[i].module;
        cfg.temporal_field = cells[i].temporal_field;
        const std::string cell_dir =
            (work_root / (std::string("ablate_") +
                          temporal_module_name(cfg.module) + "_T" +
                          std::to_string(cfg.temporal_field)))
                .string();
        const auto start = std::chrono::steady_clock::now();
        const TrainResult tr = train(cfg, data_dir, cell_dir);
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        // Evaluate the cell on the validation split.
        const Dataset ds = load_dataset(data_dir);
        const SampleSplit split = split_samples(ds, cfg.val_split);
        ModelParams params = init_model(cfg, ds.meta);
        load_checkpoint(params, tr.checkpoint_path);
        const ModelGeometry geom = build_geometry(cfg, ds.meta, ds.rig);
        const std::vector<std::size_t>& eval_idx =
            split.val.empty() ? split.train : split.val;
        const InnerEval ev = eval_on_samples(ds, eval_idx, params, geom, cfg);
        rows[i] = {temporal_module_name(cfg.module), cfg.temporal_field,
                   ev.iou_per_class[1], ev.pq, seconds};
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };

  const int n_threads =
      std::min<int>(worker_thread_count(), static_cast<int>(cells.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw_config("ablate failed: " + first_error);

  std::ofstream csv(out_csv, std::ios::trunc);
  if (!csv) throw_io("cannot write ablate csv: " + out_csv);
  csv << "module,T,iou,pq,train_seconds\n";
  for (const AblateRow& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%d,%.6f,%.6f,%.3f\n", r.module.c_str(),
                  r.temporal_field, r.iou, r.pq, r.train_seconds);
    csv << buf;
  }
  return rows;
}

}  // namespace geobev
