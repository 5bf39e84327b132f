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
// Command-line front end. Everything goes through the public C API in
// geobev.h; exit codes equal the geobev_status values (0 ok, 1 verification
// failure, 2 config, 3 I/O, 4 format).

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geobev.h"

namespace {

int fail(geobev_status status) {
  std::fprintf(stderr, "error: %s\n", geobev_last_error());
  return static_cast<int>(status);
}

bool parse_grid(const std::string& spec, double& ex, double& ey, double& res) {
  // "EXTXxEXTY:RES", e.g. "100x100:0.5"
  const std::size_t x = spec.find('x');
  const std::size_t colon = spec.find(':');
  if (x == std::string::npos || colon == std::string::npos || colon < x) {
    return false;
  }
  try {
    ex = std::stod(spec.substr(0, x));
    ey = std::stod(spec.substr(x + 1, colon - x - 1));
    res = std::stod(spec.substr(colon + 1));
  } catch (...) {
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geobev: BEV segmentation with a geographically masked ConvGRU"};
  app.require_subcommand(1);

  // gen-scenes
  auto* gen = app.add_subcommand("gen-scenes",
                                 "Generate synthetic scenes and export a "
                                 "dataset directory");
  std::uint64_t gen_seed = 7;
  std::uint32_t gen_count = 2;
  std::string gen_out, gen_config;
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  gen->add_option("--count", gen_count, "Number of scenes")
      ->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_option("--config", gen_config, "Generator config file");

  // gradcheck
  auto* gc = app.add_subcommand(
      "gradcheck", "Verify every analytic gradient against central "
                   "finite differences");
  std::string gc_config;
  bool gc_fault = false;
  gc->add_option("--config", gc_config, "Gradcheck config file (key: seed)");
  gc->add_flag("--inject-fault", gc_fault,
               "Flip one analytic gradient's sign to confirm the checker "
               "fails (self-test)");

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  std::string tr_config, tr_data, tr_out;
  tr->add_option("--config", tr_config, "Training config file");
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Output directory (checkpoint + metrics)")
      ->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_config, ev_out = "eval_metrics.csv";
  ev->add_option("--checkpoint", ev_ckpt, "GCGR checkpoint file")->required();
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--config", ev_config, "Model config file");
  ev->add_option("--out", ev_out, "Metrics CSV path")->capture_default_str();

  // mask
  auto* mk = app.add_subcommand(
      "mask", "Emit the camera-visibility mask for a rig (PGM + GTNS)");
  std::string mk_rig, mk_out, mk_grid = "100x100:0.5";
  double mk_eps = 0.1, mk_dmin = 1.0, mk_dmax = 40.0;
  int mk_bins = 16, mk_imgh = 96, mk_imgw = 160, mk_stride = 8;
  mk->add_option("--rig", mk_rig, "Rig file")->required();
  mk->add_option("--grid", mk_grid, "BEV grid as EXTXxEXTY:RES")
      ->capture_default_str();
  mk->add_option("--out", mk_out, "Output prefix (.pgm and .gtns)")->required();
  mk->add_option("--epsilon", mk_eps, "Weight of invalid cells")
      ->capture_default_str();
  mk->add_option("--depth-bins", mk_bins, "Depth bin count")
      ->capture_default_str();
  mk->add_option("--depth-min", mk_dmin, "Nearest depth bin (m)")
      ->capture_default_str();
  mk->add_option("--depth-max", mk_dmax, "Farthest depth bin (m)")
      ->capture_default_str();
  mk->add_option("--img-h", mk_imgh, "Camera image height (px)")
      ->capture_default_str();
  mk->add_option("--img-w", mk_imgw, "Camera image width (px)")
      ->capture_default_str();
  mk->add_option("--stride", mk_stride, "Feature stride")->capture_default_str();

  // ablate
  auto* ab = app.add_subcommand(
      "ablate",
      "Train the {module} x {T} grid and write module,T,iou,pq,train_seconds");
  std::string ab_config, ab_data, ab_out;
  ab->add_option("--config", ab_config, "Base training config");
  ab->add_option("--data", ab_data, "Dataset directory")->required();
  ab->add_option("--out", ab_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*gen) {
    std::uint32_t samples = 0;
    const geobev_status s = geobev_gen_scenes(
        gen_out.c_str(), gen_config.empty() ? nullptr : gen_config.c_str(),
        gen_seed, gen_count, &samples);
    if (s != GEOBEV_OK) return fail(s);
    std::printf("wrote %u samples to %s\n", samples, gen_out.c_str());
    return 0;
  }
  if (*gc) {
    std::vector<char> report(8192);
    const geobev_status s =
        geobev_gradcheck(gc_config.empty() ? nullptr : gc_config.c_str(),
                         gc_fault ? 1 : 0, report.data(), report.size());
    std::fputs(report.data(), stdout);
    if (s != GEOBEV_OK) return fail(s);
    return 0;
  }
  if (*tr) {
    const geobev_status s =
        geobev_train(tr_config.empty() ? nullptr : tr_config.c_str(),
                     tr_data.c_str(), tr_out.c_str());
    if (s != GEOBEV_OK) return fail(s);
    std::printf("checkpoint and metrics written to %s\n", tr_out.c_str());
    return 0;
  }
  if (*ev) {
    std::vector<char> report(8192);
    const geobev_status s = geobev_eval(
        ev_ckpt.c_str(), ev_data.c_str(),
        ev_config.empty() ? nullptr : ev_config.c_str(), ev_out.c_str(),
        report.data(), report.size());
    if (s != GEOBEV_OK) return fail(s);
    std::fputs(report.data(), stdout);
    std::printf("metrics csv: %s\n", ev_out.c_str());
    return 0;
  }
  if (*mk) {
    double ex = 0, ey = 0, res = 0;
    if (!parse_grid(mk_grid, ex, ey, res)) {
      std::fprintf(stderr, "error: --grid expects EXTXxEXTY:RES, got '%s'\n",
                   mk_grid.c_str());
      return 2;
    }
    const geobev_status s =
        geobev_mask(mk_rig.c_str(), ex, ey, res, mk_eps, mk_imgh, mk_imgw,
                    mk_stride, mk_bins, mk_dmin, mk_dmax, mk_out.c_str());
    if (s != GEOBEV_OK) return fail(s);
    std::printf("wrote %s.pgm and %s.gtns\n", mk_out.c_str(), mk_out.c_str());
    return 0;
  }
  if (*ab) {
    const geobev_status s =
        geobev_ablate(ab_config.empty() ? nullptr : ab_config.c_str(),
                      ab_data.c_str(), ab_out.c_str());
    if (s != GEOBEV_OK) return fail(s);
    std::printf("ablation grid written to %s\n", ab_out.c_str());
    return 0;
  }
  return 2;
}
