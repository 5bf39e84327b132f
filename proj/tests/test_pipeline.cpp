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
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "geobev/error.hpp"
#include "geobev/pipeline.hpp"
#include "geobev/world.hpp"

using namespace geobev;
namespace fs = std::filesystem;

namespace {

// Small-but-nondegenerate setup shared by the pipeline tests.
GenConfig micro_gen() {
  GenConfig cfg;
  cfg.timesteps = 3;
  cfg.window = 2;
  cfg.img_h = 24;
  cfg.img_w = 64;
  cfg.grid_extent_x = 24.0;
  cfg.grid_extent_y = 24.0;
  cfg.grid_resolution = 1.0;
  cfg.spawn_r_min = 3.0;
  cfg.spawn_r_max = 9.0;
  cfg.vehicles_min = 2;
  cfg.vehicles_max = 2;
  return cfg;
}

TrainConfig micro_train() {
  TrainConfig cfg;
  cfg.temporal_field = 2;
  cfg.feat_channels = 4;
  cfg.depth_bins = 4;
  cfg.depth_min = 1.0;
  cfg.depth_max = 10.0;
  cfg.hidden_channels = 4;
  cfg.enc1_channels = 4;
  cfg.enc2_channels = 4;
  cfg.head_channels = 4;
  cfg.gru_units = 2;
  cfg.val_split = 0.0;
  cfg.seed = 11;
  return cfg;
}

std::string make_dataset(const std::string& name, int scenes,
                         const GenConfig& cfg, std::uint64_t seed = 40) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  std::vector<Scene> list;
  for (int i = 0; i < scenes; ++i) {
    list.push_back(generate_scene(SeededRng::mix(seed, i), cfg));
  }
  export_dataset(list, cfg, seed, dir.string());
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("cross_entropy_loss") {
  SUBCASE("uniform logits over two classes cost ln 2") {
    const LossResult r =
        cross_entropy_loss(Tensor({2, 3, 3}, 0.7), Tensor({3, 3}, 1.0));
    CHECK(r.value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("saturated correct logits cost about zero") {
    Tensor logits({2, 2, 2}, -30.0);
    Tensor labels({2, 2}, 1.0);
    for (int y = 0; y < 2; ++y) {
      for (int x = 0; x < 2; ++x) logits.at(1, y, x) = 30.0;
    }
    const LossResult r = cross_entropy_loss(logits, labels);
    CHECK(r.value < 1e-12);
  }
  SUBCASE("gradient matches finite differences at 1e-6") {
    SeededRng rng(71);
    Tensor logits({3, 4, 4});
    for (std::size_t i = 0; i < logits.size(); ++i) {
      logits[i] = rng.uniform(-2.0, 2.0);
    }
    Tensor labels({4, 4}, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels[i] = static_cast<double>(rng.uniform_index(3));
    }
    const LossResult r = cross_entropy_loss(logits, labels);
    const Tensor fd = finite_diff_grad(
        [&](const Tensor& x) { return cross_entropy_loss(x, labels).value; },
        logits);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      CHECK(r.grad_logits[i] == doctest::Approx(fd[i]).epsilon(1e-6));
    }
  }
  SUBCASE("invalid label ids are rejected") {
    CHECK_THROWS_AS(
        cross_entropy_loss(Tensor({2, 2, 2}, 0.0), Tensor({2, 2}, 2.0)), Error);
    CHECK_THROWS_AS(
        cross_entropy_loss(Tensor({2, 2, 2}, 0.0), Tensor({2, 2}, 0.5)), Error);
  }
}

TEST_CASE("adam_update_tensor") {
  SUBCASE("zero gradient leaves parameters untouched") {
    Tensor p({3}, 2.0), g({3}, 0.0), m({3}, 0.0), v({3}, 0.0);
    adam_update_tensor(p, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8);
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p[i] == 2.0);
  }
  SUBCASE("first step moves by about -lr * sign(g)") {
    Tensor p({2}, 0.0), g({2}, 0.0), m({2}, 0.0), v({2}, 0.0);
    g[0] = 0.37;
    g[1] = -1.9;
    adam_update_tensor(p, g, m, v, 1, 1e-3, 0.9, 0.999, 1e-8);
    CHECK(p[0] == doctest::Approx(-1e-3).epsilon(1e-6));
    CHECK(p[1] == doctest::Approx(1e-3).epsilon(1e-6));
  }
  SUBCASE("two identical steps match the scalar reference trace") {
    const double g = 0.8, lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    // hand-rolled scalar Adam
    double m_ref = 0.0, v_ref = 0.0, p_ref = 0.5;
    for (int step = 1; step <= 2; ++step) {
      m_ref = b1 * m_ref + (1 - b1) * g;
      v_ref = b2 * v_ref + (1 - b2) * g * g;
      const double mh = m_ref / (1 - std::pow(b1, step));
      const double vh = v_ref / (1 - std::pow(b2, step));
      p_ref -= lr * mh / (std::sqrt(vh) + eps);
    }
    Tensor p({1}, 0.5), grad({1}, g), m({1}, 0.0), v({1}, 0.0);
    adam_update_tensor(p, grad, m, v, 1, lr, b1, b2, eps);
    adam_update_tensor(p, grad, m, v, 2, lr, b1, b2, eps);
    CHECK(p[0] == doctest::Approx(p_ref).epsilon(1e-15));
  }
}

TEST_CASE("encoder shapes and zero behavior") {
  TrainConfig cfg = micro_train();
  DatasetMeta meta;
  meta.timesteps = 2;
  meta.window = 2;
  meta.cameras = 1;
  meta.img_h = 24;
  meta.img_w = 64;
  meta.grid = BevGridSpec::create(24.0, 24.0, 1.0);
  SUBCASE("zero image and zero params give zero outputs") {
    ModelParams p = init_model(cfg, meta);
    p.for_each_param([](const std::string&, Tensor& t) {
      t = Tensor(t.shape(), 0.0);
    });
    const EncoderOut out = encode_image(Tensor({3, 24, 64}, 0.0), p);
    CHECK(sum(out.features) == 0.0);
    CHECK(sum(out.depth_logits) == 0.0);
  }
  SUBCASE("output spatial dims are input / 8") {
    const ModelParams p = init_model(cfg, meta);
    const EncoderOut out = encode_image(Tensor({3, 24, 64}, 0.1), p);
    CHECK(out.features.dim(0) == cfg.feat_channels);
    CHECK(out.features.dim(1) == 3);
    CHECK(out.features.dim(2) == 8);
    CHECK(out.depth_logits.dim(0) == cfg.depth_bins);
  }
  SUBCASE("indivisible dims are rejected") {
    const ModelParams p = init_model(cfg, meta);
    CHECK_THROWS_AS(encode_image(Tensor({3, 20, 64}, 0.0), p), Error);
  }
}

TEST_CASE("model forward determinism and masked suppression") {
  const GenConfig gen = micro_gen();
  const std::string data = make_dataset("geobev_pipe_det", 1, gen);
  const Dataset ds = load_dataset(data);
  TrainConfig cfg = micro_train();

  SUBCASE("same seed and sample give bit-identical logits") {
    const Sample s = load_sample(ds, ds.samples[0], cfg.temporal_field);
    const ModelParams p1 = init_model(cfg, ds.meta);
    const ModelParams p2 = init_model(cfg, ds.meta);
    const ModelGeometry geom = build_geometry(cfg, ds.meta, ds.rig);
    const Tensor a = model_forward(s, p1, geom, cfg);
    const Tensor b = model_forward(s, p2, geom, cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("epsilon 0 blanks logits deep inside invalid territory") {
    const ModelParams params = init_model(cfg, ds.meta);
    ModelGeometry geom = build_geometry(cfg, ds.meta, ds.rig);
    // test-only mask: valid only in the top-left corner, hard zero elsewhere
    geom.mask.epsilon = 0.0;
    geom.mask.weights = Tensor({ds.meta.grid.rows, ds.meta.grid.cols}, 0.0);
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) geom.mask.weights.at(r, c) = 1.0;
    }
    const Sample s1 = load_sample(ds, ds.samples[0], cfg.temporal_field);
    const Sample s2 = load_sample(ds, ds.samples[1], cfg.temporal_field);
    const Tensor l1 = model_forward(s1, params, geom, cfg);
    const Tensor l2 = model_forward(s2, params, geom, cfg);
    // two stacked 3x3 head convs reach 2 cells; anything >= 3 cells away
    // from the valid block depends on no sample content
    for (int c = 0; c < 2; ++c) {
      for (int r = 10; r < ds.meta.grid.rows; ++r) {
        for (int col = 10; col < ds.meta.grid.cols; ++col) {
          CHECK(l1.at(c, r, col) == 0.0);
          CHECK(l1.at(c, r, col) == l2.at(c, r, col));
        }
      }
    }
  }
}

TEST_CASE("checkpoint round trip") {
  TrainConfig cfg = micro_train();
  DatasetMeta meta;
  meta.timesteps = 2;
  meta.window = 2;
  meta.cameras = 2;
  meta.img_h = 24;
  meta.img_w = 64;
  meta.grid = BevGridSpec::create(24.0, 24.0, 1.0);
  const ModelParams params = init_model(cfg, meta);

  const fs::path dir = fs::temp_directory_path() / "geobev_ckpt_test";
  fs::create_directories(dir);
  const std::string path = (dir / "p.gcgr").string();
  save_checkpoint(params, path);

  SUBCASE("load reproduces every tensor bit-exactly") {
    ModelParams loaded = init_model(cfg, meta);
    loaded.for_each_param([](const std::string&, Tensor& t) {
      t = Tensor(t.shape(), -1.0);
    });
    load_checkpoint(loaded, path);
    bool equal = true;
    loaded.for_each_param([&](const std::string& name, Tensor& t) {
      const_cast<ModelParams&>(params).for_each_param(
          [&](const std::string& name2, Tensor& t2) {
            if (name == name2) {
              for (std::size_t i = 0; i < t.size(); ++i) {
                equal = equal && t[i] == t2[i];
              }
            }
          });
    });
    CHECK(equal);
    // and re-saving writes identical bytes
    const std::string path2 = (dir / "p2.gcgr").string();
    save_checkpoint(loaded, path2);
    CHECK(slurp(path) == slurp(path2));
  }
  SUBCASE("version mismatch is a format error") {
    std::string raw = slurp(path);
    raw[5] = 2;  // bump the little-endian version field
    const std::string bad = (dir / "bad.gcgr").string();
    std::ofstream out(bad, std::ios::binary);
    out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
    out.close();
    ModelParams loaded = init_model(cfg, meta);
    try {
      load_checkpoint(loaded, bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kFormat);
    }
  }
  SUBCASE("shape mismatch against the configured model is a config error") {
    TrainConfig other = cfg;
    other.hidden_channels = 5;
    ModelParams loaded = init_model(other, meta);
    CHECK_THROWS_AS(load_checkpoint(loaded, path), Error);
  }
}

TEST_CASE("train workflow") {
  const GenConfig gen = micro_gen();
  TrainConfig cfg = micro_train();

  SUBCASE("zero epochs write the initialization checkpoint") {
    const std::string data = make_dataset("geobev_train_zero", 1, gen);
    cfg.epochs = 0;
    const fs::path out = fs::temp_directory_path() / "geobev_train_zero_out";
    fs::remove_all(out);
    const TrainResult r = train(cfg, data, out.string());
    const Dataset ds = load_dataset(data);
    const ModelParams init = init_model(cfg, ds.meta);
    const std::string ref = (out / "ref.gcgr").string();
    save_checkpoint(init, ref);
    CHECK(slurp(r.checkpoint_path) == slurp(ref));
    CHECK(r.step_losses.empty());
  }
  SUBCASE("loss decreases monotonically over the first 20 steps") {
    GenConfig one = gen;
    one.timesteps = 2;  // single window -> one repeated sample
    const std::string data = make_dataset("geobev_train_mono", 1, one);
    cfg.temporal_field = 2;
    cfg.max_steps = 20;
    cfg.epochs = 1000;
    const fs::path out = fs::temp_directory_path() / "geobev_train_mono_out";
    fs::remove_all(out);
    const TrainResult r = train(cfg, data, out.string());
    REQUIRE(r.step_losses.size() == 20);
    for (std::size_t i = 1; i < r.step_losses.size(); ++i) {
      CHECK(r.step_losses[i] < r.step_losses[i - 1] + 1e-12);
    }
  }
  SUBCASE("same seed and config give bit-identical checkpoints") {
    const std::string data = make_dataset("geobev_train_det", 2, gen);
    cfg.max_steps = 6;
    cfg.epochs = 10;
    const fs::path out1 = fs::temp_directory_path() / "geobev_train_det_1";
    const fs::path out2 = fs::temp_directory_path() / "geobev_train_det_2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    const TrainResult r1 = train(cfg, data, out1.string());
    const TrainResult r2 = train(cfg, data, out2.string());
    CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));
    CHECK(slurp(r1.metrics_csv_path) == slurp(r2.metrics_csv_path));
  }
  SUBCASE("metrics csv carries the pinned header") {
    const std::string data = make_dataset("geobev_train_csv", 1, gen);
    cfg.max_steps = 2;
    const fs::path out = fs::temp_directory_path() / "geobev_train_csv_out";
    fs::remove_all(out);
    const TrainResult r = train(cfg, data, out.string());
    const std::string csv = slurp(r.metrics_csv_path);
    CHECK(csv.rfind("epoch,step,loss,val_iou\n", 0) == 0);
  }
}

TEST_CASE("evaluate workflow") {
  const GenConfig gen = micro_gen();
  TrainConfig cfg = micro_train();
  const std::string data = make_dataset("geobev_eval_data", 1, gen);
  const Dataset ds = load_dataset(data);

  SUBCASE("all-background prediction scores zero vehicle IoU") {
    ModelParams p = init_model(cfg, ds.meta);
    p.head_conv2 = Tensor(p.head_conv2.shape(), 0.0);  // logits become zero
    const fs::path dir = fs::temp_directory_path() / "geobev_eval_zero";
    fs::create_directories(dir);
    const std::string ckpt = (dir / "zero.gcgr").string();
    save_checkpoint(p, ckpt);
    const EvalResult r = evaluate(cfg, ckpt, data, (dir / "m.csv").string());
    CHECK(r.iou_per_class[1] == 0.0);
    CHECK(r.iou_per_class[0] > 0.5);  // background dominates the grid
    const std::string csv = slurp((dir / "m.csv").string());
    CHECK(csv.rfind("metric,value\n", 0) == 0);
    CHECK(csv.find("pq,") != std::string::npos);
  }
}
