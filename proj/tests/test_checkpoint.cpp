#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "syco/checkpoint.hpp"
#include "syco/config.hpp"
#include "syco/errors.hpp"

using namespace syco;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("syco_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static inline int counter = 0;
};

Checkpoint make_checkpoint() {
  RngState rng(5);
  Checkpoint ckpt;
  ckpt.backbone = make_backbone(6, 8, 3, 2, rng);
  for (int k = 0; k < 2; ++k) {
    std::vector<TaLoraAdapter> layers;
    for (int l = 0; l < 2; ++l) {
      TaLoraAdapter a;
      a.b_shared = Tensor2D::randn(8, 4, rng, 0.3);
      a.u = {0.1, -0.2, 0.3, 0.4};
      a.v = Vec(l == 0 ? 6 : 8, 0.25);
      a.gate = 0.37;
      layers.push_back(std::move(a));
    }
    ckpt.talora.push_back(std::move(layers));
  }
  for (int k = 0; k < 2; ++k) {
    SourceLibraryEntry e;
    e.task_id = k;
    e.task_embedding = Vec(12, 0.5 + k);
    e.adapter_set.push_back(init_svd_adapter(8, 6, 4, rng, 0.4));
    e.adapter_set.push_back(init_svd_adapter(8, 8, 4, rng, 0.4));
    e.adapter_set[0].sigma = {1.0, -0.5, 0.25, 0.0};
    ckpt.library.entries.push_back(std::move(e));
  }
  ckpt.guardrail.examples.push_back({Vec(6, 0.1), 2, 0.93});
  ckpt.config_echo = nlohmann::json{{"note", "test"}};
  return ckpt;
}

}  // namespace

TEST_CASE("hex double round trip is bit exact") {
  RngState rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.next_gaussian() * std::pow(10.0, (i % 61) - 30);
    CHECK(double_from_hex(hex_from_double(v)) == v);
  }
  CHECK(double_from_hex(hex_from_double(0.0)) == 0.0);
  CHECK(double_from_hex(hex_from_double(-0.0)) == -0.0);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir;
  Checkpoint ckpt = make_checkpoint();
  const std::string path = dir.file("checkpoint.json");
  save_checkpoint(path, ckpt);

  SUBCASE("loaded checkpoint is bit-identical") {
    Checkpoint got = load_checkpoint(path);
    CHECK(max_abs_diff(got.backbone.hidden[0].w, ckpt.backbone.hidden[0].w) ==
          0.0);
    CHECK(got.backbone.head.b == ckpt.backbone.head.b);
    CHECK(got.talora[1][0].gate == ckpt.talora[1][0].gate);
    CHECK(max_abs_diff(got.talora[0][1].b_shared,
                       ckpt.talora[0][1].b_shared) == 0.0);
    CHECK(got.library.entries[0].adapter_set[0].sigma ==
          ckpt.library.entries[0].adapter_set[0].sigma);
    CHECK(got.guardrail.examples[0].margin == 0.93);
    CHECK(got.config_echo.at("note") == "test");
  }

  SUBCASE("saving twice produces byte-identical files") {
    const std::string copy = dir.file("checkpoint2.json");
    save_checkpoint(copy, ckpt);
    CHECK(read_text_file(path) == read_text_file(copy));
  }

  SUBCASE("corruption is caught by the checksum") {
    std::string text = read_text_file(path);
    // flip one hex digit inside the payload
    auto pos = text.find("\"data\"");
    REQUIRE(pos != std::string::npos);
    pos = text.find('"', pos + 7);
    pos = text.find('"', pos + 1) + 1;
    text[pos + 1] = text[pos + 1] == '0' ? '1' : '0';
    const std::string bad = dir.file("bad.json");
    write_text_file(bad, text);
    CHECK_THROWS_AS(load_checkpoint(bad), CorruptArtifact);
  }

  SUBCASE("wrong kind is rejected") {
    const std::string other = dir.file("sources.json");
    save_sources(other, {}, nlohmann::json::object());
    CHECK_THROWS_AS(load_checkpoint(other), CorruptArtifact);
  }
}

TEST_CASE("sources and stream round trips") {
  TempDir dir;
  DataConfig data;
  data.n_sources = 2;
  data.train_per_task = 32;
  data.val_per_task = 16;
  auto sources = gen_source_tasks(data, 3, 8, 99);
  const std::string spath = dir.file("sources.json");
  save_sources(spath, sources, nlohmann::json{{"seed", 99}});
  auto got = load_sources(spath);
  REQUIRE(got.size() == sources.size());
  CHECK(got[0].train.xs == sources[0].train.xs);
  CHECK(got[1].embedding == sources[1].embedding);
  CHECK(got[0].scalar_std == sources[0].scalar_std);
  CHECK(max_abs_diff(got[1].spec.rotation, sources[1].spec.rotation) == 0.0);

  StreamConfig scfg;
  scfg.n_segments = 2;
  scfg.batches_per_segment = 3;
  scfg.batch_size = 4;
  auto stream =
      gen_target_stream(sources, StreamMode::unseen_task, data, scfg, 5);
  const std::string tpath = dir.file("stream.json");
  save_stream(tpath, stream, nlohmann::json::object());
  auto got_stream = load_stream(tpath);
  REQUIRE(got_stream.batches.size() == stream.batches.size());
  CHECK(got_stream.schedule.mode == StreamMode::unseen_task);
  for (std::size_t i = 0; i < stream.batches.size(); ++i) {
    CHECK(got_stream.batches[i].inputs == stream.batches[i].inputs);
    CHECK(got_stream.batches[i].canonical_inputs ==
          stream.batches[i].canonical_inputs);
    CHECK(eval_access::labels(got_stream.batches[i]) ==
          eval_access::labels(stream.batches[i]));
  }
}

TEST_CASE("config json round trip and strictness") {
  SUBCASE("defaults match the published operating point") {
    ExperimentConfig cfg;
    CHECK(cfg.tta.alpha == 0.1);
    CHECK(cfg.tta.eta0 == 5e-4);
    CHECK(cfg.tta.gamma0 == 0.1);
    CHECK(cfg.tta.gamma1 == 0.5);
    CHECK(cfg.tta.gamma2 == 1.0);
    CHECK(cfg.tta.l == 8);
    CHECK(cfg.tta.kappa == 0.8);
    CHECK(cfg.tta.lambda1 == 0.2);
    CHECK(cfg.tta.lambda2 == 0.7);
    CHECK(cfg.tta.lambda3 == 0.1);
    CHECK(cfg.tta.tau == 1.2);
    CHECK_NOTHROW(cfg.validate());
  }

  SUBCASE("full round trip") {
    ExperimentConfig cfg;
    cfg.run_name = "roundtrip";
    cfg.seeds = {3, 4};
    cfg.tta.alpha = 0.25;
    cfg.stream.shift = 2.0;
    ExperimentConfig got = parse_config_json(config_to_json(cfg));
    CHECK(got.run_name == "roundtrip");
    CHECK(got.seeds == std::vector<std::uint64_t>{3, 4});
    CHECK(got.tta.alpha == 0.25);
    CHECK(got.stream.shift == 2.0);
    CHECK(config_to_json(got) == config_to_json(cfg));
  }

  SUBCASE("unknown keys rejected with a field-level message") {
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"nonsense": 1})"),
                         "unknown key 'nonsense'", ConfigError);
    CHECK_THROWS_WITH_AS(parse_config_json(R"({"tta": {"alhpa": 0.1}})"),
                         "unknown key 'tta.alhpa'", ConfigError);
  }

  SUBCASE("validation failures are config errors") {
    CHECK_THROWS_AS(parse_config_json(R"({"tta": {"tau": 0.9}})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json(R"({"seeds": []})"), ConfigError);
    CHECK_THROWS_AS(parse_config_json("not json"), ConfigError);
  }
}
