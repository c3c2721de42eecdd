#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "maskvae/base64.hpp"
#include "maskvae/cli.hpp"
#include "maskvae/errors.hpp"
#include "maskvae/png_io.hpp"
#include "maskvae/service.hpp"
#include "maskvae/sis_export.hpp"
#include "maskvae/toy_masks.hpp"
#include "maskvae/trainer.hpp"
#include "test_util.hpp"

#include "httplib.h"

using namespace maskvae;
namespace fs = std::filesystem;

namespace {

constexpr int kSize = 32;

std::string read_file_text(const fs::path& path) {
  const auto bytes = read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

struct Fixture {
  testutil::TempDir dir;
  fs::path checkpoint;
  fs::path data;
};

// Briefly trained 6-class 32x32 checkpoint plus its data directory.
const Fixture& fixture() {
  static const Fixture* f = [] {
    auto* fx = new Fixture;
    RunConfig cfg;
    cfg.model.class_count = 6;
    cfg.model.mask_size = kSize;
    cfg.model.decoder_init_size = 8;
    cfg.model.latent_dim = 64;
    cfg.model.encoder_hidden = 32;
    cfg.model.lstm_layers = 1;
    cfg.model.decoder_base_channels = 8;
    cfg.model.groupnorm_groups = 2;
    cfg.train.epochs = 3;
    cfg.train.batch_size = 16;
    cfg.train.learning_rate = 2e-3;
    cfg.train.eval_each_epoch = false;
    MaskDataset data;
    data.palette = toy_palette(6);
    for (int i = 0; i < 64; ++i) {
      char name[8];
      std::snprintf(name, sizeof(name), "%05d", i);
      data.names.push_back(name);
      data.masks.push_back(generate_toy_labels(500 + i, {6, kSize, kSize}));
    }
    fx->data = fx->dir.path() / "data";
    save_mask_directory(data, fx->data);
    Model model = make_model(cfg);
    TrainOptions opts;
    opts.run_dir = fx->dir.path() / "run";
    train(model, data, cfg, opts);
    fx->checkpoint = epoch_directory(opts.run_dir, 3);
    return fx;
  }();
  return *f;
}

const Checkpoint& loaded() {
  static const Checkpoint ck = load_checkpoint(fixture().checkpoint);
  return ck;
}

std::vector<std::uint8_t> mask_bytes(int i) { return read_file(fixture().data / (std::string("0000") + char('0' + i) + ".png")); }

LabelMap mask_of(int i) { return decode_label_png(mask_bytes(i), 6); }

std::vector<std::uint8_t> b64_field(const nlohmann::json& j, const std::string& key) {
  return base64_decode(j.at(key).get<std::string>());
}

int expect_api_error(const std::function<void()>& f, const std::string& code) {
  try {
    f();
  } catch (const ApiError& e) {
    CHECK(e.code() == code);
    return e.status();
  }
  FAIL("no ApiError");
  return 0;
}

LabelMap part_swap(const Model& model, const LabelMap& source, const LabelMap& target, int c) {
  Codes s = encode_mask(model, source);
  const Codes t = encode_mask(model, target);
  const auto src = t.row(0, static_cast<std::size_t>(c));
  auto dst = s.row(0, static_cast<std::size_t>(c));
  std::copy(src.begin(), src.end(), dst.begin());
  return decode_to_mask(model, s);
}

int run_tool(const std::vector<std::string>& args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  std::vector<const char*> argv{"maskvae"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return rc;
}

int run_binary(const std::string& args) {
  const int status = std::system((std::string(MASKVAE_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::uint64_t checksum(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) h = (h ^ b) * 0x100000001b3ULL;
  return h;
}

struct TestServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  explicit TestServer(EditorService& service) {
    register_routes(server, service);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~TestServer() {
    server.stop();
    thread.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);
    return c;
  }
};

}  // namespace

TEST_CASE("base64 matches the RFC test vectors and rejects junk") {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"", ""},         {"f", "Zg=="},         {"fo", "Zm8="},        {"foo", "Zm9v"},
      {"foob", "Zm9vYg=="}, {"fooba", "Zm9vYmE="}, {"foobar", "Zm9vYmFy"}};
  for (const auto& [plain, coded] : cases) {
    const std::vector<std::uint8_t> bytes(plain.begin(), plain.end());
    CHECK(base64_encode(bytes) == coded);
    CHECK(base64_decode(coded) == bytes);
  }
  std::vector<std::uint8_t> all(256);
  for (int i = 0; i < 256; ++i) all[i] = static_cast<std::uint8_t>(i);
  CHECK(base64_decode(base64_encode(all)) == all);
  CHECK_THROWS_AS(base64_decode("Zm9v!"), InvalidInput);
  CHECK_THROWS_AS(base64_decode("Zm9"), InvalidInput);
}

TEST_CASE("SIS export round trips exactly in both layouts") {
  const auto palette = toy_palette(6);
  for (int i = 0; i < 20; ++i) {
    const LabelMap mask = generate_toy_labels(77 + i, {6, 64, 64});
    testutil::TempDir dir;
    const auto files = export_sis(mask, palette, SisLayout::PartFiles, dir.path(), "img" + std::to_string(i));
    std::set<int> present(mask.labels.begin(), mask.labels.end());
    present.erase(0);
    CHECK(files.size() == present.size());
    CHECK(import_sis(dir.path(), palette, SisLayout::PartFiles, "img" + std::to_string(i)) == mask);
    testutil::TempDir dir2;
    export_sis(mask, palette, SisLayout::LabelMap, dir2.path(), "x");
    CHECK(import_sis(dir2.path(), palette, SisLayout::LabelMap, "x") == mask);
  }
  testutil::TempDir dir;
  const LabelMap empty(32, 32, 6);
  CHECK(export_sis(empty, palette, SisLayout::PartFiles, dir.path(), "e").size() == 1);
  CHECK(import_sis(dir.path(), palette, SisLayout::PartFiles, "e") == empty);
  CHECK_THROWS_AS(export_sis(empty, palette, SisLayout::PartFiles, dir.path(), "../x"), InvalidInput);
  CHECK_THROWS_AS(parse_sis_layout("tiles"), InvalidInput);
}

TEST_CASE("part-file export follows the face parsing dataset naming") {
  const auto palette = celebamask_palette();
  LabelMap mask(32, 32, palette.size());
  for (int y = 4; y < 28; ++y)
    for (int x = 6; x < 26; ++x) mask.at(y, x) = static_cast<std::uint8_t>(palette.index_of("skin"));
  for (int x = 0; x < 32; ++x) mask.at(0, x) = static_cast<std::uint8_t>(palette.index_of("hair"));
  mask.at(10, 10) = static_cast<std::uint8_t>(palette.index_of("l_eye"));
  mask.at(10, 20) = static_cast<std::uint8_t>(palette.index_of("r_eye"));
  mask.at(20, 15) = static_cast<std::uint8_t>(palette.index_of("u_lip"));
  testutil::TempDir dir;
  export_sis(mask, palette, SisLayout::PartFiles, dir.path(), "00042");
  std::set<std::string> names;
  for (const auto& e : fs::directory_iterator(dir.path())) names.insert(e.path().filename().string());
  const std::set<std::string> reference = {"00042_hair.png", "00042_l_eye.png", "00042_r_eye.png",
                                           "00042_skin.png", "00042_u_lip.png"};
  CHECK(names == reference);
  const RawImage eye = read_png(dir.path() / "00042_l_eye.png");
  CHECK(eye.channels == 1);
  std::set<int> values(eye.pixels.begin(), eye.pixels.end());
  CHECK(values == std::set<int>{0, 255});
}

TEST_CASE("service without a model answers 503 everywhere") {
  EditorService service;
  CHECK_FALSE(service.ready());
  CHECK(expect_api_error([&] { service.health(); }, "model_not_loaded") == 503);
  CHECK(expect_api_error([&] { service.classes(); }, "model_not_loaded") == 503);
  CHECK(expect_api_error([&] { service.upload("s", mask_bytes(0)); }, "model_not_loaded") == 503);
  CHECK(expect_api_error([&] { service.edit("s", "m1", "{}"); }, "model_not_loaded") == 503);
  TestServer server(service);
  auto res = server.client().Get("/healthz");
  REQUIRE(res);
  CHECK(res->status == 503);
  CHECK(nlohmann::json::parse(res->body)["error"]["code"] == "model_not_loaded");
}

TEST_CASE("service edits: reconstruction, determinism, error codes") {
  EditorService service(load_checkpoint(fixture().checkpoint));
  const Model& model = loaded().model;
  CHECK(service.health()["classes"] == 6);
  CHECK(service.classes()["classes"].size() == 6);
  CHECK(service.classes()["classes"][1]["name"] == "hair");

  const auto up = service.upload("a", mask_bytes(1));
  const std::string id = up["mask_id"];
  const auto preview = decode_png(b64_field(up, "preview"));
  CHECK(preview.channels == 3);

  const auto empty = service.edit("a", id, R"({"edits": []})");
  const LabelMap recon = decode_to_mask(model, encode_mask(model, mask_of(1)));
  CHECK(empty.mask_png == encode_label_png(recon));
  CHECK(empty.body["changed_total"] == 0);
  CHECK(service.mask_png("a", id) == mask_bytes(1));

  const std::string plan = R"({"seed": 9, "edits": [{"class": "hair", "op": "generate"}]})";
  const auto e1 = service.edit("a", id, plan);
  const auto e2 = service.edit("a", id, plan);
  CHECK(e1.mask_png == e2.mask_png);
  CHECK(e1.body == e2.body);
  std::uint64_t sum = 0;
  for (const auto& [name, n] : e1.body["changed_pixels"].items()) sum += n.get<std::uint64_t>();
  CHECK(sum == e1.body["changed_total"].get<std::uint64_t>());
  CHECK(e1.body["changed_pixels"].size() == 6);

  const auto enc = service.encode("a", id);
  CHECK(enc["classes"] == 6);
  CHECK(enc["dim"] == 64);

  // interpolation against another upload of the same session
  const std::string other = service.upload("a", mask_bytes(2))["mask_id"];
  const auto swap = service.edit(
      "a", id, R"({"edits": [{"class": "nose", "op": "interpolate", "alpha": 1, "target": ")" + other + "\"}]}");
  CHECK(swap.mask_png == encode_label_png(part_swap(model, mask_of(1), mask_of(2), 4)));
  const auto sweep = service.interpolate(
      "a", nlohmann::json{{"source_id", id}, {"target_id", other}, {"class", "nose"}, {"steps", 3}}.dump());
  REQUIRE(sweep["masks"].size() == 3);
  CHECK(b64_field(sweep["masks"][0], "mask_png") == encode_label_png(recon));
  CHECK(b64_field(sweep["masks"][2], "mask_png") == swap.mask_png);
  const auto one = service.interpolate(
      "a", nlohmann::json{{"source_id", id}, {"target_id", other}, {"class", 4}, {"alpha", 1.0}}.dump());
  CHECK(b64_field(one["masks"][0], "mask_png") == swap.mask_png);

  CHECK(expect_api_error([&] { service.edit("a", "m99", "{}"); }, "unknown_mask") == 404);
  CHECK(expect_api_error([&] { service.edit("b", id, "{}"); }, "unknown_mask") == 404);
  CHECK(expect_api_error([&] { service.edit("a", id, "{not json"); }, "invalid_plan") == 400);
  CHECK(expect_api_error([&] { service.edit("a", id, R"({"edits":[{"class":"beard","op":"generate"}]})"); },
                         "invalid_plan") == 400);
  CHECK(expect_api_error([&] { service.edit("a", id, R"({"edits":[{"class":"hair","op":"interpolate","alpha":0.5,"target":"m77"}]})"); },
                         "unknown_mask") == 404);
  CHECK(expect_api_error([&] { service.upload("a", {1, 2, 3}); }, "invalid_mask") == 400);
  CHECK(expect_api_error([&] { service.upload("a", encode_label_png(LabelMap(32, 32, 8, 7))); }, "invalid_mask") ==
        400);
  CHECK(expect_api_error([&] { service.upload("a", encode_label_png(LabelMap(64, 64, 6))); }, "config_mismatch") ==
        409);
  CHECK(expect_api_error([&] { service.check_checkpoint("0123456789abcdef"); }, "checkpoint_mismatch") == 409);
  service.check_checkpoint(service.checkpoint_id());
  service.check_checkpoint("");
  CHECK(expect_api_error([&] { service.interpolate("a", R"({"source_id":"m1","target_id":"m2","class":"nose"})"); },
                         "invalid_request") == 400);
  CHECK(expect_api_error([&] { service.interpolate("a", R"({"source_id":"m1","target_id":"m2","class":"nose","alpha":2})"); },
                         "invalid_request") == 400);
}

TEST_CASE("colour renders upload to the same labels") {
  EditorService service(load_checkpoint(fixture().checkpoint));
  const auto palette = toy_palette(6);
  const std::string id = service.upload("c", encode_rgb_png(render_color(mask_of(3), palette)))["mask_id"];
  CHECK(service.mask_png("c", id) == mask_bytes(3));
}

TEST_CASE("HTTP routes, content types and error bodies") {
  EditorService service(load_checkpoint(fixture().checkpoint));
  TestServer server(service);
  auto cli = server.client();
  const httplib::Headers session{{"X-Session-Id", "h"}};

  auto res = cli.Get("/classes");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "application/json");

  const auto png = mask_bytes(4);
  res = cli.Post("/masks", session, std::string(png.begin(), png.end()), "image/png");
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string id = nlohmann::json::parse(res->body)["mask_id"];

  res = cli.Post("/masks", session, nlohmann::json{{"png", base64_encode(png)}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);

  const std::string plan = R"({"seed": 3, "edits": [{"class": "eyes", "op": "perturb", "noise_scale": 0.8}]})";
  res = cli.Post("/masks/" + id + "/edit?format=png", session, plan, "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "image/png");
  const auto direct = apply_edit_plan(loaded().model, mask_of(4), parse_edit_plan(plan, toy_palette(6)));
  const auto expected = encode_label_png(direct.mask);
  CHECK(res->body == std::string(expected.begin(), expected.end()));

  res = cli.Post("/masks/" + id + "/edit", session, plan, "application/json");
  REQUIRE(res);
  CHECK(b64_field(nlohmann::json::parse(res->body), "mask_png") == expected);

  res = cli.Post("/masks/" + id + "/encode", session, "", "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);

  res = cli.Get("/masks/" + id, session);
  REQUIRE(res);
  CHECK(res->body == std::string(png.begin(), png.end()));

  const auto status_of = [&](httplib::Result r) {
    REQUIRE(r);
    return std::make_pair(r->status, nlohmann::json::parse(r->body)["error"]["code"].get<std::string>());
  };
  CHECK(status_of(cli.Post("/masks/" + id + "/edit", session, "[1,2", "application/json")) ==
        std::make_pair(400, std::string("invalid_plan")));
  CHECK(status_of(cli.Post("/masks/m404/edit", session, "{}", "application/json")) ==
        std::make_pair(404, std::string("unknown_mask")));
  CHECK(status_of(cli.Post("/masks/" + id + "/edit", httplib::Headers{{"X-Session-Id", "other"}}, "{}",
                           "application/json")) == std::make_pair(404, std::string("unknown_mask")));
  CHECK(status_of(cli.Get("/classes", httplib::Headers{{"X-Checkpoint", "feedfacefeedface"}})) ==
        std::make_pair(409, std::string("checkpoint_mismatch")));
  CHECK(status_of(cli.Post("/masks", session, "not a png", "image/png")) ==
        std::make_pair(400, std::string("invalid_mask")));
  CHECK(status_of(cli.Get("/nowhere")) == std::make_pair(404, std::string("not_found")));
  res = cli.Get("/healthz", httplib::Headers{{"X-Checkpoint", service.checkpoint_id()}});
  REQUIRE(res);
  CHECK(res->status == 200);
}

TEST_CASE("16 concurrent sessions get their own masks") {
  EditorService service(load_checkpoint(fixture().checkpoint));
  TestServer server(service);
  constexpr int kClients = 16;
  const auto palette = toy_palette(6);
  std::vector<std::string> expected(kClients);
  for (int k = 0; k < kClients; ++k) {
    EditPlan plan;
    plan.seed = 100 + k;
    Edit e;
    e.class_index = 1 + k % 5;
    e.op = EditOp::Generate;
    plan.edits.push_back(e);
    const auto png = encode_label_png(apply_edit_plan(loaded().model, mask_of(k % 10), plan).mask);
    expected[k] = std::string(png.begin(), png.end());
  }
  std::vector<std::string> got(kClients), ids(kClients);
  std::vector<int> statuses(kClients, 0);
  std::vector<std::string> errors(kClients);
  std::vector<std::thread> threads;
  for (int k = 0; k < kClients; ++k) {
    threads.emplace_back([&, k] {
      auto cli = server.client();
      const httplib::Headers session{{"X-Session-Id", "s" + std::to_string(k)}};
      const auto png = mask_bytes(k % 10);
      auto up = cli.Post("/masks", session, std::string(png.begin(), png.end()), "image/png");
      if (!up || up->status != 201) {
        errors[k] = up ? "upload status " + std::to_string(up->status) : "upload " + httplib::to_string(up.error());
        return;
      }
      ids[k] = nlohmann::json::parse(up->body)["mask_id"];
      const std::string plan = "{\"seed\": " + std::to_string(100 + k) + ", \"edits\": [{\"class\": " +
                               std::to_string(1 + k % 5) + ", \"op\": \"generate\"}]}";
      auto res = cli.Post("/masks/" + ids[k] + "/edit?format=png", session, plan, "application/json");
      if (!res) {
        errors[k] = "edit " + httplib::to_string(res.error());
        return;
      }
      statuses[k] = res->status;
      got[k] = res->body;
    });
  }
  for (auto& t : threads) t.join();
  for (int k = 0; k < kClients; ++k) {
    INFO("client " << k << ": " << errors[k]);
    CHECK(statuses[k] == 200);
    REQUIRE(!got[k].empty());
    CHECK(checksum(got[k]) == checksum(expected[k]));
    const LabelMap m = decode_label_png(std::vector<std::uint8_t>(got[k].begin(), got[k].end()), 6);
    CHECK(one_hot_encode(m).is_valid());
    // every session numbers from m1: ids never leak counters across sessions
    CHECK(ids[k] == "m1");
  }
}

TEST_CASE("CLI synth-data, errors and exit codes") {
  testutil::TempDir dir;
  const auto out = dir.path() / "a";
  REQUIRE(run_tool({"synth-data", "--count", "10", "--classes", "6", "--size", "64", "--seed", "5", "--out",
                    out.string()}) == 0);
  const auto data = load_mask_directory(out);
  CHECK(data.masks.size() == 10);
  CHECK(fs::exists(out / "palette.tsv"));
  for (const auto& m : data.masks) CHECK(one_hot_encode(m).is_valid());
  REQUIRE(run_tool({"synth-data", "--count", "10", "--seed", "5", "--out", (dir.path() / "b").string()}) == 0);
  for (int i = 0; i < 10; ++i) {
    const std::string name = data.names[i] + ".png";
    CHECK(read_file(out / name) == read_file(dir.path() / "b" / name));
  }

  std::string err;
  CHECK(run_tool({"eval", "--checkpoint", (dir.path() / "missing").string(), "--data", out.string()}, nullptr, &err) == 2);
  CHECK(err.find("checkpoint") != std::string::npos);
  CHECK(run_tool({"frobnicate"}) == 2);
  CHECK(run_tool({"synth-data", "--count", "0", "--out", out.string()}) == 2);
  {
    std::ofstream(dir.path() / "bad.cfg") << "latent_dim = sixty\n";
  }
  CHECK(run_tool({"train", "--config", (dir.path() / "bad.cfg").string(), "--data", out.string(), "--out",
                  (dir.path() / "r").string()}) == 2);
  CHECK(run_tool({"edit", "--checkpoint", fixture().checkpoint.string(), "--input", (fixture().data / "00001.png").string(),
                  "--op", "generate", "--class", "beard", "--out", (dir.path() / "e").string()},
                 nullptr, &err) == 2);
  CHECK(err.find("background, hair, skin, eyes, nose, mouth") != std::string::npos);
  CHECK(run_binary("eval --checkpoint /nonexistent --data " + out.string()) == 2);
}

TEST_CASE("CLI train, eval and ablation write their reports") {
  testutil::TempDir dir;
  const auto data = dir.path() / "data";
  REQUIRE(run_tool({"synth-data", "--count", "24", "--size", "32", "--out", data.string()}) == 0);
  {
    std::ofstream(dir.path() / "small.cfg") << "decoder_init_size = 8\nlatent_dim = 64\nencoder_hidden = 16\n"
                                               "lstm_layers = 1\ndecoder_base_channels = 4\ngroupnorm_groups = 2\n"
                                               "epochs = 1\nbatch_size = 8\nlearning_rate = 1e-3\n";
  }
  const auto cfg = (dir.path() / "small.cfg").string();
  REQUIRE(run_tool({"train", "--config", cfg, "--data", data.string(), "--out", (dir.path() / "run").string()}) == 0);
  CHECK(fs::exists(dir.path() / "run" / "metrics.csv"));
  CHECK(fs::exists(dir.path() / "run" / "epoch_1" / "params.bin"));
  REQUIRE(run_tool({"eval", "--checkpoint", (dir.path() / "run").string(), "--data", data.string(), "--split", "all",
                    "--out", (dir.path() / "ev").string()}) == 0);
  const auto j = nlohmann::json::parse(read_file_text(dir.path() / "ev" / "eval.json"));
  CHECK(j["count"] == 24);
  REQUIRE(run_tool({"ablation", "--config", cfg, "--data", data.string(), "--seeds", "0", "--out",
                    (dir.path() / "abl").string()}) == 0);
  std::ifstream md(dir.path() / "abl" / "ablation.md");
  int rows = 0;
  for (std::string line; std::getline(md, line);) rows += line.rfind("| ", 0) == 0;
  CHECK(rows == 7);  // header plus six variants
  CHECK(fs::exists(dir.path() / "abl" / "ablation.csv"));
}

TEST_CASE("CLI edits match the library and the HTTP service byte for byte") {
  testutil::TempDir dir;
  const auto& fx = fixture();
  const Model& model = loaded().model;
  const auto input = (fx.data / "00002.png").string();
  const LabelMap source = mask_of(2);
  const LabelMap recon = decode_to_mask(model, encode_mask(model, source));

  REQUIRE(run_tool({"edit", "--checkpoint", fx.checkpoint.string(), "--input", input, "--op", "perturb", "--class",
                    "skin", "--noise-scale", "0", "--out", (dir.path() / "p").string()}) == 0);
  CHECK(read_file(dir.path() / "p" / "edit.png") == encode_label_png(recon));

  REQUIRE(run_tool({"edit", "--checkpoint", fx.checkpoint.string(), "--input", input, "--op", "interpolate",
                    "--alpha", "1", "--target", (fx.data / "00007.png").string(), "--class", "nose", "--out",
                    (dir.path() / "s").string()}) == 0);
  CHECK(read_file(dir.path() / "s" / "edit.png") == encode_label_png(part_swap(model, source, mask_of(7), 4)));

  REQUIRE(run_tool({"edit", "--checkpoint", fx.checkpoint.string(), "--input", input, "--op", "generate", "--class",
                    "hair", "--seed", "11", "--batch", "50", "--out", (dir.path() / "b").string()}) == 0);
  std::set<std::vector<std::uint8_t>> distinct;
  for (int k = 0; k < 50; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "edit_%03d.png", k);
    const auto bytes = read_file(dir.path() / "b" / name);
    CHECK(one_hot_encode(decode_label_png(bytes, 6)).is_valid());
    distinct.insert(bytes);
  }
  CHECK(distinct.size() == 50);

  // one plan through the CLI binary and through HTTP
  const std::string plan =
      R"({"seed": 21, "edits": [{"class": "mouth", "op": "generate", "truncation": 0.7}, {"class": "eyes", "op": "perturb", "noise_scale": 0.5, "seed": 4}]})";
  {
    std::ofstream(dir.path() / "plan.json") << plan;
  }
  REQUIRE(run_binary("edit --checkpoint " + fx.checkpoint.string() + " --input " + input + " --plan " +
                     (dir.path() / "plan.json").string() + " --out " + (dir.path() / "c").string()) == 0);
  const auto cli_bytes = read_file(dir.path() / "c" / "edit.png");
  CHECK(parse_edit_plan(read_file_text(dir.path() / "c" / "edit.json"), toy_palette(6)).edits.size() == 2);

  EditorService service(load_checkpoint(fx.checkpoint));
  TestServer server(service);
  auto cli = server.client();
  const httplib::Headers session{{"X-Session-Id", "parity"}};
  const auto png = read_file(input);
  auto up = cli.Post("/masks", session, std::string(png.begin(), png.end()), "image/png");
  REQUIRE(up);
  const std::string id = nlohmann::json::parse(up->body)["mask_id"];
  auto res = cli.Post("/masks/" + id + "/edit?format=png", session, plan, "application/json");
  REQUIRE(res);
  CHECK(res->body == std::string(cli_bytes.begin(), cli_bytes.end()));
}
