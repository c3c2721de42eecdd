#include "maskvae/service.hpp"

#include <cmath>

#include "httplib.h"
#include "maskvae/base64.hpp"
#include "maskvae/errors.hpp"
#include "maskvae/png_io.hpp"

namespace maskvae {

namespace {

constexpr int kPreviewSide = 256;

ApiError bad_request(const std::string& message) { return ApiError(400, "invalid_request", message); }

nlohmann::json parse_body(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw bad_request(std::string("body is not valid JSON: ") + e.what());
  }
}

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes, std::uint64_t h) {
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

LabelMap decode_mask_image(const std::vector<std::uint8_t>& png, const ClassPalette& palette) {
  const RawImage raw = decode_png(png);
  LabelMap mask;
  if (raw.channels == 1) {
    mask = decode_label_png(png, palette.size());
  } else if (raw.channels == 3) {
    mask = labels_from_color(RgbImage{raw.height, raw.width, raw.pixels}, palette);
  } else {
    throw InvalidInput("expected a single-channel label PNG or an RGB render");
  }
  mask.validate();
  return mask;
}

nlohmann::json ApiError::to_json() const { return {{"error", {{"code", code_}, {"message", what()}}}}; }

std::string checkpoint_fingerprint(const std::filesystem::path& dir) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(read_file(dir / "params.bin"), h);
  h = fnv1a(read_file(dir / "config.json"), h);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

EditorService::EditorService(Checkpoint checkpoint)
    : checkpoint_(std::move(checkpoint)), checkpoint_id_(checkpoint_fingerprint(checkpoint_->dir)) {}

const Checkpoint& EditorService::checkpoint() const {
  require_model();
  return *checkpoint_;
}

void EditorService::require_model() const {
  if (!checkpoint_) throw ApiError(503, "model_not_loaded", "no checkpoint is loaded");
}

void EditorService::check_checkpoint(const std::string& requested) const {
  require_model();
  if (!requested.empty() && requested != checkpoint_id_) {
    throw ApiError(409, "checkpoint_mismatch",
                   "request pins checkpoint " + requested + " but " + checkpoint_id_ + " is loaded");
  }
}

nlohmann::json EditorService::health() const {
  require_model();
  const auto& cfg = checkpoint_->meta.config.model;
  return {{"status", "ok"},
          {"checkpoint", checkpoint_id_},
          {"epoch", checkpoint_->meta.epoch},
          {"classes", cfg.class_count},
          {"mask_size", cfg.mask_size}};
}

nlohmann::json EditorService::classes() const {
  require_model();
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : checkpoint_->meta.palette.entries()) {
    out.push_back({{"index", e.index}, {"name", e.name}, {"color", format_color(e.color)}});
  }
  return {{"classes", out}, {"checkpoint", checkpoint_id_}};
}

std::shared_ptr<EditorService::Session> EditorService::session(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  auto& s = sessions_[id];
  if (!s) s = std::make_shared<Session>();
  return s;
}

EditorService::StoredMask& EditorService::find_mask(Session& s, const std::string& mask_id) {
  const auto it = s.masks.find(mask_id);
  if (it == s.masks.end()) throw ApiError(404, "unknown_mask", "no mask '" + mask_id + "' in this session");
  return it->second;
}

const Codes& EditorService::codes_of(StoredMask& m) const {
  if (!m.codes) m.codes = encode_mask(checkpoint_->model, m.mask);
  return *m.codes;
}

const LabelMap& EditorService::reconstruction_of(StoredMask& m) const {
  if (!m.reconstruction) m.reconstruction = decode_to_mask(checkpoint_->model, codes_of(m));
  return *m.reconstruction;
}

std::string EditorService::preview_base64(const LabelMap& mask) const {
  return base64_encode(
      encode_rgb_png(downscale_preview(render_color(mask, checkpoint_->meta.palette), kPreviewSide)));
}

nlohmann::json EditorService::upload(const std::string& session_id, const std::vector<std::uint8_t>& png) {
  require_model();
  const auto& palette = checkpoint_->meta.palette;
  const auto& cfg = checkpoint_->meta.config.model;
  LabelMap mask;
  try {
    mask = decode_mask_image(png, palette);
  } catch (const FormatError& e) {
    throw ApiError(400, "invalid_mask", e.what());
  } catch (const InvalidInput& e) {
    throw ApiError(400, "invalid_mask", e.what());
  }
  if (mask.height != cfg.mask_size || mask.width != cfg.mask_size) {
    throw ApiError(409, "config_mismatch",
                   "mask is " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                       " but the checkpoint was trained on " + std::to_string(cfg.mask_size) + "x" +
                       std::to_string(cfg.mask_size));
  }
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  const std::string id = "m" + std::to_string(s->next_id++);
  const auto preview = preview_base64(mask);
  s->masks.emplace(id, StoredMask{std::move(mask), std::nullopt, std::nullopt});
  return {{"mask_id", id}, {"preview", preview}};
}

nlohmann::json EditorService::encode(const std::string& session_id, const std::string& mask_id) {
  require_model();
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  auto& m = find_mask(*s, mask_id);
  const auto& codes = codes_of(m);
  nlohmann::json norms = nlohmann::json::array();
  for (std::size_t c = 0; c < codes.classes(); ++c) {
    double sq = 0.0;
    for (float v : codes.row(0, c)) sq += static_cast<double>(v) * v;
    norms.push_back(std::sqrt(sq));
  }
  return {{"latent_id", mask_id},
          {"checkpoint", checkpoint_id_},
          {"classes", codes.classes()},
          {"dim", codes.dim()},
          {"norms", norms}};
}

EditReply EditorService::edit(const std::string& session_id, const std::string& mask_id,
                              const std::string& plan_json) {
  require_model();
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  auto& m = find_mask(*s, mask_id);
  EditPlan plan;
  try {
    plan = parse_edit_plan(plan_json, checkpoint_->meta.palette);
  } catch (const InvalidInput& e) {
    throw ApiError(400, "invalid_plan", e.what());
  }
  const TargetResolver targets = [&](const std::string& target) -> Codes {
    return codes_of(find_mask(*s, target));
  };
  const auto result = apply_edit_plan(checkpoint_->model, codes_of(m), plan, targets);
  const auto changed = changed_pixels_by_class(reconstruction_of(m), result.mask);
  nlohmann::json per_class = nlohmann::json::object();
  std::uint64_t total = 0;
  for (std::size_t c = 0; c < changed.size(); ++c) {
    per_class[checkpoint_->meta.palette[static_cast<int>(c)].name] = changed[c];
    total += changed[c];
  }
  EditReply reply;
  reply.mask_png = encode_label_png(result.mask);
  reply.body = {{"mask_id", mask_id},
                {"mask_png", base64_encode(reply.mask_png)},
                {"preview_png", preview_base64(result.mask)},
                {"changed_pixels", per_class},
                {"changed_total", total},
                {"plan", edit_plan_to_json(plan, checkpoint_->meta.palette)}};
  return reply;
}

nlohmann::json EditorService::interpolate(const std::string& session_id, const std::string& request_json) {
  require_model();
  const auto j = parse_body(request_json);
  if (!j.is_object()) throw bad_request("body must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "source_id" && key != "target_id" && key != "class" && key != "alpha" && key != "steps") {
      throw bad_request("unknown field '" + key + "'");
    }
  }
  if (!j.contains("source_id") || !j["source_id"].is_string() || !j.contains("target_id") ||
      !j["target_id"].is_string()) {
    throw bad_request("source_id and target_id are required strings");
  }
  if (!j.contains("class")) throw bad_request("class is required");
  int c = 0;
  try {
    if (j["class"].is_string()) {
      c = checkpoint_->meta.palette.index_of(j["class"].get<std::string>());
    } else if (j["class"].is_number_integer()) {
      c = j["class"].get<int>();
      if (c < 0 || c >= checkpoint_->meta.palette.size()) throw InvalidInput("class index out of range");
    } else {
      throw InvalidInput("class must be a name or an index");
    }
  } catch (const InvalidInput& e) {
    throw bad_request(e.what());
  }
  const bool has_alpha = j.contains("alpha"), has_steps = j.contains("steps");
  if (has_alpha == has_steps) throw bad_request("give exactly one of alpha or steps");
  std::vector<double> alphas;
  if (has_alpha) {
    if (!j["alpha"].is_number()) throw bad_request("alpha must be a number");
    const double a = j["alpha"].get<double>();
    if (!(a >= 0.0 && a <= 1.0)) throw bad_request("alpha must lie in [0, 1]");
    alphas.push_back(a);
  } else {
    if (!j["steps"].is_number_integer() || j["steps"].get<int>() < 2 || j["steps"].get<int>() > 101) {
      throw bad_request("steps must be an integer in [2, 101]");
    }
    const int steps = j["steps"].get<int>();
    for (int k = 0; k < steps; ++k) alphas.push_back(k == steps - 1 ? 1.0 : static_cast<double>(k) / (steps - 1));
  }
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  const auto& source = codes_of(find_mask(*s, j["source_id"].get<std::string>()));
  const auto& target = codes_of(find_mask(*s, j["target_id"].get<std::string>()));
  nlohmann::json masks = nlohmann::json::array();
  for (double a : alphas) {
    const auto mask = decode_to_mask(checkpoint_->model, interpolate_part(source, target, c, a));
    masks.push_back({{"alpha", a}, {"mask_png", base64_encode(encode_label_png(mask))},
                     {"preview_png", preview_base64(mask)}});
  }
  return {{"class", checkpoint_->meta.palette[c].name}, {"masks", masks}};
}

std::vector<std::uint8_t> EditorService::mask_png(const std::string& session_id, const std::string& mask_id) {
  require_model();
  auto s = session(session_id);
  std::lock_guard lock(s->mutex);
  return encode_label_png(find_mask(*s, mask_id).mask);
}

namespace {

std::string session_of(const httplib::Request& req) {
  const auto id = req.get_header_value("X-Session-Id");
  return id.empty() ? "default" : id;
}

void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_png(httplib::Response& res, const std::vector<std::uint8_t>& png) {
  res.status = 200;
  res.set_content(std::string(png.begin(), png.end()), "image/png");
}

template <typename F>
httplib::Server::Handler guarded(EditorService& service, F f) {
  return [&service, f](const httplib::Request& req, httplib::Response& res) {
    try {
      service.check_checkpoint(req.get_header_value("X-Checkpoint"));
      f(req, res);
    } catch (const ApiError& e) {
      send_json(res, e.to_json(), e.status());
    } catch (const InvalidInput& e) {
      send_json(res, ApiError(400, "invalid_request", e.what()).to_json(), 400);
    }
  };
}

}  // namespace

void register_routes(httplib::Server& server, EditorService& service) {
  server.Get("/healthz", guarded(service, [&](const httplib::Request&, httplib::Response& res) {
               send_json(res, service.health());
             }));
  server.Get("/classes", guarded(service, [&](const httplib::Request&, httplib::Response& res) {
               send_json(res, service.classes());
             }));
  server.Post("/masks", guarded(service, [&](const httplib::Request& req, httplib::Response& res) {
                std::vector<std::uint8_t> png;
                if (req.get_header_value("Content-Type").rfind("application/json", 0) == 0) {
                  const auto j = parse_body(req.body);
                  if (!j.is_object() || !j.contains("png") || !j["png"].is_string()) {
                    throw bad_request("expected {\"png\": <base64>}");
                  }
                  png = base64_decode(j["png"].get<std::string>());
                } else {
                  png.assign(req.body.begin(), req.body.end());
                }
                send_json(res, service.upload(session_of(req), png), 201);
              }));
  server.Get(R"(/masks/([A-Za-z0-9]+))", guarded(service, [&](const httplib::Request& req, httplib::Response& res) {
               send_png(res, service.mask_png(session_of(req), req.matches[1]));
             }));
  server.Post(R"(/masks/([A-Za-z0-9]+)/encode)",
              guarded(service, [&](const httplib::Request& req, httplib::Response& res) {
                send_json(res, service.encode(session_of(req), req.matches[1]));
              }));
  server.Post(R"(/masks/([A-Za-z0-9]+)/edit)",
              guarded(service, [&](const httplib::Request& req, httplib::Response& res) {
                const auto reply = service.edit(session_of(req), req.matches[1], req.body);
                if (req.get_param_value("format") == "png") {
                  send_png(res, reply.mask_png);
                } else {
                  send_json(res, reply.body);
                }
              }));
  server.Post("/interpolate", guarded(service, [&](const httplib::Request& req, httplib::Response& res) {
                send_json(res, service.interpolate(session_of(req), req.body));
              }));
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.status == 404 && res.body.empty()) {
      send_json(res, ApiError(404, "not_found", "no such route").to_json(), 404);
    }
  });
}

}  // namespace maskvae
