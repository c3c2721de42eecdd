#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "maskvae/checkpoint.hpp"
#include "maskvae/latent_ops.hpp"

namespace httplib {
class Server;
}

namespace maskvae {

// Error with an HTTP status and a machine-readable code:
//   400 invalid_request | invalid_mask | invalid_plan
//   404 unknown_mask | not_found
//   409 checkpoint_mismatch | config_mismatch
//   503 model_not_loaded
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }
  nlohmann::json to_json() const;

 private:
  int status_;
  std::string code_;
};

struct EditReply {
  nlohmann::json body;
  std::vector<std::uint8_t> mask_png;
};

// Editor backend. Sessions are keyed by the X-Session-Id header; each keeps
// its uploaded masks and their cached codes. Requests on one session are
// serialised, different sessions run concurrently against the read-only
// model.
class EditorService {
 public:
  EditorService() = default;  // no model: model routes answer 503
  explicit EditorService(Checkpoint checkpoint);

  bool ready() const { return checkpoint_.has_value(); }
  const std::string& checkpoint_id() const { return checkpoint_id_; }
  const Checkpoint& checkpoint() const;

  nlohmann::json health() const;
  nlohmann::json classes() const;
  // Label PNG (pixel = class index) or a colour render in palette colours.
  nlohmann::json upload(const std::string& session, const std::vector<std::uint8_t>& png);
  nlohmann::json encode(const std::string& session, const std::string& mask_id);
  // Interpolation targets in the plan name mask ids of the same session.
  EditReply edit(const std::string& session, const std::string& mask_id, const std::string& plan_json);
  // {source_id, target_id, class, alpha} or {..., steps}.
  nlohmann::json interpolate(const std::string& session, const std::string& request_json);
  std::vector<std::uint8_t> mask_png(const std::string& session, const std::string& mask_id);

  // 409 when a client pins a different checkpoint.
  void check_checkpoint(const std::string& requested) const;

 private:
  struct StoredMask {
    LabelMap mask;
    std::optional<Codes> codes;
    std::optional<LabelMap> reconstruction;
  };
  struct Session {
    std::mutex mutex;
    std::map<std::string, StoredMask> masks;
    std::uint64_t next_id = 1;
  };

  void require_model() const;
  std::shared_ptr<Session> session(const std::string& id);
  static StoredMask& find_mask(Session& s, const std::string& mask_id);
  const Codes& codes_of(StoredMask& m) const;
  const LabelMap& reconstruction_of(StoredMask& m) const;
  std::string preview_base64(const LabelMap& mask) const;

  std::optional<Checkpoint> checkpoint_;
  std::string checkpoint_id_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// Label PNG (pixel = class index) or an RGB render in palette colours.
// Throws InvalidInput or FormatError.
LabelMap decode_mask_image(const std::vector<std::uint8_t>& png, const ClassPalette& palette);

// Content hash of a checkpoint directory (params and sidecar).
std::string checkpoint_fingerprint(const std::filesystem::path& dir);

// Routes: GET /healthz, GET /classes, POST /masks, GET /masks/{id},
// POST /masks/{id}/encode, POST /masks/{id}/edit, POST /interpolate.
void register_routes(httplib::Server& server, EditorService& service);

}  // namespace maskvae
