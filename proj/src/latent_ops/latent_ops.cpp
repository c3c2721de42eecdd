#include "maskvae/latent_ops.hpp"

#include <cmath>
#include <set>

#include "maskvae/errors.hpp"

namespace maskvae {

namespace {

constexpr std::uint64_t kEditStream = 0x65646974;

void check_row(const Codes& codes, int c, std::size_t b) {
  if (codes.codes.rank() != 3) throw InvalidInput("class codes must be [B, C, D]");
  if (c < 0 || static_cast<std::size_t>(c) >= codes.classes()) {
    throw InvalidInput("class index " + std::to_string(c) + " out of range for " +
                       std::to_string(codes.classes()) + " classes");
  }
  if (b >= codes.batch()) throw InvalidInput("batch index out of range");
}

}  // namespace

Codes generate_part(const Codes& codes, int c, Rng& rng, double truncation, std::size_t b) {
  check_row(codes, c, b);
  if (!(truncation >= 0)) throw InvalidInput("truncation must be non-negative");
  Codes out = codes;
  NormalSampler normal;
  for (auto& v : out.row(b, static_cast<std::size_t>(c))) {
    double z = normal(rng);
    while (truncation > 0 && std::abs(z) > truncation) z = normal(rng);
    v = static_cast<float>(z);
  }
  return out;
}

Codes perturb_part(const Codes& codes, int c, double noise_scale, Rng& rng, std::size_t b) {
  check_row(codes, c, b);
  if (!(noise_scale >= 0) || !std::isfinite(noise_scale)) throw InvalidInput("noise scale must be >= 0");
  Codes out = codes;
  if (noise_scale == 0.0) return out;
  NormalSampler normal;
  for (auto& v : out.row(b, static_cast<std::size_t>(c))) {
    v = static_cast<float>(v + noise_scale * normal(rng));
  }
  return out;
}

Codes interpolate_part(const Codes& source, const Codes& target, int c, double alpha, std::size_t b) {
  check_row(source, c, b);
  if (target.codes.shape() != source.codes.shape()) {
    throw InvalidInput("interpolation needs codes of equal shape, got " + shape_string(source.codes.shape()) +
                       " and " + shape_string(target.codes.shape()));
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("alpha must lie in [0, 1]");
  Codes out = source;
  auto dst = out.row(b, static_cast<std::size_t>(c));
  const auto t = target.row(b, static_cast<std::size_t>(c));
  if (alpha == 0.0) return out;
  if (alpha == 1.0) {
    std::copy(t.begin(), t.end(), dst.begin());
    return out;
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = static_cast<float>(alpha * t[i] + (1.0 - alpha) * dst[i]);
  }
  return out;
}

std::string to_string(EditOp op) {
  switch (op) {
    case EditOp::Generate: return "generate";
    case EditOp::Perturb: return "perturb";
    case EditOp::Interpolate: return "interpolate";
  }
  return "?";
}

EditOp parse_edit_op(const std::string& name) {
  if (name == "generate") return EditOp::Generate;
  if (name == "perturb") return EditOp::Perturb;
  if (name == "interpolate") return EditOp::Interpolate;
  throw InvalidInput("unknown edit op '" + name + "' (expected generate, perturb or interpolate)");
}

void validate_plan(const EditPlan& plan, int class_count) {
  std::set<int> seen;
  for (const auto& e : plan.edits) {
    if (e.class_index < 0 || e.class_index >= class_count) {
      throw InvalidInput("edit class index " + std::to_string(e.class_index) + " out of range");
    }
    if (!seen.insert(e.class_index).second) {
      throw InvalidInput("more than one edit for class " + std::to_string(e.class_index));
    }
    if (!(e.alpha >= 0.0 && e.alpha <= 1.0)) throw InvalidInput("alpha must lie in [0, 1]");
    if (!(e.noise_scale >= 0.0) || !std::isfinite(e.noise_scale)) {
      throw InvalidInput("noise_scale must be a finite non-negative number");
    }
    if (!(e.truncation >= 0.0)) throw InvalidInput("truncation must be non-negative");
    if (e.op == EditOp::Interpolate && e.target.empty()) throw InvalidInput("interpolate edit needs a target");
  }
}

EditPlan edit_plan_from_json(const nlohmann::json& j, const ClassPalette& palette) {
  if (!j.is_object()) throw InvalidInput("edit plan must be a JSON object");
  EditPlan plan;
  for (const auto& [key, value] : j.items()) {
    if (key != "edits" && key != "seed") throw InvalidInput("unknown edit plan field '" + key + "'");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw InvalidInput("plan seed must be a non-negative integer");
    plan.seed = j["seed"].get<std::uint64_t>();
  }
  if (!j.contains("edits") || !j["edits"].is_array()) throw InvalidInput("edit plan needs an 'edits' array");
  for (const auto& item : j["edits"]) {
    if (!item.is_object()) throw InvalidInput("each edit must be a JSON object");
    Edit e;
    if (!item.contains("class")) throw InvalidInput("edit is missing 'class'");
    const auto& cls = item["class"];
    if (cls.is_string()) {
      e.class_index = palette.index_of(cls.get<std::string>());
    } else if (cls.is_number_integer()) {
      e.class_index = cls.get<int>();
    } else {
      throw InvalidInput("edit 'class' must be a name or an index");
    }
    if (!item.contains("op") || !item["op"].is_string()) throw InvalidInput("edit is missing 'op'");
    e.op = parse_edit_op(item["op"].get<std::string>());
    std::set<std::string> allowed{"class", "op"};
    switch (e.op) {
      case EditOp::Generate: allowed.insert({"seed", "truncation"}); break;
      case EditOp::Perturb: allowed.insert({"seed", "noise_scale"}); break;
      case EditOp::Interpolate: allowed.insert({"alpha", "target"}); break;
    }
    for (const auto& [key, value] : item.items()) {
      if (!allowed.count(key)) {
        throw InvalidInput("field '" + key + "' is not valid for a " + to_string(e.op) + " edit");
      }
    }
    auto number = [&](const char* key, double& out) {
      if (!item.contains(key)) return;
      if (!item[key].is_number()) throw InvalidInput(std::string("'") + key + "' must be a number");
      out = item[key].get<double>();
    };
    number("alpha", e.alpha);
    number("noise_scale", e.noise_scale);
    number("truncation", e.truncation);
    if (e.op == EditOp::Interpolate && !item.contains("alpha")) throw InvalidInput("interpolate edit needs 'alpha'");
    if (item.contains("seed")) {
      if (!item["seed"].is_number_unsigned()) throw InvalidInput("edit seed must be a non-negative integer");
      e.seed = item["seed"].get<std::uint64_t>();
    }
    if (item.contains("target")) {
      if (!item["target"].is_string()) throw InvalidInput("'target' must be a string");
      e.target = item["target"].get<std::string>();
    }
    plan.edits.push_back(std::move(e));
  }
  validate_plan(plan, palette.size());
  return plan;
}

EditPlan parse_edit_plan(const std::string& text, const ClassPalette& palette) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("edit plan is not valid JSON: ") + e.what());
  }
  return edit_plan_from_json(j, palette);
}

nlohmann::json edit_plan_to_json(const EditPlan& plan, const ClassPalette& palette) {
  nlohmann::json edits = nlohmann::json::array();
  for (const auto& e : plan.edits) {
    nlohmann::json item{{"class", palette[e.class_index].name}, {"op", to_string(e.op)}};
    switch (e.op) {
      case EditOp::Generate:
        if (e.truncation > 0) item["truncation"] = e.truncation;
        if (e.seed) item["seed"] = *e.seed;
        break;
      case EditOp::Perturb:
        item["noise_scale"] = e.noise_scale;
        if (e.seed) item["seed"] = *e.seed;
        break;
      case EditOp::Interpolate:
        item["alpha"] = e.alpha;
        item["target"] = e.target;
        break;
    }
    edits.push_back(item);
  }
  return {{"seed", plan.seed}, {"edits", edits}};
}

Rng edit_rng(const EditPlan& plan, const Edit& edit) {
  return make_rng(edit.seed.value_or(plan.seed), kEditStream + static_cast<std::uint64_t>(edit.class_index));
}

Codes encode_mask(const Model& model, const LabelMap& mask) {
  const auto& cfg = model.config();
  if (mask.class_count != cfg.class_count || mask.height != cfg.mask_size || mask.width != cfg.mask_size) {
    throw InvalidInput("mask is " + std::to_string(mask.height) + "x" + std::to_string(mask.width) + " with " +
                       std::to_string(mask.class_count) + " classes; the model expects " +
                       std::to_string(cfg.mask_size) + "x" + std::to_string(cfg.mask_size) + " with " +
                       std::to_string(cfg.class_count));
  }
  const std::vector<LabelMap> one{mask};
  return Codes{model.encode(masks_to_tensor<float>(one)).mu};
}

LabelMap decode_to_mask(const Model& model, const Codes& codes) {
  return one_hot_decode(model.decode_codes(codes));
}

Codes apply_edits(const Codes& codes, const EditPlan& plan, const TargetResolver& targets) {
  validate_plan(plan, static_cast<int>(codes.classes()));
  Codes out = codes;
  for (const auto& e : plan.edits) {
    switch (e.op) {
      case EditOp::Generate: {
        Rng rng = edit_rng(plan, e);
        out = generate_part(out, e.class_index, rng, e.truncation);
        break;
      }
      case EditOp::Perturb: {
        Rng rng = edit_rng(plan, e);
        out = perturb_part(out, e.class_index, e.noise_scale, rng);
        break;
      }
      case EditOp::Interpolate: {
        if (!targets) throw InvalidInput("interpolate edit given but no target masks are available");
        out = interpolate_part(out, targets(e.target), e.class_index, e.alpha);
        break;
      }
    }
  }
  return out;
}

EditResult apply_edit_plan(const Model& model, const Codes& source, const EditPlan& plan,
                           const TargetResolver& targets) {
  if (source.codes.rank() != 3 || source.batch() != 1) throw InvalidInput("edit plans apply to a single mask");
  EditResult r;
  r.original = source;
  r.edited = apply_edits(source, plan, targets);
  r.logits = model.decode_codes(r.edited);
  r.mask = one_hot_decode(r.logits);
  return r;
}

EditResult apply_edit_plan(const Model& model, const LabelMap& source, const EditPlan& plan,
                           const TargetResolver& targets) {
  return apply_edit_plan(model, encode_mask(model, source), plan, targets);
}

std::vector<LabelMap> interpolation_sweep(const Model& model, const Codes& source, const Codes& target, int c,
                                          int steps) {
  if (steps < 2) throw InvalidInput("an interpolation sweep needs at least 2 steps");
  std::vector<LabelMap> out;
  for (int k = 0; k < steps; ++k) {
    const double alpha = k == steps - 1 ? 1.0 : static_cast<double>(k) / (steps - 1);
    out.push_back(decode_to_mask(model, interpolate_part(source, target, c, alpha)));
  }
  return out;
}

std::vector<std::uint64_t> changed_pixels_by_class(const LabelMap& before, const LabelMap& after) {
  if (before.height != after.height || before.width != after.width || before.class_count != after.class_count) {
    throw InvalidInput("cannot compare masks of different shape");
  }
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(after.class_count), 0);
  for (std::size_t i = 0; i < after.labels.size(); ++i) {
    if (before.labels[i] != after.labels[i]) ++counts[after.labels[i]];
  }
  return counts;
}

}  // namespace maskvae
