#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "maskvae/mask.hpp"
#include "maskvae/model.hpp"
#include "maskvae/palette.hpp"

namespace maskvae {

using Codes = ClassEmbeddings<float>;

// Row c of batch element b replaced by an i.i.d. N(0, 1) sample. With
// truncation > 0 every coordinate is redrawn until |z| <= truncation.
Codes generate_part(const Codes& codes, int c, Rng& rng, double truncation = 0.0, std::size_t b = 0);

// Row c += noise_scale * z, z ~ N(0, I). noise_scale 0 returns the input.
Codes perturb_part(const Codes& codes, int c, double noise_scale, Rng& rng, std::size_t b = 0);

// Row c of source becomes alpha * target_c + (1 - alpha) * source_c; the
// other rows stay those of source.
Codes interpolate_part(const Codes& source, const Codes& target, int c, double alpha, std::size_t b = 0);

enum class EditOp { Generate, Perturb, Interpolate };

std::string to_string(EditOp op);
EditOp parse_edit_op(const std::string& name);

struct Edit {
  int class_index = 0;
  EditOp op = EditOp::Generate;
  double alpha = 0.0;                  // interpolate
  double noise_scale = 1.0;            // perturb
  double truncation = 0.0;             // generate; 0: none
  std::optional<std::uint64_t> seed;   // generate / perturb
  std::string target;                  // interpolate: reference to the target mask
  bool operator==(const Edit&) const = default;
};

struct EditPlan {
  std::vector<Edit> edits;
  std::uint64_t seed = 0;  // for edits without their own seed
  bool operator==(const EditPlan&) const = default;
};

// Throws InvalidInput: class out of range, repeated class, alpha outside
// [0, 1], negative noise scale, interpolate without target.
void validate_plan(const EditPlan& plan, int class_count);

// {"seed": s, "edits": [{"class": "nose" | 3, "op": "perturb", "noise_scale": 0.5,
//   "seed": 7}, {"class": "hair", "op": "interpolate", "alpha": 0.5, "target": "t.png"}]}
// Unknown fields and fields that do not belong to the op are rejected.
EditPlan edit_plan_from_json(const nlohmann::json& j, const ClassPalette& palette);
EditPlan parse_edit_plan(const std::string& text, const ClassPalette& palette);
nlohmann::json edit_plan_to_json(const EditPlan& plan, const ClassPalette& palette);

// Random stream of one edit: its own seed, or the plan seed, split by class.
Rng edit_rng(const EditPlan& plan, const Edit& edit);

// Pre-LSTM codes of a single mask (inference mode: the means).
Codes encode_mask(const Model& model, const LabelMap& mask);

LabelMap decode_to_mask(const Model& model, const Codes& codes);

using TargetResolver = std::function<Codes(const std::string& target)>;

// Applies the edits in order to the codes.
Codes apply_edits(const Codes& codes, const EditPlan& plan, const TargetResolver& targets);

struct EditResult {
  Codes original;
  Codes edited;
  Tensor<float> logits;  // [1, C, H, W]
  LabelMap mask;
};

// Edits the pre-LSTM codes, then runs one lstm -> feed-forward -> decode ->
// argmax pass.
EditResult apply_edit_plan(const Model& model, const Codes& source, const EditPlan& plan,
                           const TargetResolver& targets = {});
EditResult apply_edit_plan(const Model& model, const LabelMap& source, const EditPlan& plan,
                           const TargetResolver& targets = {});

// Masks for alpha = k / (steps - 1), k = 0 .. steps - 1.
std::vector<LabelMap> interpolation_sweep(const Model& model, const Codes& source, const Codes& target, int c,
                                          int steps);

// For each class, the number of pixels that changed label and now carry
// that class.
std::vector<std::uint64_t> changed_pixels_by_class(const LabelMap& before, const LabelMap& after);

}  // namespace maskvae
