#include "maskvae/checkpoint.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include "maskvae/errors.hpp"
#include "maskvae/tensor_io.hpp"

namespace maskvae {

namespace fs = std::filesystem;

nlohmann::json metrics_to_json(const SegMetrics& m) {
  nlohmann::json ious = nlohmann::json::array();
  for (const auto& v : m.per_class_iou) ious.push_back(v ? nlohmann::json(*v) : nlohmann::json());
  return {{"pixel_accuracy", m.pixel_accuracy}, {"mean_iou", m.mean_iou}, {"per_class_iou", ious}};
}

SegMetrics metrics_from_json(const nlohmann::json& j) {
  SegMetrics m;
  j.at("pixel_accuracy").get_to(m.pixel_accuracy);
  j.at("mean_iou").get_to(m.mean_iou);
  for (const auto& v : j.at("per_class_iou")) {
    m.per_class_iou.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  }
  return m;
}

namespace {

nlohmann::json meta_to_json(const CheckpointMeta& meta) {
  nlohmann::json palette = nlohmann::json::array();
  for (const auto& e : meta.palette.entries()) {
    palette.push_back({{"index", e.index}, {"name", e.name}, {"color", format_color(e.color)}});
  }
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : meta.epochs) {
    nlohmann::json row{{"epoch", e.epoch}, {"wce", e.wce}, {"kl", e.kl}, {"total", e.total},
                       {"seconds", e.seconds}};
    if (e.eval) row["eval"] = metrics_to_json(*e.eval);
    epochs.push_back(row);
  }
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : meta.steps) steps.push_back({s.epoch, s.step, s.wce, s.kl, s.total});
  return {{"format", "maskvae-checkpoint-1"},
          {"model", meta.config.model},
          {"loss",
           {{"kl_weight", meta.config.loss.kl_weight},
            {"use_weighted_ce", meta.config.loss.use_weighted_ce},
            {"class_weights", meta.config.loss.class_weights.w}}},
          {"train", meta.config.train},
          {"palette", palette},
          {"epoch", meta.epoch},
          {"step", meta.step},
          {"history", {{"epochs", epochs}, {"steps", steps}}}};
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta meta;
  if (j.value("format", "") != "maskvae-checkpoint-1") throw FormatError("unknown checkpoint format");
  meta.config.model = j.at("model").get<ModelConfig>();
  const auto& loss = j.at("loss");
  loss.at("kl_weight").get_to(meta.config.loss.kl_weight);
  loss.at("use_weighted_ce").get_to(meta.config.loss.use_weighted_ce);
  loss.at("class_weights").get_to(meta.config.loss.class_weights.w);
  meta.config.train = j.at("train").get<TrainConfig>();
  std::vector<PaletteEntry> entries;
  for (const auto& e : j.at("palette")) {
    entries.push_back({e.at("index").get<int>(), e.at("name").get<std::string>(),
                       parse_color(e.at("color").get<std::string>())});
  }
  meta.palette = ClassPalette(std::move(entries));
  j.at("epoch").get_to(meta.epoch);
  j.at("step").get_to(meta.step);
  const auto& history = j.at("history");
  for (const auto& e : history.at("epochs")) {
    EpochRecord r;
    e.at("epoch").get_to(r.epoch);
    e.at("wce").get_to(r.wce);
    e.at("kl").get_to(r.kl);
    e.at("total").get_to(r.total);
    e.at("seconds").get_to(r.seconds);
    if (e.contains("eval")) r.eval = metrics_from_json(e.at("eval"));
    meta.epochs.push_back(r);
  }
  for (const auto& s : history.at("steps")) {
    meta.steps.push_back({s.at(0).get<int>(), s.at(1).get<std::uint64_t>(), s.at(2).get<double>(),
                          s.at(3).get<double>(), s.at(4).get<double>()});
  }
  return meta;
}

}  // namespace

fs::path epoch_directory(const fs::path& run_dir, int epoch) {
  return run_dir / ("epoch_" + std::to_string(epoch));
}

void save_checkpoint(const fs::path& dir, const Model& model, const CheckpointMeta& meta,
                     const Adam<float>* optimizer) {
  if (meta.palette.size() != meta.config.model.class_count) {
    throw MismatchError("palette size does not match the model class count");
  }
  fs::create_directories(dir);
  std::vector<NamedTensor> tensors;
  for (const auto* p : model.parameters()) tensors.push_back({p->name, p->value});
  write_tensors(dir / "params.bin", tensors);
  if (optimizer) optimizer->save(dir / "optimizer.bin");
  std::ofstream out(dir / "config.json", std::ios::trunc);
  out << meta_to_json(meta).dump(1) << "\n";
  if (!out) throw std::runtime_error("cannot write " + (dir / "config.json").string());
}

fs::path resolve_checkpoint(const fs::path& path) {
  if (fs::exists(path / "config.json") && fs::exists(path / "params.bin")) return path;
  if (!fs::is_directory(path)) throw InvalidInput("checkpoint not found: " + path.string());
  static const std::regex pattern(R"(epoch_([0-9]+))");
  int best = -1;
  for (const auto& entry : fs::directory_iterator(path)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, pattern) &&
        fs::exists(entry.path() / "params.bin")) {
      best = std::max(best, std::stoi(m[1]));
    }
  }
  if (best < 0) throw InvalidInput("no checkpoint under " + path.string());
  return epoch_directory(path, best);
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
  std::ifstream in(dir / "config.json");
  if (!in) throw InvalidInput("missing " + (dir / "config.json").string());
  try {
    return meta_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint sidecar " + (dir / "config.json").string() + ": " + e.what());
  } catch (const InvalidInput& e) {
    throw FormatError("bad checkpoint sidecar " + (dir / "config.json").string() + ": " + e.what());
  }
}

void load_parameters(Model& model, const fs::path& params_file) {
  const auto tensors = read_tensors(params_file);
  auto params = model.parameters();
  if (tensors.size() != params.size()) {
    throw MismatchError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                        std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (tensors[i].name != params[i]->name || tensors[i].value.shape() != params[i]->value.shape()) {
      throw MismatchError("checkpoint tensor " + tensors[i].name + " " + shape_string(tensors[i].value.shape()) +
                          " does not match model parameter " + params[i]->name + " " +
                          shape_string(params[i]->value.shape()));
    }
    params[i]->value = tensors[i].value;
  }
}

Checkpoint load_checkpoint(const fs::path& path) {
  const fs::path dir = resolve_checkpoint(path);
  CheckpointMeta meta = read_checkpoint_meta(dir);
  try {
    meta.config.model.validate();
  } catch (const ConfigError& e) {
    throw MismatchError(std::string("checkpoint config is invalid: ") + e.what());
  }
  if (meta.palette.size() != meta.config.model.class_count) {
    throw MismatchError("checkpoint palette does not match its class count");
  }
  if (!meta.config.loss.class_weights.w.empty() &&
      static_cast<int>(meta.config.loss.class_weights.w.size()) != meta.config.model.class_count) {
    throw MismatchError("checkpoint class weights do not match its class count");
  }
  Model model(meta.config.model);
  load_parameters(model, dir / "params.bin");
  return {dir, std::move(meta), std::move(model)};
}

}  // namespace maskvae
