#include "maskvae/cli.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "maskvae/ablation.hpp"
#include "maskvae/errors.hpp"
#include "maskvae/png_io.hpp"
#include "maskvae/run_config.hpp"
#include "maskvae/service.hpp"
#include "maskvae/sis_export.hpp"
#include "maskvae/toy_masks.hpp"
#include "maskvae/trainer.hpp"

#include "httplib.h"

namespace fs = std::filesystem;

namespace maskvae {

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

ClassPalette palette_from(const std::string& palette_path, const std::string& checkpoint) {
  if (!palette_path.empty()) return read_palette(palette_path);
  if (!checkpoint.empty()) return read_checkpoint_meta(resolve_checkpoint(checkpoint)).palette;
  throw InvalidInput("give --palette or --checkpoint");
}

std::string format_metrics(const SegMetrics& m, const ClassPalette& palette) {
  std::ostringstream ss;
  ss << "acc " << m.pixel_accuracy << "  miou " << m.mean_iou << "\n";
  for (std::size_t c = 0; c < m.per_class_iou.size(); ++c) {
    ss << "  " << palette[static_cast<int>(c)].name << " ";
    if (m.per_class_iou[c]) {
      ss << *m.per_class_iou[c];
    } else {
      ss << "n/a";
    }
    ss << "\n";
  }
  return ss.str();
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad seed '" + item + "' in --seeds");
    seeds.push_back(v);
  }
  if (seeds.empty()) throw ConfigError("--seeds is empty");
  return seeds;
}

RunConfig config_for_data(const MaskDataset& data, const std::string& config_path) {
  if (data.masks.empty()) throw InvalidInput("dataset has no masks");
  RunConfig base;
  base.model.class_count = data.palette.size();
  base.model.mask_size = data.masks.front().height;
  return config_path.empty() ? parse_run_config("", base) : parse_run_config(read_text(config_path), base);
}

struct Context {
  std::ostream& out;
  std::ostream& err;
};

int cmd_synth(const Context& ctx, int count, int classes, int size, std::uint64_t seed, const fs::path& out_dir) {
  if (count <= 0) throw ConfigError("--count must be positive");
  MaskDataset data;
  data.palette = toy_palette(classes);
  const ToyMaskConfig cfg{classes, size, size};
  for (int i = 0; i < count; ++i) {
    SemanticMask m = generate_toy_mask(seed * 1000003ULL + static_cast<std::uint64_t>(i), cfg);
    m.validate();
    char name[16];
    std::snprintf(name, sizeof(name), "%05d", i);
    data.names.push_back(name);
    data.masks.push_back(one_hot_decode(m));
  }
  save_mask_directory(data, out_dir);
  ctx.out << "wrote " << count << " masks to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const Context& ctx, const std::string& config_path, const fs::path& data_dir, const fs::path& run_dir,
              const std::string& resume, std::optional<std::uint64_t> seed, int epochs) {
  const MaskDataset data = load_mask_directory(data_dir);
  RunConfig cfg = config_for_data(data, config_path);
  if (seed) cfg.train.seed = *seed;
  if (epochs > 0) cfg.train.epochs = epochs;
  cfg.train.validate();
  Model model = make_model(cfg);
  TrainOptions opts;
  opts.run_dir = run_dir;
  if (!resume.empty()) opts.resume_from = resolve_checkpoint(resume);
  opts.log = [&](const std::string& line) { ctx.out << line << "\n" << std::flush; };
  const auto report = train(model, data, cfg, opts);
  if (!report.epochs.empty() && report.epochs.back().eval) {
    ctx.out << "final " << format_metrics(*report.epochs.back().eval, data.palette);
  }
  ctx.out << "checkpoint " << epoch_directory(run_dir, cfg.train.epochs).string() << "\n";
  return 0;
}

int cmd_eval(const Context& ctx, const std::string& checkpoint, const fs::path& data_dir, const std::string& split,
             const fs::path& out_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const MaskDataset data = load_mask_directory(data_dir);
  check_dataset(data, ck.meta.config.model);
  if (data.palette != ck.meta.palette) throw InvalidInput("dataset palette differs from the checkpoint's");
  std::vector<std::size_t> indices;
  if (split == "all") {
    indices.resize(data.masks.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  } else {
    const auto s = split_indices(data.masks.size(), ck.meta.config.train.test_ratio, ck.meta.config.train.split_seed);
    indices = split == "train" ? s.train : s.test;
  }
  if (indices.empty()) throw InvalidInput("split '" + split + "' is empty");
  const SegMetrics m = evaluate(ck.model, data, indices, ck.meta.config.train.batch_size);
  ctx.out << "split " << split << " (" << indices.size() << " masks)  " << format_metrics(m, data.palette);
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_class_iou_csv(out_dir / "class_iou.csv", m, data.palette);
    nlohmann::json j = metrics_to_json(m);
    j["split"] = split;
    j["count"] = indices.size();
    j["checkpoint"] = ck.dir.string();
    write_text(out_dir / "eval.json", j.dump(2) + "\n");
  }
  return 0;
}

int cmd_ablation(const Context& ctx, const std::string& config_path, const fs::path& data_dir,
                 const std::string& seeds_text, const std::string& variants_text, const fs::path& out_dir) {
  const MaskDataset data = load_mask_directory(data_dir);
  const RunConfig cfg = config_for_data(data, config_path);
  const auto seeds = parse_seed_list(seeds_text);
  const auto all = standard_ablation_variants();
  std::vector<AblationVariant> variants;
  if (variants_text.empty()) {
    variants = all;
  } else {
    for (auto k : parse_seed_list(variants_text)) {
      if (k < 1 || k > all.size()) throw ConfigError("--variants takes row numbers 1.." + std::to_string(all.size()));
      variants.push_back(all[k - 1]);
    }
  }
  AblationOptions opts;
  opts.run_root = out_dir / "runs";
  opts.log = [&](const std::string& line) { ctx.out << line << "\n" << std::flush; };
  const auto rows = run_ablation(data, cfg, variants, seeds, opts);
  const auto md = format_ablation_markdown(rows);
  write_text(out_dir / "ablation.md", md);
  write_text(out_dir / "ablation.csv", format_ablation_csv(rows, data.palette));
  ctx.out << md;
  return 0;
}

struct EditArgs {
  std::string checkpoint, input, plan, op, class_name, target, out;
  std::optional<double> alpha, noise_scale, truncation;
  std::optional<std::uint64_t> seed;
  int batch = 0;
};

int cmd_edit(const Context& ctx, const EditArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const auto& palette = ck.meta.palette;
  EditPlan plan;
  if (!a.plan.empty()) {
    if (!a.op.empty()) throw InvalidInput("give either --plan or --op, not both");
    plan = parse_edit_plan(read_text(a.plan), palette);
  } else if (!a.op.empty()) {
    if (a.class_name.empty()) throw InvalidInput("--op needs --class");
    Edit e;
    e.op = parse_edit_op(a.op);
    e.class_index = palette.index_of(a.class_name);
    if (e.op == EditOp::Interpolate) {
      if (!a.alpha || a.target.empty()) throw InvalidInput("interpolate needs --alpha and --target");
      e.alpha = *a.alpha;
      e.target = a.target;
    } else if (a.alpha || !a.target.empty()) {
      throw InvalidInput("--alpha and --target only apply to interpolate");
    }
    if (e.op == EditOp::Perturb && a.noise_scale) e.noise_scale = *a.noise_scale;
    if (e.op == EditOp::Generate && a.truncation) e.truncation = *a.truncation;
    plan.edits.push_back(e);
  }
  if (a.seed) plan.seed = *a.seed;
  validate_plan(plan, palette.size());

  const LabelMap source = decode_mask_image(read_file(a.input), palette);
  const auto& cfg = ck.meta.config.model;
  if (source.height != cfg.mask_size || source.width != cfg.mask_size) {
    throw InvalidInput("input mask size does not match the checkpoint (" + std::to_string(cfg.mask_size) + ")");
  }
  const TargetResolver targets = [&](const std::string& target) {
    const LabelMap t = decode_mask_image(read_file(target), palette);
    if (t.height != cfg.mask_size || t.width != cfg.mask_size) throw InvalidInput("target mask size mismatch");
    return encode_mask(ck.model, t);
  };
  const Codes codes = encode_mask(ck.model, source);
  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);
  const int variants = std::max(a.batch, 1);
  for (int k = 0; k < variants; ++k) {
    EditPlan p = plan;
    if (a.batch > 0) p.seed = plan.seed + static_cast<std::uint64_t>(k);
    const auto result = apply_edit_plan(ck.model, codes, p, targets);
    std::string stem = "edit";
    if (a.batch > 0) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "_%03d", k);
      stem += buf;
    }
    write_file(out_dir / (stem + ".png"), encode_label_png(result.mask));
    save_rgb_png(render_color(result.mask, palette), out_dir / (stem + "_color.png"));
    write_text(out_dir / (stem + ".json"), edit_plan_to_json(p, palette).dump(2) + "\n");
  }
  ctx.out << "wrote " << variants << (variants == 1 ? " edit" : " edits") << " to " << out_dir.string() << "\n";
  return 0;
}

std::string default_image_id(const std::string& input) {
  std::string id;
  for (char ch : fs::path(input).stem().string()) {
    if (std::isalnum(static_cast<unsigned char>(ch))) id += ch;
  }
  return id.empty() ? "mask" : id;
}

int cmd_export(const Context& ctx, const std::string& input, const ClassPalette& palette, const std::string& layout,
               const fs::path& out_dir, std::string id) {
  const LabelMap mask = decode_mask_image(read_file(input), palette);
  if (id.empty()) id = default_image_id(input);
  const auto files = export_sis(mask, palette, parse_sis_layout(layout), out_dir, id);
  for (const auto& f : files) ctx.out << f.string() << "\n";
  return 0;
}

int cmd_ingest(const Context& ctx, const fs::path& parts, const ClassPalette& palette, const fs::path& out_dir,
               int size) {
  const auto images = scan_part_directory(parts);
  if (images.empty()) throw InvalidInput("no <id>_<part>.png files under " + parts.string());
  MaskDataset data;
  data.palette = palette;
  for (const auto& [id, files] : images) {
    data.names.push_back(id);
    data.masks.push_back(ingest_part_files(files, palette, size));
  }
  save_mask_directory(data, out_dir);
  ctx.out << "ingested " << data.masks.size() << " masks into " << out_dir.string() << "\n";
  return 0;
}

int cmd_serve(const Context& ctx, std::string checkpoint, const std::string& host, int port) {
  if (checkpoint.empty()) {
    if (const char* env = std::getenv("MASKVAE_CHECKPOINT")) checkpoint = env;
  }
  std::unique_ptr<EditorService> service;
  if (checkpoint.empty()) {
    ctx.err << "warning: no checkpoint, model routes answer 503\n";
    service = std::make_unique<EditorService>();
  } else {
    service = std::make_unique<EditorService>(load_checkpoint(checkpoint));
  }
  httplib::Server server;
  register_routes(server, *service);
  if (!server.bind_to_port(host, port)) throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  ctx.out << "listening on " << host << ":" << port
          << (service->ready() ? " checkpoint " + service->checkpoint_id() : std::string()) << "\n"
          << std::flush;
  server.listen_after_bind();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const Context ctx{out, err};
  CLI::App app{"Class-wise mask VAE: training, evaluation, latent edits and the editor backend"};
  app.require_subcommand(1);

  int count = 0, classes = 6, size = 64;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-data", "Write synthetic face-like label masks");
  synth->add_option("--count", count, "Number of masks")->required();
  synth->add_option("--classes", classes, "Class count (4..8)");
  synth->add_option("--size", size, "Mask side");
  synth->add_option("--seed", synth_seed, "Seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  std::string config, data, run_dir, resume;
  std::optional<std::uint64_t> train_seed;
  int epochs = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", config, "Run config (key = value)");
  train_cmd->add_option("--data", data, "Mask directory")->required();
  train_cmd->add_option("--out", run_dir, "Run directory")->required();
  train_cmd->add_option("--resume", resume, "Checkpoint to continue from");
  train_cmd->add_option("--seed", train_seed, "Overrides the config seed");
  train_cmd->add_option("--epochs", epochs, "Overrides the config epoch count");

  std::string checkpoint, split = "test", eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate reconstruction on a split");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint or run directory")->required();
  eval_cmd->add_option("--data", data, "Mask directory")->required();
  eval_cmd->add_option("--split", split, "test | train | all")->check(CLI::IsMember({"test", "train", "all"}));
  eval_cmd->add_option("--out", eval_out, "Directory for eval.json and class_iou.csv");

  std::string seeds = "0,1,2", variants, ablation_out;
  auto* ablation_cmd = app.add_subcommand("ablation", "Train the ablation grid and tabulate it");
  ablation_cmd->add_option("--config", config, "Base run config");
  ablation_cmd->add_option("--data", data, "Mask directory")->required();
  ablation_cmd->add_option("--seeds", seeds, "Comma-separated seeds");
  ablation_cmd->add_option("--variants", variants, "Comma-separated row numbers (default all six)");
  ablation_cmd->add_option("--out", ablation_out, "Output directory")->required();

  EditArgs edit_args;
  auto* edit_cmd = app.add_subcommand("edit", "Apply latent edits to a mask");
  edit_cmd->add_option("--checkpoint", edit_args.checkpoint, "Checkpoint or run directory")->required();
  edit_cmd->add_option("--input", edit_args.input, "Label PNG or colour render")->required();
  edit_cmd->add_option("--plan", edit_args.plan, "Edit plan JSON");
  edit_cmd->add_option("--op", edit_args.op, "generate | perturb | interpolate");
  edit_cmd->add_option("--class", edit_args.class_name, "Class name");
  edit_cmd->add_option("--alpha", edit_args.alpha, "Interpolation weight");
  edit_cmd->add_option("--target", edit_args.target, "Target mask for interpolate");
  edit_cmd->add_option("--noise-scale", edit_args.noise_scale, "Perturbation sigma");
  edit_cmd->add_option("--truncation", edit_args.truncation, "Generation truncation");
  edit_cmd->add_option("--seed", edit_args.seed, "Plan seed");
  edit_cmd->add_option("--batch", edit_args.batch, "Emit n variants with seeds seed..seed+n-1");
  edit_cmd->add_option("--out", edit_args.out, "Output directory")->required();

  std::string input, palette_path, layout = "part-files", export_out, image_id;
  auto* export_cmd = app.add_subcommand("export-sis", "Export a mask for image synthesis models");
  export_cmd->add_option("--input", input, "Label PNG")->required();
  export_cmd->add_option("--palette", palette_path, "Palette file");
  export_cmd->add_option("--checkpoint", checkpoint, "Take the palette from a checkpoint");
  export_cmd->add_option("--layout", layout, "part-files | label-map");
  export_cmd->add_option("--out", export_out, "Output directory")->required();
  export_cmd->add_option("--id", image_id, "Image id (default: input stem)");

  std::string parts, ingest_out;
  int ingest_size = 0;
  auto* ingest_cmd = app.add_subcommand("ingest", "Merge per-part PNGs into label masks");
  ingest_cmd->add_option("--parts", parts, "Directory of <id>_<part>.png files")->required();
  ingest_cmd->add_option("--palette", palette_path, "Palette file")->required();
  ingest_cmd->add_option("--out", ingest_out, "Output mask directory")->required();
  ingest_cmd->add_option("--size", ingest_size, "Resize to size x size (0 keeps)");

  std::string render_out;
  auto* render_cmd = app.add_subcommand("render", "Colour render of a label PNG");
  render_cmd->add_option("--input", input, "Label PNG")->required();
  render_cmd->add_option("--palette", palette_path, "Palette file");
  render_cmd->add_option("--checkpoint", checkpoint, "Take the palette from a checkpoint");
  render_cmd->add_option("--out", render_out, "Output PNG")->required();

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Run the editor HTTP service");
  serve_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (default: $MASKVAE_CHECKPOINT)");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(ctx, count, classes, size, synth_seed, synth_out);
    if (*train_cmd) return cmd_train(ctx, config, data, run_dir, resume, train_seed, epochs);
    if (*eval_cmd) return cmd_eval(ctx, checkpoint, data, split, eval_out);
    if (*ablation_cmd) return cmd_ablation(ctx, config, data, seeds, variants, ablation_out);
    if (*edit_cmd) return cmd_edit(ctx, edit_args);
    if (*export_cmd) return cmd_export(ctx, input, palette_from(palette_path, checkpoint), layout, export_out, image_id);
    if (*ingest_cmd) return cmd_ingest(ctx, parts, read_palette(palette_path), ingest_out, ingest_size);
    if (*render_cmd) {
      const auto palette = palette_from(palette_path, checkpoint);
      save_rgb_png(render_color(decode_mask_image(read_file(input), palette), palette), render_out);
      return 0;
    }
    if (*serve_cmd) return cmd_serve(ctx, checkpoint, host, port);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const MismatchError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace maskvae
