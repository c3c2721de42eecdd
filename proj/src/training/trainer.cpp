#include "maskvae/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "maskvae/errors.hpp"
#include "maskvae/losses.hpp"
#include "maskvae/optimizer.hpp"

namespace maskvae {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566;
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;

std::vector<LabelMap> gather(const MaskDataset& data, std::span<const std::size_t> indices) {
  std::vector<LabelMap> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(data.masks.at(i));
  return out;
}

std::string format_iou(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

}  // namespace

Model make_model(const RunConfig& config) { return Model(config.model, config.train.seed); }

void check_dataset(const MaskDataset& data, const ModelConfig& config) {
  if (data.masks.empty()) throw InvalidInput("dataset is empty");
  if (data.palette.size() != config.class_count) {
    throw InvalidInput("dataset palette has " + std::to_string(data.palette.size()) +
                       " classes, model expects " + std::to_string(config.class_count));
  }
  for (std::size_t i = 0; i < data.masks.size(); ++i) {
    const auto& m = data.masks[i];
    if (m.height != config.mask_size || m.width != config.mask_size || m.class_count != config.class_count) {
      throw InvalidInput("mask " + (i < data.names.size() ? data.names[i] : std::to_string(i)) + " is " +
                         std::to_string(m.height) + "x" + std::to_string(m.width) + ", model expects " +
                         std::to_string(config.mask_size));
    }
  }
}

std::vector<LabelMap> reconstruct(const Model& model, std::span<const LabelMap> masks, int batch_size) {
  std::vector<LabelMap> out;
  out.reserve(masks.size());
  const std::size_t bs = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < masks.size(); start += bs) {
    const auto chunk = masks.subspan(start, std::min(bs, masks.size() - start));
    const auto result = model.forward(masks_to_tensor<float>(chunk), Mode::Infer);
    for (auto& m : decode_batch(result.logits)) out.push_back(std::move(m));
  }
  return out;
}

SegMetrics evaluate(const Model& model, std::span<const LabelMap> masks, int batch_size) {
  ConfusionMatrix cm(model.config().class_count);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < masks.size(); start += bs) {
    const auto chunk = masks.subspan(start, std::min(bs, masks.size() - start));
    const auto pred = reconstruct(model, chunk, batch_size);
    for (std::size_t i = 0; i < chunk.size(); ++i) cm.add(pred[i], chunk[i]);
  }
  return cm.metrics();
}

SegMetrics evaluate(const Model& model, const MaskDataset& data, std::span<const std::size_t> indices,
                    int batch_size) {
  check_dataset(data, model.config());
  const auto masks = gather(data, indices);
  return evaluate(model, std::span<const LabelMap>(masks), batch_size);
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochRecord> epochs,
                       const ClassPalette& palette) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,wce,kl,total,acc,miou";
  for (const auto& e : palette.entries()) out << ",iou_" << e.name;
  out << "\n";
  char buf[256];
  for (const auto& e : epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.8f,%.8f,%.8f", e.epoch, e.wce, e.kl, e.total);
    out << buf;
    if (e.eval) {
      std::snprintf(buf, sizeof(buf), ",%.6f,%.6f", e.eval->pixel_accuracy, e.eval->mean_iou);
      out << buf;
      for (int c = 0; c < palette.size(); ++c) {
        out << "," << (c < static_cast<int>(e.eval->per_class_iou.size()) ? format_iou(e.eval->per_class_iou[c]) : "");
      }
    } else {
      out << ",,";
      for (int c = 0; c < palette.size(); ++c) out << ",";
    }
    out << "\n";
  }
}

void write_steps_csv(const std::filesystem::path& path, std::span<const StepRecord> steps) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,step,wce,kl,total\n";
  char buf[160];
  for (const auto& s : steps) {
    std::snprintf(buf, sizeof(buf), "%d,%llu,%.8f,%.8f,%.8f\n", s.epoch,
                  static_cast<unsigned long long>(s.step), s.wce, s.kl, s.total);
    out << buf;
  }
}

void write_class_iou_csv(const std::filesystem::path& path, const SegMetrics& metrics,
                         const ClassPalette& palette) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "class_index,class_name,iou\n";
  for (int c = 0; c < palette.size(); ++c) {
    out << c << "," << palette[c].name << ","
        << (c < static_cast<int>(metrics.per_class_iou.size()) ? format_iou(metrics.per_class_iou[c]) : "")
        << "\n";
  }
}

TrainReport train(Model& model, const MaskDataset& data, const RunConfig& config, const TrainOptions& options) {
  using clock = std::chrono::steady_clock;
  const auto started = clock::now();
  config.model.validate();
  config.train.validate();
  config.loss.validate(config.model.class_count);
  if (!(model.config() == config.model)) throw MismatchError("model does not match the run config");
  check_dataset(data, config.model);

  TrainReport report;
  report.split = split_indices(data.masks.size(), config.train.test_ratio, config.train.split_seed);
  if (report.split.train.empty()) throw InvalidInput("training split is empty");

  const auto train_masks = gather(data, report.split.train);
  const auto test_masks = gather(data, report.split.test);
  LossConfig loss = config.loss;
  if (loss.use_weighted_ce && loss.class_weights.w.empty()) {
    loss.class_weights = compute_class_weights(compute_dataset_stats(std::span<const LabelMap>(train_masks)));
  }
  report.class_weights = loss.effective_weights(config.model.class_count);

  AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.train.learning_rate;
  adam_cfg.grad_clip = config.train.grad_clip;
  Adam<float> adam(model.parameters(), adam_cfg);

  int first_epoch = 1;
  if (!options.resume_from.empty()) {
    const auto dir = resolve_checkpoint(options.resume_from);
    const auto meta = read_checkpoint_meta(dir);
    if (!(meta.config.model == config.model) || !(meta.config.train == config.train) ||
        meta.config.loss.kl_weight != config.loss.kl_weight ||
        meta.config.loss.use_weighted_ce != config.loss.use_weighted_ce) {
      throw MismatchError("checkpoint " + dir.string() + " was trained with a different config");
    }
    if (meta.config.loss.class_weights.w != report.class_weights.w) {
      throw MismatchError("checkpoint " + dir.string() + " used different class weights");
    }
    load_parameters(model, dir / "params.bin");
    adam.load(dir / "optimizer.bin");
    report.epochs = meta.epochs;
    report.steps = meta.steps;
    first_epoch = meta.epoch + 1;
  }

  const int last_epoch = options.stop_after_epoch > 0 ? std::min(options.stop_after_epoch, config.train.epochs)
                                                      : config.train.epochs;
  if (!options.run_dir.empty()) std::filesystem::create_directories(options.run_dir);

  const std::size_t bs = static_cast<std::size_t>(config.train.batch_size);
  std::uint64_t step = report.steps.empty() ? 0 : report.steps.back().step;
  for (int epoch = first_epoch; epoch <= last_epoch; ++epoch) {
    const auto epoch_start = clock::now();
    std::vector<std::size_t> order(train_masks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng = make_rng(config.train.seed, kShuffleStream + static_cast<std::uint64_t>(epoch));
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    Rng noise_rng = make_rng(config.train.seed, kNoiseStream + static_cast<std::uint64_t>(epoch));

    double sum_wce = 0.0, sum_kl = 0.0, sum_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t n = std::min(bs, order.size() - start);
      std::vector<LabelMap> batch;
      batch.reserve(n);
      for (std::size_t i = 0; i < n; ++i) batch.push_back(train_masks[order[start + i]]);

      model.zero_grad();
      TrainingTape<float> tape;
      const auto out = model.forward_train(masks_to_tensor<float>(std::span<const LabelMap>(batch)), noise_rng, tape);
      Tensor<float> dlogits, dmu, dlogvar;
      const auto l = total_loss(out.logits, std::span<const LabelMap>(batch), out.latent, loss, &dlogits, &dmu,
                                &dlogvar);
      ++step;
      if (!std::isfinite(l.total) || !std::isfinite(l.wce) || !std::isfinite(l.kl)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << " step " << step << " (wce=" << l.wce << ", kl=" << l.kl
            << ", total=" << l.total << "); try a lower learning_rate or set grad_clip";
        throw DivergenceError(msg.str());
      }
      if (std::abs(l.total - (l.wce + loss.kl_weight * l.kl)) > 1e-6) {
        throw std::logic_error("loss decomposition identity violated");
      }
      model.backward(tape, dlogits, dmu, dlogvar);
      adam.step();

      report.steps.push_back({epoch, step, l.wce, l.kl, l.total});
      sum_wce += l.wce * n;
      sum_kl += l.kl * n;
      sum_total += l.total * n;
    }

    EpochRecord record;
    record.epoch = epoch;
    const double count = static_cast<double>(order.size());
    record.wce = sum_wce / count;
    record.kl = sum_kl / count;
    record.total = sum_total / count;
    if (config.train.eval_each_epoch && !test_masks.empty()) {
      record.eval = evaluate(model, std::span<const LabelMap>(test_masks), config.train.batch_size);
    }
    record.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
    report.epochs.push_back(record);

    if (options.log) {
      char buf[200];
      std::snprintf(buf, sizeof(buf), "epoch %d/%d  wce %.5f  kl %.5f  total %.5f", epoch, config.train.epochs,
                    record.wce, record.kl, record.total);
      std::string line = buf;
      if (record.eval) {
        std::snprintf(buf, sizeof(buf), "  acc %.4f  miou %.4f", record.eval->pixel_accuracy, record.eval->mean_iou);
        line += buf;
      }
      std::snprintf(buf, sizeof(buf), "  (%.1fs)", record.seconds);
      options.log(line + buf);
    }

    if (!options.run_dir.empty()) {
      CheckpointMeta meta;
      meta.config = config;
      meta.config.loss.class_weights = report.class_weights;
      meta.palette = data.palette;
      meta.epoch = epoch;
      meta.step = step;
      meta.epochs = report.epochs;
      meta.steps = report.steps;
      save_checkpoint(epoch_directory(options.run_dir, epoch), model, meta, &adam);
      write_metrics_csv(options.run_dir / "metrics.csv", report.epochs, data.palette);
      write_steps_csv(options.run_dir / "steps.csv", report.steps);
    }
  }
  report.wall_seconds = std::chrono::duration<double>(clock::now() - started).count();
  return report;
}

}  // namespace maskvae
