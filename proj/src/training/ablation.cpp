#include "maskvae/ablation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "maskvae/errors.hpp"

namespace maskvae {

std::vector<AblationVariant> standard_ablation_variants() {
  return {
      {"w/o LSTM block", 0, false, false},
      {"1 LSTM w/o Bidir. w/o weighted CE", 1, false, false},
      {"3 LSTMs w/o Bidir. w/o weighted CE", 3, false, false},
      {"3 LSTMs w/o Bidir.", 3, false, true},
      {"3 LSTMs w/o weighted CE", 3, true, false},
      {"Ours", 3, true, true},
  };
}

RunConfig apply_variant(RunConfig base, const AblationVariant& variant) {
  base.model.lstm_layers = variant.lstm_layers;
  base.model.bidirectional = variant.bidirectional;
  base.model.lstm_hidden_per_direction = 0;
  base.loss.use_weighted_ce = variant.weighted_ce;
  base.loss.class_weights = {};
  return base;
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidInput("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AblationRow> run_ablation(const MaskDataset& data, const RunConfig& base,
                                      const std::vector<AblationVariant>& variants,
                                      const std::vector<std::uint64_t>& seeds, const AblationOptions& options) {
  if (variants.empty() || seeds.empty()) throw InvalidInput("ablation needs variants and seeds");
  std::vector<AblationRow> rows;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    AblationRow row;
    row.variant = variants[v];
    for (const auto seed : seeds) {
      RunConfig cfg = apply_variant(base, variants[v]);
      cfg.train.seed = seed;
      cfg.train.eval_each_epoch = false;
      Model model = make_model(cfg);
      TrainOptions opts;
      if (!options.run_root.empty()) {
        opts.run_dir = options.run_root / ("variant_" + std::to_string(v) + "_seed_" + std::to_string(seed));
      }
      if (options.log) {
        opts.log = [&](const std::string& line) { options.log("[" + variants[v].label + " / seed " + std::to_string(seed) + "] " + line); };
      }
      const auto report = train(model, data, cfg, opts);
      AblationRun run;
      run.seed = seed;
      run.metrics = evaluate(model, data, report.split.test, cfg.train.batch_size);
      run.final_total = report.epochs.back().total;
      run.seconds = report.wall_seconds;
      if (options.log) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "held-out acc %.4f miou %.4f", run.metrics.pixel_accuracy, run.metrics.mean_iou);
        options.log("[" + variants[v].label + " / seed " + std::to_string(seed) + "] " + buf);
      }
      row.runs.push_back(std::move(run));
    }
    std::vector<double> miou, acc;
    for (const auto& r : row.runs) {
      miou.push_back(r.metrics.mean_iou);
      acc.push_back(r.metrics.pixel_accuracy);
    }
    row.median_miou = median(miou);
    row.median_acc = median(acc);
    for (int c = 0; c < base.model.class_count; ++c) {
      std::vector<double> vals;
      for (const auto& r : row.runs) {
        if (c < static_cast<int>(r.metrics.per_class_iou.size()) && r.metrics.per_class_iou[c]) {
          vals.push_back(*r.metrics.per_class_iou[c]);
        }
      }
      row.median_class_iou.push_back(vals.empty() ? std::nullopt : std::optional<double>(median(vals)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation_markdown(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "| Configuration | mIoU | Acc |\n|---|---|---|\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "| %.2f | %.2f |", 100.0 * r.median_miou, 100.0 * r.median_acc);
    out << "| " << r.variant.label << " " << buf << "\n";
  }
  return out.str();
}

std::string format_ablation_csv(const std::vector<AblationRow>& rows, const ClassPalette& palette) {
  std::ostringstream out;
  out << "variant,lstm_layers,bidirectional,weighted_ce,seeds,median_miou,median_acc";
  for (const auto& e : palette.entries()) out << ",iou_" << e.name;
  out << "\n";
  char buf[64];
  for (const auto& r : rows) {
    out << '"' << r.variant.label << "\"," << r.variant.lstm_layers << "," << (r.variant.bidirectional ? 1 : 0) << ","
        << (r.variant.weighted_ce ? 1 : 0) << "," << r.runs.size();
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f", r.median_miou, r.median_acc);
    out << buf;
    for (const auto& v : r.median_class_iou) {
      out << ",";
      if (v) {
        std::snprintf(buf, sizeof(buf), "%.6f", *v);
        out << buf;
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace maskvae
