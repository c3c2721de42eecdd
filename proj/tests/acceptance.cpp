// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance [--only name[,name...]] [--work dir]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "grad_check.hpp"
#include "maskvae/ablation.hpp"
#include "maskvae/dataset.hpp"
#include "maskvae/latent_ops.hpp"
#include "maskvae/losses.hpp"
#include "maskvae/metrics.hpp"
#include "maskvae/run_config.hpp"
#include "maskvae/toy_masks.hpp"
#include "maskvae/trainer.hpp"
#include "test_util.hpp"

using namespace maskvae;
namespace fs = std::filesystem;

namespace {

constexpr double kLossOracleTol = 1e-6;
constexpr double kKlClosedFormTol = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr double kGradStepModel = 1e-4;
constexpr double kGradStepLoss = 1e-3;
constexpr double kWeightSumTol = 1e-9;
constexpr int kMetricPairs = 200;
constexpr int kToyMasks = 2000;
constexpr int kToyEpochs = 20;
constexpr double kToySeconds = 30 * 60.0;
constexpr double kToyMiou = 0.80;
constexpr int kAblationEpochs = 4;
const std::vector<std::uint64_t> kAblationSeeds = {0, 1, 2};
constexpr int kLatentSeeds = 100;
constexpr double kE2eSeconds = 35 * 60.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

// ---------------------------------------------------------------- losses

Tensor<double> random_tensor(Shape shape, Rng& rng, double scale) {
  Tensor<double> t(std::move(shape));
  NormalSampler normal;
  for (auto& v : t.storage()) v = scale * normal(rng);
  return t;
}

std::vector<LabelMap> random_label_batch(std::size_t b, int c, int h, int w, Rng& rng) {
  std::vector<LabelMap> out;
  for (std::size_t i = 0; i < b; ++i) {
    LabelMap m(h, w, c);
    for (auto& v : m.labels) v = static_cast<std::uint8_t>(uniform_index(rng, c));
    out.push_back(std::move(m));
  }
  return out;
}

double wce_scalar(const Tensor<double>& logits, const std::vector<LabelMap>& gt, const std::vector<double>& w) {
  const std::size_t B = logits.dim(0), C = logits.dim(1), H = logits.dim(2), W = logits.dim(3);
  long double sum = 0;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        long double z = 0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(static_cast<long double>(logits[((b * C + c) * H + y) * W + x]));
        const std::size_t t = gt[b].at(static_cast<int>(y), static_cast<int>(x));
        sum -= w[t] * std::log(std::exp(static_cast<long double>(logits[((b * C + t) * H + y) * W + x])) / z);
      }
  return static_cast<double>(sum / static_cast<long double>(B * H * W));
}

double kl_scalar(const LatentDistribution<double>& d) {
  long double sum = 0;
  for (std::size_t i = 0; i < d.mu.size(); ++i) {
    const long double mu = d.mu[i], lv = d.logvar[i];
    sum += -0.5L * (1.0L + lv - mu * mu - std::exp(lv));
  }
  return static_cast<double>(sum / d.mu.size());
}

Outcome loss_oracles() {
  Rng rng = make_rng(2024);
  double worst_wce = 0, worst_kl = 0;
  int cases = 0;
  for (std::size_t b : {1, 2})
    for (int c : {2, 3, 4})
      for (int h : {1, 4, 8})
        for (int w : {1, 5, 8}) {
          const auto logits = random_tensor({b, static_cast<std::size_t>(c), static_cast<std::size_t>(h),
                                             static_cast<std::size_t>(w)}, rng, 2.0);
          const auto gt = random_label_batch(b, c, h, w, rng);
          ClassWeights weights;
          for (int k = 0; k < c; ++k) weights.w.push_back(uniform_real(rng, 0.05, 1.0));
          worst_wce = std::max(worst_wce, std::abs(weighted_cross_entropy(logits, std::span<const LabelMap>(gt), weights) -
                                                   wce_scalar(logits, gt, weights.w)));
          LatentDistribution<double> d{random_tensor({b, static_cast<std::size_t>(c), 8}, rng, 1.5),
                                       random_tensor({b, static_cast<std::size_t>(c), 8}, rng, 1.0)};
          worst_kl = std::max(worst_kl, std::abs(kl_loss(d) - kl_scalar(d)));
          ++cases;
        }
  LatentDistribution<double> unit{Tensor<double>({1, 4, 8}), Tensor<double>({1, 4, 8})};
  const double kl0 = kl_loss(unit);
  unit.mu.fill(1.0);
  const double kl1 = kl_loss(unit);  // mean over dims, so 0.5 per dim
  const bool pass = worst_wce < kLossOracleTol && worst_kl < kLossOracleTol && std::abs(kl0) < kKlClosedFormTol &&
                    std::abs(kl1 - 0.5) < kKlClosedFormTol;
  std::ostringstream ss;
  ss << cases << " random cases, max |wCE-oracle| " << worst_wce << ", max |KL-oracle| " << worst_kl
     << ", KL(0,1)=" << kl0 << ", KL(1,1)=" << kl1 << " per dim";
  return {pass, ss.str()};
}

// ---------------------------------------------------------- gradients

ModelConfig tiny_model() {
  ModelConfig c;
  c.class_count = 3;
  c.mask_size = 16;
  c.decoder_init_size = 4;
  c.latent_dim = 16;
  c.encoder_hidden = 8;
  c.lstm_layers = 2;
  c.ff_expansion = 2;
  c.decoder_base_channels = 4;
  c.groupnorm_groups = 2;
  return c;
}

std::vector<LabelMap> blocky_labels(const ModelConfig& c, std::size_t batch, std::uint64_t seed) {
  std::vector<LabelMap> maps;
  Rng rng = make_rng(seed);
  for (std::size_t b = 0; b < batch; ++b) {
    LabelMap m(c.mask_size, c.mask_size, c.class_count);
    for (int y = 0; y < c.mask_size; ++y)
      for (int x = 0; x < c.mask_size; ++x)
        m.at(y, x) = static_cast<std::uint8_t>((x / 4 + y / 4 + static_cast<int>(seed + b)) % c.class_count);
    for (int k = 0; k < 5; ++k)
      m.labels[uniform_index(rng, m.pixel_count())] = static_cast<std::uint8_t>(uniform_index(rng, c.class_count));
    maps.push_back(std::move(m));
  }
  return maps;
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  double worst_model = 0;
  int probes = 0;
  for (bool per_class : {false, true}) {
    for (bool bidirectional : {true, false}) {
      auto c = tiny_model();
      c.per_class_encoders = per_class;
      c.bidirectional = bidirectional;
      BasicModel<double> model(c, 21);
      const auto labels = blocky_labels(c, 2, 8);
      const auto masks = masks_to_tensor<double>(labels);
      LossConfig loss_cfg;
      loss_cfg.kl_weight = 0.25;
      loss_cfg.class_weights = ClassWeights{{0.2, 0.5, 0.9}};
      auto loss = [&]() {
        Rng rng = make_rng(5);
        TrainingTape<double> tape;
        const auto out = model.forward_train(masks, rng, tape);
        return total_loss(out.logits, std::span<const LabelMap>(labels), out.latent, loss_cfg).total;
      };
      model.zero_grad();
      Rng rng = make_rng(5);
      TrainingTape<double> tape;
      const auto out = model.forward_train(masks, rng, tape);
      Tensor<double> dlogits, dmu, dlv;
      total_loss(out.logits, std::span<const LabelMap>(labels), out.latent, loss_cfg, &dlogits, &dmu, &dlv);
      model.backward(tape, dlogits, dmu, dlv);
      const auto r = testutil::check_parameter_gradients(model.parameters(), loss, 4, 99, kGradStepModel);
      worst_model = std::max(worst_model, r.max_relative_error);
      probes += r.probes;
    }
  }
  // loss-level: every logit, mu and logvar entry, norm-wise per tensor
  double worst_loss = 0;
  Rng rng = make_rng(77);
  for (int trial = 0; trial < 4; ++trial) {
    auto logits = random_tensor({2, 4, 8, 8}, rng, 2.0);
    const auto gt = random_label_batch(2, 4, 8, 8, rng);
    LatentDistribution<double> latent{random_tensor({2, 4, 8}, rng, 1.0), random_tensor({2, 4, 8}, rng, 0.7)};
    LossConfig cfg;
    cfg.kl_weight = 0.3;
    for (int k = 0; k < 4; ++k) cfg.class_weights.w.push_back(uniform_real(rng, 0.05, 1.0));
    Tensor<double> dlogits, dmu, dlv;
    total_loss(logits, std::span<const LabelMap>(gt), latent, cfg, &dlogits, &dmu, &dlv);
    auto f = [&]() { return total_loss(logits, std::span<const LabelMap>(gt), latent, cfg).total; };
    auto probe = [&](Tensor<double>& x, const Tensor<double>& g) {
      double diff = 0, na = 0, nn = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + kGradStepLoss;
        const double up = f();
        x[i] = saved - kGradStepLoss;
        const double down = f();
        x[i] = saved;
        const double numeric = (up - down) / (2 * kGradStepLoss);
        diff += (g[i] - numeric) * (g[i] - numeric);
        na += g[i] * g[i];
        nn += numeric * numeric;
      }
      return std::sqrt(diff) / std::max(std::sqrt(std::max(na, nn)), 1e-12);
    };
    worst_loss = std::max({worst_loss, probe(logits, dlogits), probe(latent.mu, dmu), probe(latent.logvar, dlv)});
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_model < kGradRelTol && worst_loss < kGradRelTol && probes > 100 && secs < kGradSeconds;
  std::ostringstream ss;
  ss << probes << " parameter probes max rel err " << worst_model << ", loss tensors max rel err " << worst_loss
     << ", " << fmt("%.1f s", secs);
  return {pass, ss.str()};
}

// ------------------------------------------------------------- weights

Outcome class_weights() {
  bool exact = true;
  {
    LabelMap a(2, 2, 2, 0);
    a.labels = {0, 0, 0, 1};
    const std::vector<LabelMap> one{a};
    const auto w = compute_class_weights(compute_dataset_stats(std::span<const LabelMap>(one)));
    exact &= w.w == std::vector<double>{0.25, 0.75};
    LabelMap b(2, 2, 3, 0), c(2, 2, 3, 0);
    c.labels = {1, 1, 0, 0};
    const std::vector<LabelMap> two{b, c};
    const auto w2 = compute_class_weights(compute_dataset_stats(std::span<const LabelMap>(two)));
    exact &= w2.w == std::vector<double>{0.25, 0.75, 1.0};
    LabelMap d(4, 4, 4, 3);
    for (int x = 0; x < 4; ++x) d.at(0, x) = 1;
    const std::vector<LabelMap> three{d};
    const auto w3 = compute_class_weights(compute_dataset_stats(std::span<const LabelMap>(three)));
    exact &= w3.w == std::vector<double>{1.0, 0.75, 1.0, 0.25};
  }
  Rng rng = make_rng(31);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int c = 2 + static_cast<int>(uniform_index(rng, 18));
    const int h = 1 + static_cast<int>(uniform_index(rng, 40));
    const int w = 1 + static_cast<int>(uniform_index(rng, 40));
    const auto masks = random_label_batch(1 + uniform_index(rng, 30), c, h, w, rng);
    const auto weights = compute_class_weights(compute_dataset_stats(std::span<const LabelMap>(masks)));
    double s = 0;
    for (double v : weights.w) s += 1.0 - v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<LabelMap> toy;
    for (int i = 0; i < 40; ++i) toy.push_back(generate_toy_labels(trial * 100 + i, {4 + trial % 5, 64, 64}));
    const auto weights = compute_class_weights(compute_dataset_stats(std::span<const LabelMap>(toy)));
    double s = 0;
    for (double v : weights.w) s += 1.0 - v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  std::ostringstream ss;
  ss << "hand fixtures " << (exact ? "exact" : "MISMATCH") << ", max |sum(1-w)-1| " << worst << " over 55 datasets";
  return {exact && worst < kWeightSumTol, ss.str()};
}

// ------------------------------------------------------------- metrics

Outcome metric_oracle() {
  Rng rng = make_rng(4242);
  int mismatches = 0;
  for (int i = 0; i < kMetricPairs; ++i) {
    const int c = 2 + static_cast<int>(uniform_index(rng, 18));
    const auto pair = random_label_batch(2, c, 32, 32, rng);
    // half the pairs share most pixels so IoU is not always near chance
    LabelMap pred = pair[0];
    if (i % 2) {
      pred = pair[1];
      for (std::size_t p = 0; p < pred.labels.size(); p += 3) pred.labels[p] = pair[0].labels[p];
    }
    const auto got = segmentation_metrics(pred, pair[1], c);
    const auto want = testutil::brute_force_metrics(pred, pair[1], c);
    mismatches += !(got.pixel_accuracy == want.pixel_accuracy && got.mean_iou == want.mean_iou &&
                     got.per_class_iou == want.per_class_iou);
  }
  return {mismatches == 0, std::to_string(kMetricPairs) + " random 32x32 pairs, " + std::to_string(mismatches) +
                               " differ from the brute-force oracle"};
}

// ------------------------------------------------------------ training

struct ToyState {
  RunConfig config;
  MaskDataset data;
  std::optional<Model> model;
  DatasetSplit split;
};

RunConfig toy_config() { return read_run_config(fs::path(MASKVAE_SOURCE_DIR) / "tools/configs/toy.cfg"); }

MaskDataset toy_dataset() {
  MaskDataset data;
  data.palette = toy_palette(6);
  for (int i = 0; i < kToyMasks; ++i) {
    char name[8];
    std::snprintf(name, sizeof(name), "%05d", i);
    data.names.push_back(name);
    data.masks.push_back(generate_toy_labels(static_cast<std::uint64_t>(i), {6, 64, 64}));
  }
  return data;
}

Outcome toy_training(ToyState& st) {
  st.config = toy_config();
  const auto& m = st.config.model;
  if (m.class_count != 6 || m.mask_size != 64 || st.config.train.epochs != kToyEpochs) {
    return {false, "toy.cfg does not describe C=6, 64x64, 20 epochs"};
  }
  st.config.train.eval_each_epoch = false;
  st.data = toy_dataset();
  st.model.emplace(make_model(st.config));
  TrainOptions opts;
  opts.log = [](const std::string& line) { std::fprintf(stderr, "  toy %s\n", line.c_str()); };
  const auto t0 = Clock::now();
  const auto report = train(*st.model, st.data, st.config, opts);
  st.split = report.split;
  const auto metrics = evaluate(*st.model, st.data, st.split.test, st.config.train.batch_size);
  const double secs = seconds_since(t0);
  bool decreasing = report.epochs.size() >= 5;
  std::ostringstream losses;
  for (std::size_t e = 0; e < std::min<std::size_t>(5, report.epochs.size()); ++e) {
    if (e > 0) {
      decreasing &= report.epochs[e].total < report.epochs[e - 1].total;
      losses << " > ";
    }
    losses << fmt("%.5f", report.epochs[e].total);
  }
  std::ostringstream ss;
  ss << kToyMasks << " masks, " << report.epochs.size() << " epochs, first-5 totals " << losses.str()
     << (decreasing ? "" : " (NOT strictly decreasing)") << ", held-out (" << st.split.test.size()
     << ") mIoU " << fmt("%.4f", metrics.mean_iou) << " acc " << fmt("%.4f", metrics.pixel_accuracy) << " (need >= "
     << kToyMiou << "), " << fmt("%.0f s", secs);
  return {decreasing && metrics.mean_iou >= kToyMiou && secs <= kToySeconds, ss.str()};
}

Outcome ablation_direction(ToyState& st) {
  RunConfig base = st.config;
  if (st.data.masks.empty()) {
    base = toy_config();
    st.data = toy_dataset();
  }
  base.train.epochs = kAblationEpochs;
  const auto all = standard_ablation_variants();
  const AblationVariant ours = all[5], baseline = all[2];
  AblationOptions opts;
  opts.log = [](const std::string& line) { std::fprintf(stderr, "  ablation %s\n", line.c_str()); };
  const auto rows = run_ablation(st.data, base, {ours, baseline}, kAblationSeeds, opts);
  std::ostringstream ss;
  ss << kAblationEpochs << " epochs x " << kAblationSeeds.size() << " seeds, median mIoU " << rows[0].variant.label
     << " " << fmt("%.4f", rows[0].median_miou) << " vs " << rows[1].variant.label << " "
     << fmt("%.4f", rows[1].median_miou) << " (runs:";
  for (const auto& r : rows)
    for (const auto& run : r.runs) ss << " " << fmt("%.4f", run.metrics.mean_iou);
  ss << ")";
  return {rows[0].median_miou >= rows[1].median_miou, ss.str()};
}

// ---------------------------------------------------------- latent ops

const Model& edit_model(ToyState& st) {
  if (!st.model) {
    // without the toy run: a short run on fewer masks still exercises the ops
    st.config = toy_config();
    st.config.train.epochs = 1;
    st.config.train.eval_each_epoch = false;
    st.data = toy_dataset();
    st.data.masks.resize(200);
    st.data.names.resize(200);
    st.model.emplace(make_model(st.config));
    st.split = train(*st.model, st.data, st.config).split;
  }
  return *st.model;
}

bool one_hot(const LabelMap& m, int c) {
  return m.class_count == c && std::all_of(m.labels.begin(), m.labels.end(), [&](auto v) { return v < c; }) &&
         one_hot_encode(m).is_valid();
}

Outcome latent_identities(ToyState& st) {
  const Model& model = edit_model(st);
  const int C = model.config().class_count;
  const auto& masks = st.data.masks;
  const auto& test = st.split.test;
  int perturb_bad = 0, alpha0_bad = 0, alpha1_bad = 0, not_one_hot = 0, outputs = 0;
  for (int s = 0; s < kLatentSeeds; ++s) {
    const LabelMap& src = masks[test[s % test.size()]];
    const LabelMap& tgt = masks[test[(s + 7) % test.size()]];
    const Codes codes = encode_mask(model, src);
    const Codes target = encode_mask(model, tgt);
    const auto recon = apply_edit_plan(model, codes, EditPlan{});
    const int c = 1 + s % (C - 1);

    EditPlan p;
    p.seed = static_cast<std::uint64_t>(s);
    Edit e;
    e.class_index = c;
    e.op = EditOp::Perturb;
    e.noise_scale = 0.0;
    p.edits = {e};
    const auto zero = apply_edit_plan(model, codes, p);
    perturb_bad += !(zero.mask == recon.mask && zero.logits == recon.logits);

    Codes swapped = codes;
    const auto row = target.row(0, static_cast<std::size_t>(c));
    std::copy(row.begin(), row.end(), swapped.row(0, static_cast<std::size_t>(c)).begin());
    const LabelMap swap_mask = decode_to_mask(model, swapped);
    const TargetResolver resolve = [&](const std::string&) { return target; };
    e = Edit{};
    e.class_index = c;
    e.op = EditOp::Interpolate;
    e.target = "t";
    e.alpha = 0.0;
    p.edits = {e};
    alpha0_bad += !(apply_edit_plan(model, codes, p, resolve).mask == recon.mask);
    p.edits[0].alpha = 1.0;
    alpha1_bad += !(apply_edit_plan(model, codes, p, resolve).mask == swap_mask);

    for (EditOp op : {EditOp::Generate, EditOp::Perturb, EditOp::Interpolate}) {
      Edit x;
      x.class_index = c;
      x.op = op;
      x.noise_scale = 1.0;
      x.truncation = 0.0;
      if (op == EditOp::Interpolate) {
        x.target = "t";
        x.alpha = 0.01 * s;
      }
      EditPlan q;
      q.seed = 1000 + static_cast<std::uint64_t>(s);
      q.edits = {x};
      not_one_hot += !one_hot(apply_edit_plan(model, codes, q, resolve).mask, C);
      ++outputs;
    }
  }
  std::ostringstream ss;
  ss << kLatentSeeds << " seeds: sigma=0 != recon " << perturb_bad << ", alpha=0 != recon " << alpha0_bad
     << ", alpha=1 != part swap " << alpha1_bad << ", non one-hot " << not_one_hot << "/" << outputs;
  return {perturb_bad == 0 && alpha0_bad == 0 && alpha1_bad == 0 && not_one_hot == 0, ss.str()};
}

Outcome edit_locality(ToyState& st) {
  const Model& model = edit_model(st);
  const int C = model.config().class_count;
  int bad = 0, edits = 0;
  for (int s = 0; s < kLatentSeeds; ++s) {
    const Codes codes = encode_mask(model, st.data.masks[st.split.test[s % st.split.test.size()]]);
    const Codes target = encode_mask(model, st.data.masks[st.split.test[(s + 3) % st.split.test.size()]]);
    const TargetResolver resolve = [&](const std::string&) { return target; };
    for (EditOp op : {EditOp::Generate, EditOp::Perturb, EditOp::Interpolate}) {
      Edit e;
      e.class_index = s % C;
      e.op = op;
      e.noise_scale = 0.5 + 0.01 * s;
      e.truncation = (s % 2) ? 0.7 : 0.0;
      if (op == EditOp::Interpolate) {
        e.target = "t";
        e.alpha = 0.05 + 0.009 * s;
      }
      EditPlan p;
      p.seed = static_cast<std::uint64_t>(s) * 31 + 1;
      p.edits = {e};
      const Codes edited = apply_edits(codes, p, resolve);
      int changed = 0;
      bool others_exact = true;
      for (int c = 0; c < C; ++c) {
        const auto a = codes.row(0, static_cast<std::size_t>(c)), b = edited.row(0, static_cast<std::size_t>(c));
        const bool same = std::memcmp(a.data(), b.data(), a.size_bytes()) == 0;
        changed += !same;
        if (c != e.class_index) others_exact &= same;
      }
      bad += !(others_exact && changed == 1);
      ++edits;
    }
  }
  return {bad == 0, std::to_string(edits) + " edits, " + std::to_string(bad) + " touched a row other than their own"};
}

// ----------------------------------------------------------------- e2e

Outcome cli_e2e(const fs::path& work) {
  const fs::path script = fs::path(MASKVAE_SOURCE_DIR) / "tests/e2e_cli.sh";
  const fs::path cfg = fs::path(MASKVAE_SOURCE_DIR) / "tools/configs/e2e.cfg";
  const fs::path log = work / "e2e.log";
  const std::string cmd = "bash '" + script.string() + "' '" + MASKVAE_CLI + "' '" + (work / "e2e").string() + "' '" +
                          cfg.string() + "' > '" + log.string() + "' 2>&1";
  const auto t0 = Clock::now();
  const int status = std::system(cmd.c_str());
  const double secs = seconds_since(t0);
  const bool ok = status == 0;
  std::string detail = "script " + std::string(ok ? "completed" : "FAILED (see " + log.string() + ")") + ", " +
                       fmt("%.0f s", secs) + " (limit " + fmt("%.0f s", kE2eSeconds) + ")";
  return {ok && secs <= kE2eSeconds, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  fs::path work = fs::temp_directory_path() / ("maskvae_acceptance_" + std::to_string(::getpid()));
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string item; std::getline(ss, item, ',');) only.insert(item);
    } else if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else {
      std::fprintf(stderr, "usage: acceptance [--only name,...] [--work dir]\n");
      return 2;
    }
  }
  fs::create_directories(work);
  ToyState toy;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"loss-oracles", loss_oracles},
      {"gradient-checks", gradient_checks},
      {"class-weights", class_weights},
      {"metric-oracle", metric_oracle},
      {"cli-e2e", [&] { return cli_e2e(work); }},
      {"toy-training", [&] { return toy_training(toy); }},
      {"latent-identities", [&] { return latent_identities(toy); }},
      {"edit-locality", [&] { return edit_locality(toy); }},
      {"ablation-direction", [&] { return ablation_direction(toy); }},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  %-19s %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
