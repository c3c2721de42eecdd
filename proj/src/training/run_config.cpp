#include "maskvae/run_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "maskvae/errors.hpp"

namespace maskvae {

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be positive");
  }
  if (!(train_ratio > 0 && train_ratio < 1) || !(test_ratio > 0 && test_ratio < 1)) {
    throw ConfigError("train_ratio and test_ratio must lie in (0, 1)");
  }
  if (std::abs(train_ratio + test_ratio - 1.0) > 1e-9) {
    throw ConfigError("train_ratio + test_ratio must equal 1");
  }
  if (!(grad_clip >= 0)) throw ConfigError("grad_clip must be non-negative");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename V>
V parse_number(const std::string& key, const std::string& text) {
  V v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

template <typename V, typename Field>
Setter number(Field field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) {
    field(c) = parse_number<V>(k, v);
  };
}

template <typename Field>
Setter boolean(Field field) {
  return [field](RunConfig& c, const std::string& k, const std::string& v) { field(c) = parse_bool(k, v); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"class_count", number<int>([](RunConfig& c) -> int& { return c.model.class_count; })},
      {"mask_size", number<int>([](RunConfig& c) -> int& { return c.model.mask_size; })},
      {"latent_dim", number<int>([](RunConfig& c) -> int& { return c.model.latent_dim; })},
      {"encoder_hidden", number<int>([](RunConfig& c) -> int& { return c.model.encoder_hidden; })},
      {"lstm_layers", number<int>([](RunConfig& c) -> int& { return c.model.lstm_layers; })},
      {"bidirectional", boolean([](RunConfig& c) -> bool& { return c.model.bidirectional; })},
      {"lstm_hidden_per_direction",
       number<int>([](RunConfig& c) -> int& { return c.model.lstm_hidden_per_direction; })},
      {"ff_expansion", number<int>([](RunConfig& c) -> int& { return c.model.ff_expansion; })},
      {"decoder_base_channels",
       number<int>([](RunConfig& c) -> int& { return c.model.decoder_base_channels; })},
      {"groupnorm_groups", number<int>([](RunConfig& c) -> int& { return c.model.groupnorm_groups; })},
      {"decoder_init_size", number<int>([](RunConfig& c) -> int& { return c.model.decoder_init_size; })},
      {"per_class_encoders", boolean([](RunConfig& c) -> bool& { return c.model.per_class_encoders; })},
      {"kl_weight", number<double>([](RunConfig& c) -> double& { return c.loss.kl_weight; })},
      {"use_weighted_ce", boolean([](RunConfig& c) -> bool& { return c.loss.use_weighted_ce; })},
      {"epochs", number<int>([](RunConfig& c) -> int& { return c.train.epochs; })},
      {"batch_size", number<int>([](RunConfig& c) -> int& { return c.train.batch_size; })},
      {"learning_rate", number<double>([](RunConfig& c) -> double& { return c.train.learning_rate; })},
      {"seed", number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.train.seed; })},
      {"split_seed", number<std::uint64_t>([](RunConfig& c) -> std::uint64_t& { return c.train.split_seed; })},
      {"train_ratio", number<double>([](RunConfig& c) -> double& { return c.train.train_ratio; })},
      {"test_ratio", number<double>([](RunConfig& c) -> double& { return c.train.test_ratio; })},
      {"grad_clip", number<double>([](RunConfig& c) -> double& { return c.train.grad_clip; })},
      {"eval_each_epoch", boolean([](RunConfig& c) -> bool& { return c.train.eval_each_epoch; })},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool saw_train = false, saw_test = false;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (seen.count(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    seen[key] = line_no;
    it->second(base, key, value);
    saw_train |= key == "train_ratio";
    saw_test |= key == "test_ratio";
  }
  if (saw_train && !saw_test) base.train.test_ratio = 1.0 - base.train.train_ratio;
  if (saw_test && !saw_train) base.train.train_ratio = 1.0 - base.train.test_ratio;
  base.model.validate();
  base.train.validate();
  base.loss.validate(base.model.class_count);
  return base;
}

RunConfig read_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), std::move(base));
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream out;
  out.precision(17);
  const auto b = [](bool v) { return v ? "true" : "false"; };
  out << "class_count = " << c.model.class_count << "\n"
      << "mask_size = " << c.model.mask_size << "\n"
      << "latent_dim = " << c.model.latent_dim << "\n"
      << "encoder_hidden = " << c.model.encoder_hidden << "\n"
      << "lstm_layers = " << c.model.lstm_layers << "\n"
      << "bidirectional = " << b(c.model.bidirectional) << "\n"
      << "lstm_hidden_per_direction = " << c.model.lstm_hidden_per_direction << "\n"
      << "ff_expansion = " << c.model.ff_expansion << "\n"
      << "decoder_base_channels = " << c.model.decoder_base_channels << "\n"
      << "groupnorm_groups = " << c.model.groupnorm_groups << "\n"
      << "decoder_init_size = " << c.model.decoder_init_size << "\n"
      << "per_class_encoders = " << b(c.model.per_class_encoders) << "\n"
      << "kl_weight = " << c.loss.kl_weight << "\n"
      << "use_weighted_ce = " << b(c.loss.use_weighted_ce) << "\n"
      << "epochs = " << c.train.epochs << "\n"
      << "batch_size = " << c.train.batch_size << "\n"
      << "learning_rate = " << c.train.learning_rate << "\n"
      << "seed = " << c.train.seed << "\n"
      << "split_seed = " << c.train.split_seed << "\n"
      << "train_ratio = " << c.train.train_ratio << "\n"
      << "test_ratio = " << c.train.test_ratio << "\n"
      << "grad_clip = " << c.train.grad_clip << "\n"
      << "eval_each_epoch = " << b(c.train.eval_each_epoch) << "\n";
  return out.str();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},         {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate}, {"seed", c.seed},
                     {"split_seed", c.split_seed}, {"train_ratio", c.train_ratio},
                     {"test_ratio", c.test_ratio}, {"grad_clip", c.grad_clip},
                     {"eval_each_epoch", c.eval_each_epoch}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("epochs").get_to(c.epochs);
  j.at("batch_size").get_to(c.batch_size);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("seed").get_to(c.seed);
  j.at("split_seed").get_to(c.split_seed);
  j.at("train_ratio").get_to(c.train_ratio);
  j.at("test_ratio").get_to(c.test_ratio);
  j.at("grad_clip").get_to(c.grad_clip);
  j.at("eval_each_epoch").get_to(c.eval_each_epoch);
}

}  // namespace maskvae
