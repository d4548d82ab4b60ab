#pragma once

// Flat `key = value` experiment configuration. Unknown or repeated keys are
// errors. serialize() writes every key in a fixed order with defaults
// resolved, and parse(serialize(c)) == c.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "gclr/augmentation.hpp"
#include "gclr/container.hpp"
#include "gclr/encoders.hpp"
#include "gclr/errors.hpp"
#include "gclr/objectives.hpp"
#include "gclr/optimizers.hpp"
#include "gclr/synthetic_data.hpp"

namespace gclr {

struct ExperimentConfig {
  Variant variant = Variant::amclr;
  OptimizerRule optimizer = OptimizerRule::adamw;
  double tau = kDefaultTemperature;
  double gamma = 0.9;
  AugmentPlan augment{1,
                      {AugmentSpec::noise(0.1), AugmentSpec::dropout(0.1)},
                      {AugmentSpec::noise(0.1), AugmentSpec::scale(0.9, 1.1)}};
  GenConfig data;
  std::string dataset_path;  // empty: generate from `data`
  std::size_t batch_size = 128;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  Denominator denominator = Denominator::exclusive;
  std::string out_dir = "runs/default";
  double eval_fraction = 0.2;
  Architecture arch;  // d_img / d_txt mirror `data`
  OptimizerHyper opt;
  std::size_t checkpoint_every = 0;  // steps; 0 = final checkpoint only

  bool operator==(const ExperimentConfig&) const = default;

  // Resolves derived fields and enforces cross-field rules.
  void resolve() {
    if (variant == Variant::clip || variant == Variant::infonce || variant == Variant::sogclr) {
      augment.omega = 0;
    }
    arch.d_img = data.d_img;
    arch.d_txt = data.d_txt;
  }

  void validate() const {
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
    if (!(eval_fraction > 0.0 && eval_fraction < 1.0))
      throw ConfigError("eval_fraction must be in (0, 1)");
    // zero-shot reports top-10 over the class prototypes
    if (data.class_count < 10) throw ConfigError("class_count must be >= 10");
    if ((variant == Variant::clip || variant == Variant::infonce || variant == Variant::sogclr) &&
        augment.omega != 0) {
      throw ConfigError("variant " + std::string(to_string(variant)) + " requires omega = 0");
    }
    data.validate();
    arch.validate();
    opt.validate();
    augment.validate(batch_size);
  }
};

namespace config_detail {

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ConfigError("config: key '" + std::string(key) + "': invalid value '" +
                      std::string(v) + "'");
  }
  return out;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config: key '" + std::string(key) + "' expects true|false");
}

inline std::vector<AugmentSpec> parse_specs(std::string_view v) {
  std::vector<AugmentSpec> specs;
  std::size_t start = 0;
  while (start <= v.size()) {
    const std::size_t comma = v.find(',', start);
    const std::string item = trim(v.substr(start, comma - start));
    if (!item.empty()) specs.push_back(parse_augment_spec(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return specs;
}

inline std::string format_specs(const std::vector<AugmentSpec>& specs) {
  std::string out;
  for (std::size_t k = 0; k < specs.size(); ++k) {
    if (k) out += ",";
    out += to_string(specs[k]);
  }
  return out;
}

inline Variant parse_variant(std::string_view v) {
  for (Variant x : {Variant::clip, Variant::infonce, Variant::sogclr, Variant::amclr,
                    Variant::xamclr})
    if (to_string(x) == v) return x;
  throw ConfigError("config: unknown variant '" + std::string(v) + "'");
}

inline OptimizerRule parse_optimizer(std::string_view v) {
  for (OptimizerRule x : {OptimizerRule::momentum, OptimizerRule::adamw, OptimizerRule::adamp})
    if (to_string(x) == v) return x;
  throw ConfigError("config: unknown optimizer '" + std::string(v) + "'");
}

inline Denominator parse_denominator(std::string_view v) {
  if (v == "exclusive") return Denominator::exclusive;
  if (v == "inclusive") return Denominator::inclusive;
  throw ConfigError("config: denominator must be inclusive|exclusive");
}

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

inline const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    auto num = [&f](std::string key, auto getter) {
      using R = std::remove_cvref_t<decltype(getter(std::declval<C&>()))>;
      f.push_back({key,
                   [getter](const C& c) {
                     if constexpr (std::is_floating_point_v<R>)
                       return format_double(getter(const_cast<C&>(c)));
                     else
                       return std::to_string(getter(const_cast<C&>(c)));
                   },
                   [getter, key](C& c, std::string_view v) {
                     getter(c) = parse_number<R>(key, v);
                   }});
    };
    f.push_back({"variant", [](const C& c) { return std::string(to_string(c.variant)); },
                 [](C& c, std::string_view v) { c.variant = parse_variant(v); }});
    f.push_back({"optimizer", [](const C& c) { return std::string(to_string(c.optimizer)); },
                 [](C& c, std::string_view v) { c.optimizer = parse_optimizer(v); }});
    num("tau", [](C& c) -> double& { return c.tau; });
    num("gamma", [](C& c) -> double& { return c.gamma; });
    num("omega", [](C& c) -> std::size_t& { return c.augment.omega; });
    f.push_back({"image_augment",
                 [](const C& c) { return format_specs(c.augment.image_specs); },
                 [](C& c, std::string_view v) { c.augment.image_specs = parse_specs(v); }});
    f.push_back({"text_augment",
                 [](const C& c) { return format_specs(c.augment.text_specs); },
                 [](C& c, std::string_view v) { c.augment.text_specs = parse_specs(v); }});
    num("batch_size", [](C& c) -> std::size_t& { return c.batch_size; });
    num("epochs", [](C& c) -> std::size_t& { return c.epochs; });
    num("seed", [](C& c) -> std::uint64_t& { return c.seed; });
    f.push_back({"denominator", [](const C& c) { return std::string(to_string(c.denominator)); },
                 [](C& c, std::string_view v) { c.denominator = parse_denominator(v); }});
    f.push_back({"out_dir", [](const C& c) { return c.out_dir; },
                 [](C& c, std::string_view v) { c.out_dir = std::string(v); }});
    f.push_back({"dataset", [](const C& c) { return c.dataset_path; },
                 [](C& c, std::string_view v) { c.dataset_path = std::string(v); }});
    num("n", [](C& c) -> std::size_t& { return c.data.n; });
    num("class_count", [](C& c) -> std::size_t& { return c.data.class_count; });
    num("latent_dim", [](C& c) -> std::size_t& { return c.data.latent_dim; });
    num("d_img", [](C& c) -> std::size_t& { return c.data.d_img; });
    num("d_txt", [](C& c) -> std::size_t& { return c.data.d_txt; });
    num("sigma", [](C& c) -> double& { return c.data.sigma; });
    num("map_seed", [](C& c) -> std::uint64_t& { return c.data.map_seed; });
    num("data_seed", [](C& c) -> std::uint64_t& { return c.data.seed; });
    num("eval_fraction", [](C& c) -> double& { return c.eval_fraction; });
    num("layers", [](C& c) -> std::size_t& { return c.arch.layers; });
    num("hidden", [](C& c) -> std::size_t& { return c.arch.hidden; });
    num("embed_dim", [](C& c) -> std::size_t& { return c.arch.embed_dim; });
    f.push_back({"normalize",
                 [](const C& c) { return std::string(c.arch.normalize ? "true" : "false"); },
                 [](C& c, std::string_view v) { c.arch.normalize = parse_bool("normalize", v); }});
    num("lr", [](C& c) -> double& { return c.opt.lr; });
    num("momentum_beta", [](C& c) -> double& { return c.opt.momentum_beta; });
    num("beta1", [](C& c) -> double& { return c.opt.beta1; });
    num("beta2", [](C& c) -> double& { return c.opt.beta2; });
    num("eps", [](C& c) -> double& { return c.opt.eps; });
    num("weight_decay", [](C& c) -> double& { return c.opt.weight_decay; });
    num("checkpoint_every", [](C& c) -> std::size_t& { return c.checkpoint_every; });
    return f;
  }();
  return table;
}

}  // namespace config_detail

using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

// Reads `key = value` lines, applies `overrides` on top (they may replace keys
// from the text), then resolves and validates.
inline ExperimentConfig parse_config(std::string_view text, const ConfigOverrides& overrides = {}) {
  const auto& table = config_detail::fields();
  auto find = [&](const std::string& key) {
    return std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.key == key; });
  };
  std::vector<std::pair<std::string, std::string>> assignments;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = config_detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = config_detail::trim(std::string_view(body).substr(0, eq));
    std::string value = config_detail::trim(std::string_view(body).substr(eq + 1));
    if (find(key) == table.end()) {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    assignments.emplace_back(std::move(key), std::move(value));
  }
  for (const auto& [key, value] : overrides) {
    if (find(key) == table.end()) throw ConfigError("config override: unknown key '" + key + "'");
    assignments.emplace_back(key, value);
  }
  ExperimentConfig cfg;
  for (const auto& [key, value] : assignments) find(key)->set(cfg, value);
  cfg.resolve();
  cfg.validate();
  return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : config_detail::fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

inline std::string read_text(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return std::string(bytes.begin(), bytes.end());
}

inline ExperimentConfig load_config(const std::filesystem::path& path,
                                    const ConfigOverrides& overrides = {}) {
  return parse_config(read_text(path), overrides);
}

// Default config with resolved derived fields.
inline ExperimentConfig default_config() {
  ExperimentConfig c;
  c.resolve();
  return c;
}

}  // namespace gclr
