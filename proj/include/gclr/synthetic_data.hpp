#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gclr/container.hpp"
#include "gclr/errors.hpp"
#include "gclr/numerics.hpp"
#include "gclr/rng.hpp"

namespace gclr {

// Parameters of the linear latent-class generative model. Class means and the
// two modality maps are drawn from map_seed; per-sample draws from seed.
struct GenConfig {
  std::size_t n = 2500;
  std::size_t class_count = 50;
  std::size_t latent_dim = 12;
  std::size_t d_img = 32;
  std::size_t d_txt = 24;
  double sigma = 0.35;
  std::uint64_t map_seed = 7;
  std::uint64_t seed = 1;

  bool operator==(const GenConfig&) const = default;

  void validate() const {
    if (!(sigma >= 0.0)) throw ConfigError("GenConfig: sigma must be >= 0");
    if (latent_dim < 1) throw ConfigError("GenConfig: latent_dim must be >= 1");
    if (class_count < 2) throw ConfigError("GenConfig: class_count must be >= 2");
    if (n < 1) throw ConfigError("GenConfig: n must be >= 1");
    if (d_img < latent_dim || d_txt < latent_dim) {
      throw ConfigError("GenConfig: d_img and d_txt must be >= latent_dim");
    }
  }
};

struct BimodalDataset {
  Matrix images;  // n x d_img
  Matrix texts;   // n x d_txt
  std::vector<std::uint32_t> labels;
  std::size_t class_count = 0;
  std::optional<GenConfig> gen_config;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t d_img() const noexcept { return images.cols(); }
  std::size_t d_txt() const noexcept { return texts.cols(); }

  bool operator==(const BimodalDataset&) const = default;
};

// Fixed world of the generative model: class means and modality maps.
struct LatentModel {
  Matrix class_means;  // class_count x latent_dim
  Matrix image_map;    // d_img x latent_dim
  Matrix text_map;     // d_txt x latent_dim
};

inline LatentModel latent_model(const GenConfig& cfg) {
  cfg.validate();
  const Rng root(cfg.map_seed);
  LatentModel model{Matrix(cfg.class_count, cfg.latent_dim), Matrix(cfg.d_img, cfg.latent_dim),
                    Matrix(cfg.d_txt, cfg.latent_dim)};
  Rng means = root.split(stream::kClassMeans);
  for (double& x : model.class_means.data()) x = means.normal();
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  Rng a = root.split(stream::kImageMap);
  for (double& x : model.image_map.data()) x = a.normal(0.0, map_scale);
  Rng b = root.split(stream::kTextMap);
  for (double& x : model.text_map.data()) x = b.normal(0.0, map_scale);
  return model;
}

namespace detail {
inline void apply_map(const Matrix& map, std::span<const double> z, std::span<double> out) {
  for (std::size_t r = 0; r < map.rows(); ++r) out[r] = dot(map.row(r), z);
}
}  // namespace detail

inline BimodalDataset generate(const GenConfig& cfg) {
  const LatentModel model = latent_model(cfg);
  BimodalDataset ds;
  ds.images = Matrix(cfg.n, cfg.d_img);
  ds.texts = Matrix(cfg.n, cfg.d_txt);
  ds.labels.resize(cfg.n);
  ds.class_count = cfg.class_count;
  ds.gen_config = cfg;

  const Rng samples = Rng(cfg.seed).split(stream::kSamples);
  std::vector<double> z(cfg.latent_dim);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Rng r = samples.split(i);
    const auto c = static_cast<std::uint32_t>(r.below(cfg.class_count));
    for (std::size_t k = 0; k < cfg.latent_dim; ++k)
      z[k] = model.class_means(c, k) + cfg.sigma * r.normal();
    ds.labels[i] = c;
    detail::apply_map(model.image_map, z, ds.images.row(i));
    detail::apply_map(model.text_map, z, ds.texts.row(i));
  }
  return ds;
}

// Noise-free text of each class mean, one row per class.
inline Matrix make_class_prototypes(const BimodalDataset& ds) {
  if (!ds.gen_config) {
    throw UnsupportedDatasetError("make_class_prototypes: dataset has no generator config");
  }
  const LatentModel model = latent_model(*ds.gen_config);
  Matrix protos(ds.gen_config->class_count, ds.gen_config->d_txt);
  for (std::size_t c = 0; c < protos.rows(); ++c)
    detail::apply_map(model.text_map, model.class_means.row(c), protos.row(c));
  return protos;
}

// Rows in the order given by `indices`; keeps the generator config.
inline BimodalDataset subset(const BimodalDataset& ds, std::span<const std::size_t> indices) {
  BimodalDataset out;
  out.images = gather_rows(ds.images, indices);
  out.texts = gather_rows(ds.texts, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(ds.labels[i]);
  out.class_count = ds.class_count;
  out.gen_config = ds.gen_config;
  return out;
}

inline constexpr io::Magic kDatasetMagic{'G', 'C', 'L', 'D'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline std::vector<std::uint8_t> serialize(const BimodalDataset& ds) {
  io::ByteWriter w;
  w.put_u64(ds.size());
  w.put_u64(ds.d_img());
  w.put_u64(ds.d_txt());
  w.put_u64(ds.class_count);
  w.put_f64s(ds.images.data());
  w.put_f64s(ds.texts.data());
  for (std::uint32_t l : ds.labels) w.put_u32(l);
  w.put_u8(ds.gen_config ? 1 : 0);
  if (ds.gen_config) {
    const GenConfig& g = *ds.gen_config;
    w.put_u64(g.n);
    w.put_u64(g.class_count);
    w.put_u64(g.latent_dim);
    w.put_u64(g.d_img);
    w.put_u64(g.d_txt);
    w.put_f64(g.sigma);
    w.put_u64(g.map_seed);
    w.put_u64(g.seed);
  }
  return io::seal(kDatasetMagic, kDatasetVersion, w.bytes());
}

inline BimodalDataset deserialize_dataset(std::span<const std::uint8_t> file) {
  const auto payload = io::unseal(file, kDatasetMagic, kDatasetVersion);
  io::ByteReader r(payload);
  const std::uint64_t n = r.get_u64();
  const std::uint64_t d_img = r.get_u64();
  const std::uint64_t d_txt = r.get_u64();
  BimodalDataset ds;
  ds.class_count = r.get_u64();
  if ((n * (d_img + d_txt) * 8 + n * 4) > r.remaining()) {
    throw FormatError("dataset: header sizes exceed payload");
  }
  ds.images = Matrix(n, d_img);
  ds.texts = Matrix(n, d_txt);
  r.get_f64s(ds.images.data());
  r.get_f64s(ds.texts.data());
  ds.labels.resize(n);
  for (auto& l : ds.labels) {
    l = r.get_u32();
    if (l >= ds.class_count) throw FormatError("dataset: label out of range");
  }
  if (r.get_u8() != 0) {
    GenConfig g;
    g.n = r.get_u64();
    g.class_count = r.get_u64();
    g.latent_dim = r.get_u64();
    g.d_img = r.get_u64();
    g.d_txt = r.get_u64();
    g.sigma = r.get_f64();
    g.map_seed = r.get_u64();
    g.seed = r.get_u64();
    ds.gen_config = g;
  }
  r.expect_end();
  return ds;
}

inline void save(const BimodalDataset& ds, const std::filesystem::path& path) {
  io::write_file(path, serialize(ds));
}

inline BimodalDataset load(const std::filesystem::path& path) {
  return deserialize_dataset(io::read_file(path));
}

}  // namespace gclr
