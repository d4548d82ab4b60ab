#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gclr/container.hpp"
#include "gclr/errors.hpp"
#include "gclr/numerics.hpp"
#include "gclr/rng.hpp"

namespace gclr {

enum class Modality : std::uint8_t { image = 0, text = 1 };

inline const char* to_string(Modality m) { return m == Modality::image ? "image" : "text"; }

// Per-modality MLP: input -> [tanh hidden] -> embed_dim, then optional row
// L2 normalization. One layer means a purely linear (affine) encoder.
struct Architecture {
  std::size_t layers = 2;
  std::size_t d_img = 32;
  std::size_t d_txt = 24;
  std::size_t hidden = 64;
  std::size_t embed_dim = 16;
  bool normalize = true;

  bool operator==(const Architecture&) const = default;

  std::size_t input_dim(Modality m) const { return m == Modality::image ? d_img : d_txt; }

  // (fan_in, fan_out) per layer
  std::vector<std::pair<std::size_t, std::size_t>> layer_shapes(Modality m) const {
    if (layers == 1) return {{input_dim(m), embed_dim}};
    return {{input_dim(m), hidden}, {hidden, embed_dim}};
  }

  std::size_t parameter_count(Modality m) const {
    std::size_t count = 0;
    for (auto [fan_in, fan_out] : layer_shapes(m)) count += (fan_in + 1) * fan_out;
    return count;
  }
  std::size_t parameter_count() const {
    return parameter_count(Modality::image) + parameter_count(Modality::text);
  }
  // Start of a modality's block in the flattened vector.
  std::size_t offset(Modality m) const {
    return m == Modality::image ? 0 : parameter_count(Modality::image);
  }

  void validate() const {
    if (layers != 1 && layers != 2) throw ConfigError("Architecture: layers must be 1 or 2");
    if (d_img < 1 || d_txt < 1 || embed_dim < 1 || (layers == 2 && hidden < 1)) {
      throw ConfigError("Architecture: dimensions must be >= 1");
    }
  }
};

struct DenseLayer {
  Matrix weight;  // fan_out x fan_in
  std::vector<double> bias;
  bool operator==(const DenseLayer&) const = default;
};

struct EncoderParams {
  Architecture arch;
  std::vector<DenseLayer> image;
  std::vector<DenseLayer> text;

  bool operator==(const EncoderParams&) const = default;

  std::vector<DenseLayer>& layers(Modality m) { return m == Modality::image ? image : text; }
  const std::vector<DenseLayer>& layers(Modality m) const {
    return m == Modality::image ? image : text;
  }
};

inline EncoderParams init_encoders(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  EncoderParams p;
  p.arch = arch;
  const Rng root(seed);
  for (Modality m : {Modality::image, Modality::text}) {
    const Rng mod =
        root.split(m == Modality::image ? stream::kImageEncoder : stream::kTextEncoder);
    const auto shapes = arch.layer_shapes(m);
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      auto [fan_in, fan_out] = shapes[l];
      Rng r = mod.split(l);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      DenseLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
      for (double& w : layer.weight.data()) w = r.uniform(-bound, bound);
      p.layers(m).push_back(std::move(layer));
    }
  }
  return p;
}

// Canonical order: image layers then text layers; per layer the row-major
// weight followed by the bias.
inline std::vector<double> flatten(const EncoderParams& p) {
  std::vector<double> flat;
  flat.reserve(p.arch.parameter_count());
  for (Modality m : {Modality::image, Modality::text}) {
    for (const auto& layer : p.layers(m)) {
      flat.insert(flat.end(), layer.weight.data().begin(), layer.weight.data().end());
      flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
    }
  }
  return flat;
}

inline EncoderParams unflatten(const Architecture& arch, std::span<const double> flat) {
  arch.validate();
  if (flat.size() != arch.parameter_count()) {
    throw ShapeError("unflatten: length " + std::to_string(flat.size()) + ", expected " +
                     std::to_string(arch.parameter_count()));
  }
  EncoderParams p;
  p.arch = arch;
  std::size_t pos = 0;
  for (Modality m : {Modality::image, Modality::text}) {
    for (auto [fan_in, fan_out] : arch.layer_shapes(m)) {
      DenseLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out)};
      std::copy_n(flat.begin() + pos, fan_in * fan_out, layer.weight.data().begin());
      pos += fan_in * fan_out;
      std::copy_n(flat.begin() + pos, fan_out, layer.bias.begin());
      pos += fan_out;
      p.layers(m).push_back(std::move(layer));
    }
  }
  return p;
}

// A contiguous slice of the flattened parameter vector.
struct ParamGroup {
  std::size_t offset = 0;
  std::size_t length = 0;
  bool scale_invariant = false;
};

// One group per layer (weight and bias together). With normalized outputs the
// final layer of each modality is scale-invariant: scaling its weight and bias
// by c > 0 leaves the embedding unchanged.
inline std::vector<ParamGroup> parameter_groups(const Architecture& arch) {
  std::vector<ParamGroup> groups;
  std::size_t pos = 0;
  for (Modality m : {Modality::image, Modality::text}) {
    const auto shapes = arch.layer_shapes(m);
    for (std::size_t l = 0; l < shapes.size(); ++l) {
      const std::size_t len = (shapes[l].first + 1) * shapes[l].second;
      groups.push_back({pos, len, arch.normalize && l + 1 == shapes.size()});
      pos += len;
    }
  }
  return groups;
}

struct ForwardTape {
  Modality modality = Modality::image;
  Matrix input;
  Matrix hidden;     // tanh activations; empty for one-layer encoders
  Matrix output;     // pre-normalization
  std::vector<double> norms;
  Matrix embedding;  // what forward returned
};

struct ForwardResult {
  Matrix embedding;
  ForwardTape tape;
};

namespace detail {
// x * W^T + b
inline Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix out = matmul_nt(x, layer.weight);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += layer.bias[j];
  }
  return out;
}
}  // namespace detail

inline ForwardResult forward(const EncoderParams& params, const Matrix& inputs, Modality m) {
  const auto& layers = params.layers(m);
  if (inputs.cols() != params.arch.input_dim(m)) {
    throw ShapeError(std::string("forward: ") + to_string(m) + " input has " +
                     std::to_string(inputs.cols()) + " columns, expected " +
                     std::to_string(params.arch.input_dim(m)));
  }
  ForwardTape tape;
  tape.modality = m;
  tape.input = inputs;
  if (layers.size() == 2) {
    tape.hidden = detail::affine(inputs, layers[0]);
    for (double& x : tape.hidden.data()) x = std::tanh(x);
    tape.output = detail::affine(tape.hidden, layers[1]);
  } else {
    tape.output = detail::affine(inputs, layers[0]);
  }
  if (params.arch.normalize) {
    tape.norms = row_norms(tape.output);
    tape.embedding = row_l2_normalize(tape.output);
  } else {
    tape.embedding = tape.output;
  }
  Matrix emb = tape.embedding;
  return {std::move(emb), std::move(tape)};
}

// Adds the vector-Jacobian product of `upstream` (dL/d embedding) into the
// full-length flat gradient `grad`.
inline void backward(const EncoderParams& params, const ForwardTape& tape,
                     const Matrix& upstream, std::span<double> grad) {
  const Architecture& arch = params.arch;
  if (upstream.rows() != tape.embedding.rows() || upstream.cols() != tape.embedding.cols()) {
    throw ShapeError("backward: upstream shape does not match tape");
  }
  if (grad.size() != arch.parameter_count()) throw ShapeError("backward: gradient length");

  Matrix d_out = upstream;
  if (arch.normalize) {
    // d/do (o/|o|) applied to g: (g - y (y.g)) / |o|
    for (std::size_t i = 0; i < d_out.rows(); ++i) {
      auto y = tape.embedding.row(i);
      auto g = d_out.row(i);
      const double yg = dot(y, g);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] = (g[k] - y[k] * yg) / tape.norms[i];
    }
  }

  const auto& layers = params.layers(tape.modality);
  std::size_t layer_offset = arch.offset(tape.modality);
  std::vector<std::size_t> offsets;
  for (const auto& l : layers) {
    offsets.push_back(layer_offset);
    layer_offset += l.weight.size() + l.bias.size();
  }

  auto accumulate_layer = [&](std::size_t l, const Matrix& d_pre, const Matrix& layer_input) {
    const Matrix d_w = matmul_tn(d_pre, layer_input);  // fan_out x fan_in
    double* dst = grad.data() + offsets[l];
    for (double x : d_w.data()) *dst++ += x;
    for (std::size_t i = 0; i < d_pre.rows(); ++i) {
      auto row = d_pre.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) dst[j] += row[j];
    }
  };

  if (layers.size() == 2) {
    accumulate_layer(1, d_out, tape.hidden);
    Matrix d_hidden = matmul(d_out, layers[1].weight);
    for (std::size_t k = 0; k < d_hidden.size(); ++k) {
      const double h = tape.hidden.data()[k];
      d_hidden.data()[k] *= (1.0 - h * h);
    }
    accumulate_layer(0, d_hidden, tape.input);
  } else {
    accumulate_layer(0, d_out, tape.input);
  }
}

inline std::vector<double> backward(const EncoderParams& params, const ForwardTape& tape,
                                    const Matrix& upstream) {
  std::vector<double> grad(params.arch.parameter_count(), 0.0);
  backward(params, tape, upstream, grad);
  return grad;
}

namespace detail {
inline void put_arch(io::ByteWriter& w, const Architecture& a) {
  w.put_u64(a.layers);
  w.put_u64(a.d_img);
  w.put_u64(a.d_txt);
  w.put_u64(a.hidden);
  w.put_u64(a.embed_dim);
  w.put_u8(a.normalize ? 1 : 0);
}
inline Architecture get_arch(io::ByteReader& r) {
  Architecture a;
  a.layers = r.get_u64();
  a.d_img = r.get_u64();
  a.d_txt = r.get_u64();
  a.hidden = r.get_u64();
  a.embed_dim = r.get_u64();
  a.normalize = r.get_u8() != 0;
  a.validate();
  return a;
}
}  // namespace detail

inline constexpr io::Magic kParamsMagic{'G', 'C', 'L', 'P'};
inline constexpr std::uint32_t kParamsVersion = 1;

inline void save_params(const EncoderParams& p, const std::filesystem::path& path) {
  io::ByteWriter w;
  detail::put_arch(w, p.arch);
  w.put_vector(flatten(p));
  io::write_file(path, io::seal(kParamsMagic, kParamsVersion, w.bytes()));
}

inline EncoderParams load_params(const std::filesystem::path& path) {
  const auto payload = io::unseal(io::read_file(path), kParamsMagic, kParamsVersion);
  io::ByteReader r(payload);
  const Architecture arch = detail::get_arch(r);
  const auto flat = r.get_vector();
  r.expect_end();
  return unflatten(arch, flat);
}

}  // namespace gclr
