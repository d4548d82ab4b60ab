#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gclr/container.hpp"
#include "gclr/encoders.hpp"
#include "gclr/estimator.hpp"
#include "gclr/optimizers.hpp"
#include "gclr/rng.hpp"

namespace gclr {

// Everything needed to continue a run after global step `step`.
struct Checkpoint {
  std::string config_snapshot;
  std::uint64_t step = 0;  // completed steps
  EncoderParams params;
  OptimizerState optimizer;
  EstimatorState estimator;
  Rng::State rng;  // run root stream

  bool operator==(const Checkpoint&) const = default;
};

inline constexpr io::Magic kCheckpointMagic{'G', 'C', 'L', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> serialize(const Checkpoint& ck) {
  io::ByteWriter w;
  w.put_string(ck.config_snapshot);
  w.put_u64(ck.step);
  detail::put_arch(w, ck.params.arch);
  w.put_vector(flatten(ck.params));

  const OptimizerState& o = ck.optimizer;
  w.put_u8(static_cast<std::uint8_t>(o.rule));
  w.put_f64(o.hyper.lr);
  w.put_f64(o.hyper.momentum_beta);
  w.put_f64(o.hyper.beta1);
  w.put_f64(o.hyper.beta2);
  w.put_f64(o.hyper.eps);
  w.put_f64(o.hyper.weight_decay);
  w.put_vector(o.first);
  w.put_vector(o.second);
  w.put_u64(o.step);

  const EstimatorState& e = ck.estimator;
  w.put_vector(e.u_image);
  w.put_vector(e.u_text);
  w.put_f64(e.gamma);
  w.put_u64(e.step);

  w.put_u64(ck.rng.key);
  w.put_u64(ck.rng.counter);
  return io::seal(kCheckpointMagic, kCheckpointVersion, w.bytes());
}

inline Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> file) {
  const auto payload = io::unseal(file, kCheckpointMagic, kCheckpointVersion);
  io::ByteReader r(payload);
  Checkpoint ck;
  ck.config_snapshot = r.get_string();
  ck.step = r.get_u64();
  const Architecture arch = detail::get_arch(r);
  ck.params = unflatten(arch, r.get_vector());

  OptimizerState& o = ck.optimizer;
  const auto rule = r.get_u8();
  if (rule > static_cast<std::uint8_t>(OptimizerRule::adamp)) {
    throw FormatError("checkpoint: unknown optimizer rule");
  }
  o.rule = static_cast<OptimizerRule>(rule);
  o.hyper.lr = r.get_f64();
  o.hyper.momentum_beta = r.get_f64();
  o.hyper.beta1 = r.get_f64();
  o.hyper.beta2 = r.get_f64();
  o.hyper.eps = r.get_f64();
  o.hyper.weight_decay = r.get_f64();
  o.first = r.get_vector();
  o.second = r.get_vector();
  o.step = r.get_u64();
  o.groups = parameter_groups(arch);

  EstimatorState& e = ck.estimator;
  e.u_image = r.get_vector();
  e.u_text = r.get_vector();
  e.gamma = r.get_f64();
  e.step = r.get_u64();

  ck.rng.key = r.get_u64();
  ck.rng.counter = r.get_u64();
  r.expect_end();
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  io::write_file(path, serialize(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(io::read_file(path));
}

}  // namespace gclr
