#ifndef SCANFILL_CHECKPOINT_HPP
#define SCANFILL_CHECKPOINT_HPP

#include <fstream>

#include "scanfill/np_models.hpp"
#include "scanfill/serialize.hpp"

namespace scanfill {

// SFCK checkpoint: magic "SFCK", version (u32), model kind (u8), config
// fingerprint (u64), tensor count (u32), then (name_len u32, name, SFT1).

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_checkpoint(std::ostream& os, ModelKind kind,
                      std::uint64_t fingerprint, const ParamStore<T>& params) {
  os.write("SFCK", 4);
  detail::write_raw<std::uint32_t>(os, kCheckpointVersion);
  detail::write_raw<std::uint8_t>(os, static_cast<std::uint8_t>(kind));
  detail::write_raw<std::uint64_t>(os, fingerprint);
  detail::write_raw<std::uint32_t>(os,
                                   static_cast<std::uint32_t>(params.named().size()));
  for (const auto& [name, tensor] : params.named()) {
    detail::write_raw<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_sft1(os, tensor);
  }
}

template <typename T>
void save_checkpoint(const std::string& path, ModelKind kind,
                     std::uint64_t fingerprint, const ParamStore<T>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  write_checkpoint(os, kind, fingerprint, params);
}

struct CheckpointHeader {
  ModelKind kind;
  std::uint64_t fingerprint = 0;
  std::uint32_t tensor_count = 0;
};

inline CheckpointHeader read_checkpoint_header(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SFCK", 4) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  const auto version = detail::read_raw<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version));
  CheckpointHeader h;
  h.kind = static_cast<ModelKind>(detail::read_raw<std::uint8_t>(is));
  h.fingerprint = detail::read_raw<std::uint64_t>(is);
  h.tensor_count = detail::read_raw<std::uint32_t>(is);
  return h;
}

inline CheckpointHeader peek_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  return read_checkpoint_header(is);
}

// Loads tensors into an existing parameter store; the architecture must match
// (same fingerprint, same names and shapes).
template <typename T>
void load_checkpoint(std::istream& is, ModelKind expected_kind,
                     std::uint64_t expected_fingerprint,
                     ParamStore<T>& params) {
  const auto h = read_checkpoint_header(is);
  if (h.kind != expected_kind)
    throw std::runtime_error(
        std::string("checkpoint model kind mismatch: file has ") +
        model_kind_name(h.kind) + ", expected " +
        model_kind_name(expected_kind));
  if (h.fingerprint != expected_fingerprint)
    throw std::runtime_error(
        "checkpoint config fingerprint mismatch: file " +
        std::to_string(h.fingerprint) + " vs expected " +
        std::to_string(expected_fingerprint));
  if (h.tensor_count != params.named().size())
    throw std::runtime_error("checkpoint tensor count mismatch");
  for (std::uint32_t i = 0; i < h.tensor_count; ++i) {
    const auto name_len = detail::read_raw<std::uint32_t>(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    auto loaded = read_sft1<T>(is);
    auto& target = params.at(name);
    if (loaded.shape() != target.shape())
      throw std::runtime_error("checkpoint tensor " + name +
                               " shape mismatch: " + shape_str(loaded.shape()) +
                               " vs " + shape_str(target.shape()));
    target.data() = loaded.data();
  }
}

template <typename T>
void load_checkpoint(const std::string& path, ModelKind expected_kind,
                     std::uint64_t expected_fingerprint,
                     ParamStore<T>& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  load_checkpoint(is, expected_kind, expected_fingerprint, params);
}

}  // namespace scanfill

#endif  // SCANFILL_CHECKPOINT_HPP
