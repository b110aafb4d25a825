#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "overnet/common.hpp"
#include "overnet/model.hpp"
#include "overnet/param_store.hpp"

namespace overnet {

// The container stores raw little-endian words; this code memcpy's them,
// which is only correct on a little-endian host.
static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  // Verbatim key=value text of the training run, if any.
  std::string train_config_text;
  ParamStore<float> params;
};

namespace detail {

struct RawEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> payload;
};

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_entry(std::string& out, const std::string& name,
                      const std::vector<std::uint32_t>& dims,
                      const float* data, std::size_t count) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.append(name);
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  out.append(reinterpret_cast<const char*>(data), count * sizeof(float));
}

struct Cursor {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw IoError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
  void floats(float* dst, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(dst, buf.data() + pos, n * sizeof(float));
    pos += n * sizeof(float);
  }
};

inline std::vector<std::uint32_t> tensor_dims(const Tensor4f& t) {
  return {static_cast<std::uint32_t>(t.n), static_cast<std::uint32_t>(t.c),
          static_cast<std::uint32_t>(t.h), static_cast<std::uint32_t>(t.w)};
}

inline void put_text_entry(std::string& out, const std::string& name,
                           const std::string& text) {
  std::vector<float> chars(text.size());
  for (std::size_t i = 0; i < text.size(); ++i)
    chars[i] = static_cast<float>(static_cast<unsigned char>(text[i]));
  put_entry(out, name, {static_cast<std::uint32_t>(text.size())},
            chars.data(), chars.size());
}

inline std::string text_of(const RawEntry& e) {
  std::string s(e.payload.size(), '\0');
  for (std::size_t i = 0; i < e.payload.size(); ++i)
    s[i] = static_cast<char>(static_cast<unsigned char>(e.payload[i]));
  return s;
}

}  // namespace detail

inline std::string serialize_checkpoint(const ParamStore<float>& ps,
                                        const ModelConfig& cfg,
                                        const std::string& train_cfg_text) {
  using namespace detail;
  std::string out;
  out.append("OVNT", 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(3 * ps.names().size() + 3));
  for (const auto& name : ps.names()) {
    const auto& e = ps.get(name);
    const auto dims = tensor_dims(e.value);
    put_entry(out, name, dims, e.value.data.data(), e.value.size());
    put_entry(out, name + ".adam_m", dims, e.adam_m.data.data(),
              e.adam_m.size());
    put_entry(out, name + ".adam_v", dims, e.adam_v.data.data(),
              e.adam_v.size());
  }
  const float step = static_cast<float>(ps.step_count);
  put_entry(out, "step_count", {1}, &step, 1);
  put_text_entry(out, "config", model_config_text(cfg));
  put_text_entry(out, "train_config", train_cfg_text);
  return out;
}

inline void save_checkpoint(const std::string& path,
                            const ParamStore<float>& ps,
                            const ModelConfig& cfg,
                            const std::string& train_cfg_text = {}) {
  const std::string blob = serialize_checkpoint(ps, cfg, train_cfg_text);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("write " + path + ": cannot open");
  f.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!f) throw IoError("write " + path + ": short write");
}

inline Checkpoint deserialize_checkpoint(const std::string& blob) {
  using namespace detail;
  Cursor cur{blob};
  if (cur.bytes(4) != "OVNT") throw IoError("checkpoint: bad magic");
  const std::uint32_t version = cur.u32();
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " +
                  std::to_string(version));
  const std::uint32_t count = cur.u32();
  // 12 bytes is the smallest possible entry; a count beyond that bound can
  // only come from a damaged header.
  if (count > (blob.size() - cur.pos) / 12 + 1)
    throw IoError("checkpoint: truncated file");

  std::vector<RawEntry> entries(count);
  for (auto& e : entries) {
    e.name = cur.bytes(cur.u32());
    const std::uint32_t rank = cur.u32();
    if (rank > 8) throw IoError("checkpoint: entry '" + e.name +
                                "': implausible rank");
    e.dims.resize(rank);
    std::size_t total = rank ? 1 : 0;
    for (auto& d : e.dims) {
      d = cur.u32();
      if (d != 0 && total > (blob.size() / sizeof(float)) / d + 1)
        throw IoError("checkpoint: truncated file");
      total *= d;
    }
    e.payload.resize(total);
    cur.floats(e.payload.data(), total);
  }
  if (cur.pos != blob.size())
    throw IoError("checkpoint: trailing bytes after last entry");

  const RawEntry* config_entry = nullptr;
  for (const auto& e : entries)
    if (e.name == "config") config_entry = &e;
  if (!config_entry) throw IoError("checkpoint: missing 'config' entry");

  Checkpoint ck;
  ck.model = parse_model_config_text(text_of(*config_entry));
  register_params(ck.params, ck.model);

  // The file must hold exactly the canonical sequence for its config:
  // value/.adam_m/.adam_v per parameter in registration order, then
  // step_count, config, train_config.
  std::size_t i = 0;
  auto take = [&](const std::string& want,
                  const std::vector<std::uint32_t>* want_dims) -> const
      RawEntry& {
        if (i >= entries.size())
          throw IoError("checkpoint: missing entry '" + want + "'");
        const RawEntry& e = entries[i++];
        if (e.name != want)
          throw IoError("checkpoint: entry " + std::to_string(i - 1) +
                        ": expected '" + want + "', found '" + e.name + "'");
        if (want_dims && e.dims != *want_dims)
          throw IoError("checkpoint: entry '" + want + "': shape mismatch");
        return e;
      };

  for (const auto& name : ck.params.names()) {
    auto& slot = ck.params.get(name);
    const auto dims = tensor_dims(slot.value);
    const auto copy_into = [&](const RawEntry& e, Tensor4f& t) {
      std::memcpy(t.data.data(), e.payload.data(),
                  e.payload.size() * sizeof(float));
    };
    copy_into(take(name, &dims), slot.value);
    copy_into(take(name + ".adam_m", &dims), slot.adam_m);
    copy_into(take(name + ".adam_v", &dims), slot.adam_v);
  }
  const std::vector<std::uint32_t> one{1};
  const RawEntry& step = take("step_count", &one);
  ck.params.step_count = static_cast<std::uint64_t>(step.payload[0]);
  take("config", nullptr);
  ck.train_config_text = text_of(take("train_config", nullptr));
  if (i != entries.size())
    throw IoError("checkpoint: unexpected extra entry '" + entries[i].name +
                  "'");
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read " + path + ": cannot open");
  std::string blob((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (f.bad()) throw IoError("read " + path + ": stream failure");
  try {
    return deserialize_checkpoint(blob);
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

}  // namespace overnet
