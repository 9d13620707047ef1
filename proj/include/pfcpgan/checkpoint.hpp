#pragma once

// Checkpoint directory: manifest.json (schema "pfcpgan-ckpt-1") plus params.bin,
// the little-endian concatenation of every array at the offsets the manifest lists.
//
// manifest.json:
//   version          "pfcpgan-ckpt-1"
//   dtype            "float32" | "float64"
//   step             completed training steps
//   seeds            {"model": u64, "train": u64}
//   generator_config, train_config   configuration snapshots
//   adam_steps       {"gen_profile": t, "gen_frontal": t, "disc_profile": t, "disc_frontal": t}
//   arrays           [{"name", "shape", "dtype", "offset", "count", "frozen"}]
//                    model arrays are "<network>/<layer>.<weight|bias>", Adam moments
//                    "adam/<network>/<m|v>/<layer>.<weight|bias>"
//   payload_bytes    size of params.bin
//   digest           "sha256:<hex>" of params.bin

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "pfcpgan/config.hpp"
#include "pfcpgan/networks.hpp"
#include "pfcpgan/optim.hpp"
#include "pfcpgan/serialize.hpp"

namespace pfcpgan {

static_assert(std::endian::native == std::endian::little, "checkpoint payloads assume a little-endian host");

inline constexpr const char* kCheckpointVersion = "pfcpgan-ckpt-1";

template <typename T>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "float32" : "float64";
}

/// Adam state of the four trained networks.
template <typename T>
struct OptimizerStates {
  AdamState<T> gen_profile, gen_frontal, disc_profile, disc_frontal;

  static OptimizerStates for_model(const ModelState<T>& s) {
    return {AdamState<T>::like(s.gen_profile.params), AdamState<T>::like(s.gen_frontal.params),
            AdamState<T>::like(s.disc_profile.params), AdamState<T>::like(s.disc_frontal.params)};
  }
  bool operator==(const OptimizerStates&) const = default;
};

template <typename Opt, typename Fn>
void for_each_optimizer(Opt& o, Fn&& fn) {
  fn("gen_profile", o.gen_profile);
  fn("gen_frontal", o.gen_frontal);
  fn("disc_profile", o.disc_profile);
  fn("disc_frontal", o.disc_frontal);
}

inline std::string sha256_hex(const void* data, std::size_t n) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, n, md, &len, EVP_sha256(), nullptr) != 1) throw IoError("sha256: digest computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string sha256_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(p.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string s = ss.str();
  return sha256_hex(s.data(), s.size());
}

inline void write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(p.string() + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(p.string() + ": write failed");
}

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError(p.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
struct LoadedCheckpoint {
  ModelState<T> state;
  OptimizerStates<T> optimizer;
  TrainConfig train_config;
  Json manifest;
};

namespace detail {

template <typename T>
struct PayloadWriter {
  std::string bytes;
  Json index = Json::array();

  void add(const std::string& name, const ParamArray<T>& a, bool frozen) {
    index.push_back({{"name", name},
                     {"shape", a.shape},
                     {"dtype", dtype_name<T>()},
                     {"offset", bytes.size()},
                     {"count", a.values.size()},
                     {"frozen", frozen}});
    bytes.append(reinterpret_cast<const char*>(a.values.data()), a.values.size() * sizeof(T));
  }
};

template <typename T>
void visit_optimizer_arrays(OptimizerStates<T>& opt, const std::function<void(const std::string&, ParamArray<T>&)>& fn) {
  for_each_optimizer(opt, [&](const char* net, AdamState<T>& st) {
    for (auto& a : st.m) fn(std::string("adam/") + net + "/m/" + a.name, a);
    for (auto& a : st.v) fn(std::string("adam/") + net + "/v/" + a.name, a);
  });
}

}  // namespace detail

/// Writes the checkpoint directory (created if needed) and returns its manifest.
template <typename T>
Json save_checkpoint(const ModelState<T>& state, const OptimizerStates<T>& opt, const TrainConfig& config,
                     const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create checkpoint directory: " + ec.message());

  detail::PayloadWriter<T> w;
  for_each_model_array(state, [&](const std::string& name, const ParamArray<T>& a) {
    w.add(name, a, name.rfind("perceptual/", 0) == 0);
  });
  OptimizerStates<T> opt_copy = opt;
  detail::visit_optimizer_arrays<T>(opt_copy, [&](const std::string& name, ParamArray<T>& a) { w.add(name, a, false); });

  Json adam_steps = Json::object();
  for_each_optimizer(opt, [&](const char* net, const AdamState<T>& st) { adam_steps[net] = st.t; });

  Json m;
  m["version"] = kCheckpointVersion;
  m["dtype"] = dtype_name<T>();
  m["step"] = state.step;
  m["seeds"] = {{"model", state.seeds.model}, {"train", config.seed}};
  m["generator_config"] = to_json(state.config);
  m["train_config"] = to_json(config);
  m["adam_steps"] = adam_steps;
  m["arrays"] = w.index;
  m["payload_bytes"] = w.bytes.size();
  m["digest"] = "sha256:" + sha256_hex(w.bytes.data(), w.bytes.size());

  const auto bin = dir / "params.bin";
  {
    std::ofstream out(bin, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(bin.string() + ": cannot open for writing");
    out.write(w.bytes.data(), std::streamsize(w.bytes.size()));
    if (!out) throw IoError(bin.string() + ": write failed");
  }
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

inline Json read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  if (!std::filesystem::exists(path)) throw IoError(path.string() + ": no checkpoint manifest");
  Json m;
  try {
    m = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::kMalformed, path.string() + ": malformed manifest: " + e.what());
  }
  if (!m.is_object() || !m.contains("version"))
    throw CheckpointError(CheckpointError::Kind::kMalformed, path.string() + ": manifest has no version tag");
  const std::string v = m["version"].is_string() ? m["version"].get<std::string>() : "";
  if (v != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::kVersionMismatch,
                          path.string() + ": checkpoint version '" + v + "', expected '" + kCheckpointVersion + "'");
  return m;
}

/// "float32" or "float64".
inline std::string checkpoint_dtype(const std::filesystem::path& dir) {
  return read_manifest(dir).value("dtype", std::string());
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& dir) {
  using Kind = CheckpointError::Kind;
  Json m = read_manifest(dir);
  const std::string where = dir.string();
  try {
    const std::string dtype = m.at("dtype").get<std::string>();
    if (dtype != dtype_name<T>())
      throw CheckpointError(Kind::kMalformed,
                            where + ": checkpoint holds " + dtype + " arrays, requested " + dtype_name<T>());

    const std::string payload = read_text_file(dir / "params.bin");
    const std::string digest = "sha256:" + sha256_hex(payload.data(), payload.size());
    if (payload.size() != m.at("payload_bytes").get<std::size_t>() || digest != m.at("digest").get<std::string>())
      throw CheckpointError(Kind::kDigestMismatch, where + ": params.bin digest " + digest +
                                                       " does not match manifest " + m.at("digest").get<std::string>());

    std::map<std::string, const Json*> index;
    for (const auto& e : m.at("arrays")) index[e.at("name").get<std::string>()] = &e;

    LoadedCheckpoint<T> out;
    out.train_config = train_config_from_json(m.at("train_config"));
    const GeneratorConfig gcfg = generator_config_from_json(m.at("generator_config"));
    out.state = init_model<T>(gcfg, m.at("seeds").at("model").get<std::uint64_t>());
    out.state.step = m.at("step").get<std::uint64_t>();
    out.optimizer = OptimizerStates<T>::for_model(out.state);

    auto fill = [&](const std::string& name, ParamArray<T>& a) {
      auto it = index.find(name);
      if (it == index.end()) throw CheckpointError(Kind::kMissingArray, where + ": array '" + name + "' missing");
      const Json& e = *it->second;
      if (e.at("shape").get<std::vector<int>>() != a.shape || e.at("count").get<std::size_t>() != a.values.size())
        throw CheckpointError(Kind::kMalformed, where + ": array '" + name + "' has an unexpected shape");
      const std::size_t off = e.at("offset").get<std::size_t>();
      const std::size_t bytes = a.values.size() * sizeof(T);
      if (off > payload.size() || payload.size() - off < bytes)
        throw CheckpointError(Kind::kMalformed, where + ": array '" + name + "' lies outside params.bin");
      std::memcpy(a.values.data(), payload.data() + off, bytes);
      index.erase(it);
    };
    for_each_model_array(out.state, fill);
    detail::visit_optimizer_arrays<T>(out.optimizer, fill);
    if (!index.empty())
      throw CheckpointError(Kind::kMalformed, where + ": unexpected array '" + index.begin()->first + "'");
    const Json& steps = m.at("adam_steps");
    for_each_optimizer(out.optimizer,
                       [&](const char* net, AdamState<T>& st) { st.t = steps.at(net).get<std::uint64_t>(); });
    out.manifest = std::move(m);
    return out;
  } catch (const Json::exception& e) {
    throw CheckpointError(Kind::kMalformed, where + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(Kind::kMalformed, where + ": invalid configuration snapshot: " + e.what());
  }
}

/// Copies named arrays from a checkpoint into an existing model; used to plug in
/// externally trained weights. Arrays absent from the checkpoint are left untouched.
/// Returns the number of arrays replaced.
template <typename T>
std::size_t import_arrays(ModelState<T>& state, const std::filesystem::path& dir, const std::string& prefix = "") {
  LoadedCheckpoint<T> src = load_checkpoint<T>(dir);
  std::map<std::string, const ParamArray<T>*> by_name;
  for_each_model_array(std::as_const(src.state),
                       [&](const std::string& name, const ParamArray<T>& a) { by_name[name] = &a; });
  std::size_t n = 0;
  for_each_model_array(state, [&](const std::string& name, ParamArray<T>& a) {
    if (!prefix.empty() && name.rfind(prefix, 0) != 0) return;
    auto it = by_name.find(name);
    if (it == by_name.end() || it->second->shape != a.shape) return;
    a.values = it->second->values;
    ++n;
  });
  return n;
}

}  // namespace pfcpgan
