// Copyright 2026 The longdoc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "longdoc/checkpoint.hpp"

#include <zlib.h>

#include "binary_io.hpp"
#include "longdoc/errors.hpp"
#include "longdoc/rng.hpp"

namespace longdoc::inline LONGDOC_ABI::ckpt {

namespace {

constexpr std::string_view kMagic{"LDCKPT\0\0", 8};

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large payloads in pieces.
  while (!bytes.empty()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size(), 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), n);
    bytes.remove_prefix(n);
  }
  return static_cast<std::uint32_t>(crc);
}

bool ends_with(const std::string& s, std::string_view suffix) { return s.ends_with(suffix); }

void init_tensor(const std::string& name, Tensor& t, std::uint64_t seed) {
  if (ends_with(name, ".gamma")) {
    t.fill(1);
  } else if (ends_with(name, ".beta") || ends_with(name, ".bias")) {
    t.fill(0);
  } else {
    Rng rng(derive_seed(seed, name));
    for (auto& v : t.data()) v = static_cast<Real>(rng.truncated_normal(0.0, 0.02));
  }
}

// Shape disagreements between a parameter map and its config.
std::vector<std::string> shape_problems(const EncoderState& state) {
  std::vector<std::string> problems;
  const auto shapes = parameter_shapes(state.config, state.head);
  for (const auto& [name, shape] : shapes) {
    auto it = state.params.find(name);
    if (it == state.params.end()) {
      problems.push_back(name + " (missing)");
    } else if (it->second.value.shape() != shape) {
      problems.push_back(name + " (have " + shape_to_string(it->second.value.shape()) +
                         ", config implies " + shape_to_string(shape) + ")");
    }
  }
  for (const auto& [name, p] : state.params) {
    if (!shapes.contains(name)) problems.push_back(name + " (not part of the config)");
  }
  return problems;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : "; ") + s;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Serialization

std::string serialize(const Checkpoint& checkpoint) {
  const EncoderState& state = checkpoint.state;
  if (auto problems = shape_problems(state); !problems.empty()) {
    throw ConfigMismatchError("checkpoint: parameters disagree with config: " + join(problems));
  }
  std::string payload;
  nlohmann::json manifest = nlohmann::json::object();
  for (const auto& [name, p] : state.params) {
    const std::size_t offset = payload.size();
    for (Real v : p.value.data()) detail::put_f32(payload, static_cast<float>(v));
    manifest[name] = {{"shape", p.value.shape()},
                      {"offset", offset},
                      {"nbytes", payload.size() - offset}};
  }
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  header["config"] = state.config;
  header["head"] = state.head ? nlohmann::json(*state.head) : nlohmann::json(nullptr);
  header["tokenizer"] = checkpoint.tokenizer;
  header["tokenizer_hash"] = checkpoint.tokenizer.hash();
  header["metadata"] = checkpoint.metadata;
  header["tensors"] = manifest;
  header["payload_bytes"] = payload.size();
  header["payload_crc32"] = crc32_of(payload);
  const std::string header_text = header.dump();

  std::string out(kMagic);
  detail::put_le<std::uint32_t>(out, kFormatVersion);
  detail::put_le<std::uint64_t>(out, header_text.size());
  out += header_text;
  out += payload;
  return out;
}

namespace {

nlohmann::json parse_header(detail::Reader& in, const std::string& origin) {
  if (in.bytes(kMagic.size()) != kMagic) throw FormatError(origin + ": not a checkpoint file");
  const auto version = in.get_le<std::uint32_t>();
  if (version != kFormatVersion) {
    throw VersionError(origin + ": checkpoint format version " + std::to_string(version) +
                       ", this build reads " + std::to_string(kFormatVersion));
  }
  const auto header_len = in.get_le<std::uint64_t>();
  if (header_len > in.remaining()) throw TruncatedFileError(origin + ": header truncated");
  const auto text = in.bytes(static_cast<std::size_t>(header_len));
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": malformed header: " + e.what());
  }
}

}  // namespace

Checkpoint deserialize(const std::string& bytes, const std::string& origin) {
  detail::Reader in(bytes, origin);
  const nlohmann::json header = parse_header(in, origin);
  Checkpoint ck;
  try {
    ck.state.config = header.at("config").get<ModelConfig>();
    if (!header.at("head").is_null()) ck.state.head = header.at("head").get<HeadConfig>();
    ck.tokenizer = header.at("tokenizer").get<tok::Tokenizer>();
    ck.metadata = header.value("metadata", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(origin + ": malformed header: " + e.what());
  }
  const auto payload_bytes = header.at("payload_bytes").get<std::size_t>();
  if (in.remaining() < payload_bytes) {
    throw TruncatedFileError(origin + ": payload truncated (" + std::to_string(in.remaining()) +
                             " of " + std::to_string(payload_bytes) + " bytes)");
  }
  const std::string_view payload = in.bytes(payload_bytes);
  if (in.remaining() != 0) throw FormatError(origin + ": trailing bytes after payload");
  if (crc32_of(payload) != header.at("payload_crc32").get<std::uint32_t>()) {
    throw ChecksumError(origin + ": payload checksum mismatch");
  }
  if (ck.tokenizer.hash() != header.at("tokenizer_hash").get<std::string>()) {
    throw ChecksumError(origin + ": tokenizer hash mismatch");
  }

  const auto expected_shapes = parameter_shapes(ck.state.config, ck.state.head);
  const auto& manifest = header.at("tensors");
  for (const auto& [name, shape] : expected_shapes) {
    if (!manifest.contains(name)) {
      throw ConfigMismatchError(origin + ": tensor " + name + " required by config is missing");
    }
  }
  for (const auto& [name, entry] : manifest.items()) {
    auto want = expected_shapes.find(name);
    if (want == expected_shapes.end()) {
      throw ConfigMismatchError(origin + ": tensor " + name + " is not part of the config");
    }
    const auto shape = entry.at("shape").get<Shape>();
    if (shape != want->second) {
      throw ConfigMismatchError(origin + ": tensor " + name + " has shape " +
                                shape_to_string(shape) + ", config implies " +
                                shape_to_string(want->second));
    }
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto nbytes = entry.at("nbytes").get<std::size_t>();
    if (nbytes != shape_product(shape) * 4 || offset > payload.size() ||
        nbytes > payload.size() - offset) {
      throw FormatError(origin + ": manifest extent of " + name + " is inconsistent");
    }
    detail::Reader tensor_in(payload.substr(offset, nbytes), origin);
    Tensor t(shape);
    for (auto& v : t.data()) v = static_cast<Real>(tensor_in.get_f32());
    ck.state.params.emplace(name, Parameter(std::move(t)));
  }
  return ck;
}

void save(const Checkpoint& checkpoint, const std::string& path) {
  detail::write_file_atomic(path, serialize(checkpoint));
}

Checkpoint load(const std::string& path, const std::optional<ModelConfig>& expected) {
  Checkpoint ck = deserialize(detail::read_file(path), path);
  if (expected) {
    const auto want = parameter_shapes(*expected, ck.state.head);
    for (const auto& [name, shape] : want) {
      auto it = ck.state.params.find(name);
      if (it == ck.state.params.end()) {
        throw ConfigMismatchError(path + ": tensor " + name + " expected by config is missing");
      }
      if (it->second.value.shape() != shape) {
        throw ConfigMismatchError(path + ": tensor " + name + " has shape " +
                                  shape_to_string(it->second.value.shape()) + ", expected " +
                                  shape_to_string(shape));
      }
    }
    for (const auto& [name, p] : ck.state.params) {
      if (!want.contains(name)) {
        throw ConfigMismatchError(path + ": tensor " + name + " not expected by config");
      }
    }
    if (!(ck.state.config == *expected)) {
      throw ConfigMismatchError(path + ": stored model config differs from the expected one");
    }
  }
  return ck;
}

nlohmann::json read_header(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  detail::Reader in(bytes, path);
  return parse_header(in, path);
}

// ---------------------------------------------------------------------------
// Initializations

EncoderState init_from_scratch(const ModelConfig& config, const std::optional<HeadConfig>& head,
                               std::uint64_t seed) {
  EncoderState state;
  state.config = config;
  state.head = head;
  for (const auto& [name, shape] : parameter_shapes(config, head)) {
    Tensor t(shape);
    init_tensor(name, t, seed);
    state.params.emplace(name, Parameter(std::move(t)));
  }
  return state;
}

void init_head(EncoderState& state, const HeadConfig& head, std::uint64_t seed) {
  for (auto it = state.params.begin(); it != state.params.end();) {
    it = it->first.starts_with("head.") ? state.params.erase(it) : std::next(it);
  }
  state.head = head;
  for (const auto& [name, shape] : parameter_shapes(state.config, head)) {
    if (!name.starts_with("head.")) continue;
    Tensor t(shape);
    init_tensor(name, t, seed);
    state.params.emplace(name, Parameter(std::move(t)));
  }
}

Checkpoint convert_bert_to_longformer(const Checkpoint& source, int window, std::uint64_t seed) {
  const EncoderState& src = source.state;
  if (src.config.max_positions != ModelConfig::kBertPositions) {
    throw ConversionError("convert: source must be BERT-shaped (512 positions), got " +
                          std::to_string(src.config.max_positions));
  }
  std::vector<std::string> problems = shape_problems(src);
  if (!problems.empty()) throw ConversionError("convert: source geometry mismatch: " + join(problems));

  Checkpoint out;
  out.tokenizer = source.tokenizer;
  out.metadata = source.metadata;
  out.state.config = src.config;
  out.state.config.max_positions = ModelConfig::kLongformerPositions;
  out.state.config.window = window;
  out.state.config.validate();
  out.state.head = src.head;

  const std::string global_tag = "attention.global_";
  for (const auto& [name, shape] : parameter_shapes(out.state.config, out.state.head)) {
    Tensor t(shape);
    if (name == "embeddings.position") {
      const Tensor& from = src.at(name).value;
      const std::size_t width = from.cols();
      const std::size_t rows = from.rows();
      for (std::size_t i = 0; i < shape[0]; ++i) {
        std::copy_n(from.raw() + (i % rows) * width, width, t.raw() + i * width);
      }
    } else if (name.starts_with("head.mlm.")) {
      init_tensor(name, t, seed);
    } else {
      std::string from_name = name;
      if (auto pos = name.find(global_tag); pos != std::string::npos) {
        from_name.replace(pos, global_tag.size(), "attention.");
      }
      auto it = src.params.find(from_name);
      if (it == src.params.end() || it->second.value.shape() != shape) {
        problems.push_back(name + " (no source tensor " + from_name + " of shape " +
                           shape_to_string(shape) + ")");
        continue;
      }
      t = it->second.value;
    }
    out.state.params.emplace(name, Parameter(std::move(t)));
  }
  if (!problems.empty()) throw ConversionError("convert: " + join(problems));
  return out;
}

Checkpoint init_continual(const Checkpoint& source) {
  if (!source.state.config.sliding()) {
    throw ConversionError("continual: source must be Longformer-shaped (4,096 positions), got " +
                          std::to_string(source.state.config.max_positions));
  }
  if (auto problems = shape_problems(source.state); !problems.empty()) {
    throw ConversionError("continual: source geometry mismatch: " + join(problems));
  }
  Checkpoint out = source;
  for (auto& [name, p] : out.state.params) p.grad = Tensor(p.value.shape());
  return out;
}

}  // namespace longdoc::inline LONGDOC_ABI::ckpt
