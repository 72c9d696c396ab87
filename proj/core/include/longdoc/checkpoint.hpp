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

#ifndef LONGDOC_CHECKPOINT_HPP_
#define LONGDOC_CHECKPOINT_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "longdoc/encoder.hpp"
#include "longdoc/tokenizer.hpp"

namespace longdoc::inline LONGDOC_ABI::ckpt {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Checkpoint {
  EncoderState state;
  tok::Tokenizer tokenizer;
  // Free-form provenance (strategy, seeds, effective config). Must be
  // deterministic for byte-identical reruns.
  nlohmann::json metadata = nlohmann::json::object();
};

// File layout: "LDCKPT\0\0", u32 format version, u64 header length, the
// header as compact JSON with keys in sorted order, then the payload: every
// tensor in name order as float32 little-endian. The header carries the
// model and head config, the tokenizer (tokens, flags and SHA-256), the
// metadata, a manifest {name: {shape, offset, nbytes}} and the payload
// CRC-32. Writes go to a temporary file renamed into place.
std::string serialize(const Checkpoint& checkpoint);
Checkpoint deserialize(const std::string& bytes, const std::string& origin = "checkpoint");
void save(const Checkpoint& checkpoint, const std::string& path);

// Raises FormatError (bad magic), VersionError, TruncatedFileError,
// ChecksumError or ConfigMismatchError (a manifest entry disagreeing with
// the shapes implied by the stored config, or with `expected` when given;
// the message names the tensor).
Checkpoint load(const std::string& path, const std::optional<ModelConfig>& expected = std::nullopt);

// Header only (for inspection); validates magic and version.
nlohmann::json read_header(const std::string& path);

// Fresh parameters: truncated normal(0, 0.02) weights and embeddings, zero
// biases, unit layer-norm gains. Each tensor draws from its own stream
// derived from (seed, name).
EncoderState init_from_scratch(const ModelConfig& config, const std::optional<HeadConfig>& head,
                               std::uint64_t seed);
// Re-draws the parameters of one head (used when switching heads).
void init_head(EncoderState& state, const HeadConfig& head, std::uint64_t seed);

// BERT-shaped (512 positions) to Longformer-shaped (4,096 positions):
// every shared tensor copied, global projections copied from the local
// ones, position table tiled (target[i] = source[i mod 512]), tokenizer
// kept. Any head other than MLM is carried over; the MLM head is re-drawn
// from `seed`. Raises ConversionError listing offending tensors.
Checkpoint convert_bert_to_longformer(const Checkpoint& source, int window, std::uint64_t seed);

// Longformer-shaped checkpoint loaded verbatim (tokenizer included) as the
// starting point of continued pre-training. Raises ConversionError for any
// other geometry or a tensor whose shape disagrees with the config.
Checkpoint init_continual(const Checkpoint& source);

}  // namespace longdoc::inline LONGDOC_ABI::ckpt

#endif  // LONGDOC_CHECKPOINT_HPP_
