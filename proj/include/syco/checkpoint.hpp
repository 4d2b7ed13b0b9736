#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "syco/adapters.hpp"
#include "syco/objectives.hpp"
#include "syco/rac1.hpp"
#include "syco/stream.hpp"

namespace syco {

// Doubles are persisted as 16-hex-digit bit patterns, so every artifact
// round-trips bit-exactly. Checkpoints carry a format version and an FNV-1a
// checksum over the payload; a mismatch on load raises CorruptArtifact.

std::string hex_from_double(double v);
double double_from_hex(const std::string& s);

nlohmann::json tensor_to_json(const Tensor2D& t);
Tensor2D tensor_from_json(const nlohmann::json& j);
nlohmann::json vec_to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);

std::uint64_t fnv1a(const std::string& bytes);

struct Checkpoint {
  ToyBackbone backbone;
  std::vector<std::vector<TaLoraAdapter>> talora;  // [task][layer]
  SourceLibrary library;
  GuardrailSet guardrail;
  nlohmann::json config_echo;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

void save_sources(const std::string& path,
                  const std::vector<SourceTask>& sources,
                  const nlohmann::json& config_echo);
std::vector<SourceTask> load_sources(const std::string& path);

void save_stream(const std::string& path, const TargetStream& stream,
                 const nlohmann::json& config_echo);
TargetStream load_stream(const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace syco
