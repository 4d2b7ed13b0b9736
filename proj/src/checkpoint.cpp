#include "syco/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "syco/errors.hpp"

namespace syco {

using nlohmann::json;

std::string hex_from_double(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(bits));
  return std::string(buf);
}

double double_from_hex(const std::string& s) {
  if (s.size() != 16) {
    throw CorruptArtifact("bad hex double: " + s);
  }
  std::uint64_t bits = 0;
  for (char c : s) {
    bits <<= 4;
    if (c >= '0' && c <= '9') bits |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') bits |= static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') bits |= static_cast<std::uint64_t>(c - 'A' + 10);
    else throw CorruptArtifact("bad hex double: " + s);
  }
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

nlohmann::json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(hex_from_double(x));
  return arr;
}

Vec vec_from_json(const nlohmann::json& j) {
  Vec v;
  v.reserve(j.size());
  for (const auto& e : j) v.push_back(double_from_hex(e.get<std::string>()));
  return v;
}

nlohmann::json tensor_to_json(const Tensor2D& t) {
  json arr = json::array();
  for (double x : t.data) arr.push_back(hex_from_double(x));
  return json{{"rows", t.rows}, {"cols", t.cols}, {"data", arr}};
}

Tensor2D tensor_from_json(const nlohmann::json& j) {
  Tensor2D t(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto& arr = j.at("data");
  if (arr.size() != t.data.size()) {
    throw CorruptArtifact("tensor data length mismatch");
  }
  for (std::size_t i = 0; i < t.data.size(); ++i) {
    t.data[i] = double_from_hex(arr[i].get<std::string>());
  }
  return t;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

json linear_to_json(const FrozenLinear& l) {
  return json{{"w", tensor_to_json(l.w)}, {"b", vec_to_json(l.b)}};
}

FrozenLinear linear_from_json(const json& j) {
  return {tensor_from_json(j.at("w")), vec_from_json(j.at("b"))};
}

json svd_to_json(const SvdAdapter& a) {
  return json{{"u", tensor_to_json(a.u)},
              {"sigma", vec_to_json(a.sigma)},
              {"v", tensor_to_json(a.v)}};
}

SvdAdapter svd_from_json(const json& j) {
  return {tensor_from_json(j.at("u")), vec_from_json(j.at("sigma")),
          tensor_from_json(j.at("v"))};
}

json talora_to_json(const TaLoraAdapter& a) {
  return json{{"b_shared", tensor_to_json(a.b_shared)},
              {"u", vec_to_json(a.u)},
              {"v", vec_to_json(a.v)},
              {"gate", hex_from_double(a.gate)}};
}

TaLoraAdapter talora_from_json(const json& j) {
  return {tensor_from_json(j.at("b_shared")), vec_from_json(j.at("u")),
          vec_from_json(j.at("v")),
          double_from_hex(j.at("gate").get<std::string>())};
}

json spec_to_json(const TaskSpec& s) {
  json means = json::array();
  for (const auto& m : s.class_means) means.push_back(vec_to_json(m));
  return json{{"task_id", s.task_id},
              {"n_classes", s.n_classes},
              {"class_means", means},
              {"cov_scale", hex_from_double(s.cov_scale)},
              {"rotation", tensor_to_json(s.rotation)},
              {"label_perm", s.label_perm},
              {"flavor", static_cast<int>(s.flavor)},
              {"mean_shift", vec_to_json(s.mean_shift)},
              {"noise_inflation", hex_from_double(s.noise_inflation)}};
}

TaskSpec spec_from_json(const json& j) {
  TaskSpec s;
  s.task_id = j.at("task_id").get<int>();
  s.n_classes = j.at("n_classes").get<int>();
  for (const auto& m : j.at("class_means")) s.class_means.push_back(vec_from_json(m));
  s.cov_scale = double_from_hex(j.at("cov_scale").get<std::string>());
  s.rotation = tensor_from_json(j.at("rotation"));
  s.label_perm = j.at("label_perm").get<std::vector<int>>();
  s.flavor = static_cast<TaskFlavor>(j.at("flavor").get<int>());
  s.mean_shift = vec_from_json(j.at("mean_shift"));
  s.noise_inflation = double_from_hex(j.at("noise_inflation").get<std::string>());
  return s;
}

json labeled_to_json(const LabeledSet& s) {
  json xs = json::array();
  for (const auto& x : s.xs) xs.push_back(vec_to_json(x));
  return json{{"xs", xs}, {"ys", s.ys}};
}

LabeledSet labeled_from_json(const json& j) {
  LabeledSet s;
  for (const auto& x : j.at("xs")) s.xs.push_back(vec_from_json(x));
  s.ys = j.at("ys").get<std::vector<int>>();
  return s;
}

void write_with_checksum(const std::string& path, json payload,
                         const char* kind) {
  payload["kind"] = kind;
  payload["format_version"] = 1;
  const std::string body = payload.dump();
  json wrapper{{"checksum", fnv1a(body)}, {"payload", payload}};
  write_text_file(path, wrapper.dump(2));
}

json load_with_checksum(const std::string& path, const char* kind) {
  json wrapper;
  try {
    wrapper = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw CorruptArtifact(path + ": not valid JSON: " + e.what());
  }
  if (!wrapper.contains("payload") || !wrapper.contains("checksum")) {
    throw CorruptArtifact(path + ": missing payload or checksum");
  }
  const json& payload = wrapper.at("payload");
  const auto stored = wrapper.at("checksum").get<std::uint64_t>();
  if (fnv1a(payload.dump()) != stored) {
    throw CorruptArtifact(path + ": checksum mismatch");
  }
  if (payload.value("kind", "") != kind) {
    throw CorruptArtifact(path + ": expected kind '" + kind + "'");
  }
  if (payload.value("format_version", -1) != 1) {
    throw CorruptArtifact(path + ": unsupported format version");
  }
  return payload;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json hidden = json::array();
  for (const auto& l : ckpt.backbone.hidden) hidden.push_back(linear_to_json(l));
  json talora = json::array();
  for (const auto& per_task : ckpt.talora) {
    json layers = json::array();
    for (const auto& a : per_task) layers.push_back(talora_to_json(a));
    talora.push_back(layers);
  }
  json entries = json::array();
  for (const auto& e : ckpt.library.entries) {
    json adapters = json::array();
    for (const auto& a : e.adapter_set) adapters.push_back(svd_to_json(a));
    entries.push_back({{"task_id", e.task_id},
                       {"embedding", vec_to_json(e.task_embedding)},
                       {"adapters", adapters}});
  }
  json guard = json::array();
  for (const auto& ex : ckpt.guardrail.examples) {
    guard.push_back({{"x", vec_to_json(ex.x)},
                     {"label", ex.label},
                     {"margin", hex_from_double(ex.margin)}});
  }
  json payload{{"backbone",
                {{"hidden", hidden}, {"head", linear_to_json(ckpt.backbone.head)}}},
               {"talora", talora},
               {"library", entries},
               {"guardrail", guard},
               {"config_echo", ckpt.config_echo}};
  write_with_checksum(path, std::move(payload), "syco-checkpoint");
}

Checkpoint load_checkpoint(const std::string& path) {
  const json payload = load_with_checksum(path, "syco-checkpoint");
  Checkpoint ckpt;
  for (const auto& l : payload.at("backbone").at("hidden")) {
    ckpt.backbone.hidden.push_back(linear_from_json(l));
  }
  ckpt.backbone.head = linear_from_json(payload.at("backbone").at("head"));
  for (const auto& per_task : payload.at("talora")) {
    std::vector<TaLoraAdapter> layers;
    for (const auto& a : per_task) layers.push_back(talora_from_json(a));
    ckpt.talora.push_back(std::move(layers));
  }
  for (const auto& e : payload.at("library")) {
    SourceLibraryEntry entry;
    entry.task_id = e.at("task_id").get<int>();
    entry.task_embedding = vec_from_json(e.at("embedding"));
    for (const auto& a : e.at("adapters")) {
      entry.adapter_set.push_back(svd_from_json(a));
    }
    ckpt.library.entries.push_back(std::move(entry));
  }
  for (const auto& g : payload.at("guardrail")) {
    ckpt.guardrail.examples.push_back(
        {vec_from_json(g.at("x")), g.at("label").get<int>(),
         double_from_hex(g.at("margin").get<std::string>())});
  }
  ckpt.config_echo = payload.at("config_echo");
  return ckpt;
}

void save_sources(const std::string& path,
                  const std::vector<SourceTask>& sources,
                  const nlohmann::json& config_echo) {
  json tasks = json::array();
  for (const auto& t : sources) {
    tasks.push_back({{"spec", spec_to_json(t.spec)},
                     {"train", labeled_to_json(t.train)},
                     {"val", labeled_to_json(t.val)},
                     {"feat_mean", vec_to_json(t.feat_mean)},
                     {"feat_std", vec_to_json(t.feat_std)},
                     {"scalar_mean", hex_from_double(t.scalar_mean)},
                     {"scalar_std", hex_from_double(t.scalar_std)},
                     {"embedding", vec_to_json(t.embedding)}});
  }
  write_with_checksum(path, json{{"tasks", tasks}, {"config_echo", config_echo}},
                      "syco-sources");
}

std::vector<SourceTask> load_sources(const std::string& path) {
  const json payload = load_with_checksum(path, "syco-sources");
  std::vector<SourceTask> out;
  for (const auto& t : payload.at("tasks")) {
    SourceTask task;
    task.spec = spec_from_json(t.at("spec"));
    task.train = labeled_from_json(t.at("train"));
    task.val = labeled_from_json(t.at("val"));
    task.feat_mean = vec_from_json(t.at("feat_mean"));
    task.feat_std = vec_from_json(t.at("feat_std"));
    task.scalar_mean = double_from_hex(t.at("scalar_mean").get<std::string>());
    task.scalar_std = double_from_hex(t.at("scalar_std").get<std::string>());
    task.embedding = vec_from_json(t.at("embedding"));
    out.push_back(std::move(task));
  }
  return out;
}

void save_stream(const std::string& path, const TargetStream& stream,
                 const nlohmann::json& config_echo) {
  json segments = json::array();
  for (const auto& s : stream.schedule.segments) {
    segments.push_back({{"segment_id", s.segment_id},
                        {"task_id", s.task_id},
                        {"flavor", static_cast<int>(s.flavor)},
                        {"n_batches", s.n_batches}});
  }
  json batches = json::array();
  for (const auto& b : stream.batches) {
    json raw = json::array(), canon = json::array(), pert = json::array();
    for (const auto& x : b.inputs) raw.push_back(vec_to_json(x));
    for (const auto& x : b.canonical_inputs) canon.push_back(vec_to_json(x));
    for (const auto& x : b.perturbed_inputs) pert.push_back(vec_to_json(x));
    batches.push_back({{"t", b.t},
                       {"segment_id", b.segment_id},
                       {"inputs", raw},
                       {"canonical_inputs", canon},
                       {"perturbed_inputs", pert},
                       {"template_ids", b.template_ids},
                       {"labels", eval_access::labels(b)}});
  }
  json payload{{"mode", stream.schedule.mode == StreamMode::unseen_task
                            ? "unseen-task"
                            : "unseen-data"},
               {"segments", segments},
               {"batches", batches},
               {"config_echo", config_echo}};
  write_with_checksum(path, std::move(payload), "syco-stream");
}

TargetStream load_stream(const std::string& path) {
  const json payload = load_with_checksum(path, "syco-stream");
  TargetStream out;
  out.schedule.mode = payload.at("mode").get<std::string>() == "unseen-task"
                          ? StreamMode::unseen_task
                          : StreamMode::unseen_data;
  for (const auto& s : payload.at("segments")) {
    out.schedule.segments.push_back(
        {s.at("segment_id").get<int>(), s.at("task_id").get<int>(),
         static_cast<TaskFlavor>(s.at("flavor").get<int>()),
         s.at("n_batches").get<int>()});
  }
  for (const auto& b : payload.at("batches")) {
    std::vector<Vec> raw, canon, pert;
    for (const auto& x : b.at("inputs")) raw.push_back(vec_from_json(x));
    for (const auto& x : b.at("canonical_inputs")) canon.push_back(vec_from_json(x));
    for (const auto& x : b.at("perturbed_inputs")) pert.push_back(vec_from_json(x));
    out.batches.emplace_back(std::move(raw), std::move(canon), std::move(pert),
                             b.at("template_ids").get<std::vector<int>>(),
                             b.at("labels").get<std::vector<int>>(),
                             b.at("segment_id").get<int>(), b.at("t").get<int>());
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace syco
