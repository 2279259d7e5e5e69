#include "sqa/nn/checkpoint.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sqa/common/error.hpp"
#include "sqa/common/hash.hpp"

namespace sqa::nn {
namespace {

constexpr char kMagic[8] = {'S', 'Q', 'A', 'C', 'K', 'P', 'T', '1'};

nlohmann::json head_json(const HeadSpec& h) {
  return {{"kind", std::string(to_string(h.kind))},
          {"hidden", h.hidden},
          {"dropout", h.dropout},
          {"outputs", h.outputs},
          {"embedding_dim", h.embedding_dim}};
}

HeadSpec head_from_json(const nlohmann::json& j) {
  HeadSpec h;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "classification") h.kind = HeadKind::kClassification;
  else if (kind == "regression") h.kind = HeadKind::kRegression;
  else if (kind == "dcec") h.kind = HeadKind::kDcec;
  else throw Error(errc::kFormat, "unknown head kind '" + kind + "'");
  h.hidden = j.at("hidden").get<int>();
  h.dropout = j.at("dropout").get<float>();
  h.outputs = j.at("outputs").get<int>();
  h.embedding_dim = j.at("embedding_dim").get<int>();
  return h;
}

nlohmann::json table(const std::vector<NamedArray>& arrays) {
  auto t = nlohmann::json::array();
  for (const auto& a : arrays) t.push_back({{"name", a.name}, {"shape", a.shape}, {"count", a.data.size()}});
  return t;
}

}  // namespace

nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.convnet.layers) layers.push_back({l.kernels, l.kernel_size});
  nlohmann::json j = {{"convnet",
                       {{"input_bands", spec.convnet.input_bands},
                        {"input_frames", spec.convnet.input_frames},
                        {"stride", spec.convnet.stride},
                        {"layers", layers}}},
                      {"decoder", spec.decoder},
                      {"clustering", spec.clustering}};
  if (spec.classification) j["classification"] = head_json(*spec.classification);
  if (spec.regression) j["regression"] = head_json(*spec.regression);
  if (spec.dcec) j["dcec"] = head_json(*spec.dcec);
  return j;
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  ModelSpec s;
  const auto& c = j.at("convnet");
  s.convnet.input_bands = c.at("input_bands").get<int>();
  s.convnet.input_frames = c.at("input_frames").get<int>();
  s.convnet.stride = c.at("stride").get<int>();
  s.convnet.layers.clear();
  for (const auto& l : c.at("layers")) s.convnet.layers.push_back({l.at(0).get<int>(), l.at(1).get<int>()});
  s.decoder = j.at("decoder").get<bool>();
  s.clustering = j.at("clustering").get<bool>();
  if (j.contains("classification")) s.classification = head_from_json(j["classification"]);
  if (j.contains("regression")) s.regression = head_from_json(j["regression"]);
  if (j.contains("dcec")) s.dcec = head_from_json(j["dcec"]);
  return s;
}

const NamedArray* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

Checkpoint capture(Model& model, std::string stage, std::uint64_t seed, std::string config_hash) {
  Checkpoint c;
  c.spec = model.spec();
  c.stage = std::move(stage);
  c.seed = seed;
  c.config_hash = std::move(config_hash);
  for (const auto& p : model.parameters())
    c.tensors.push_back({p.name, p.value->shape(), {p.value->values().begin(), p.value->values().end()}});
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header = {{"format", "sqa-checkpoint"},
                           {"version", 1},
                           {"spec", to_json(ckpt.spec)},
                           {"spec_descriptor", ckpt.spec.descriptor()},
                           {"spec_hash", to_hex(ckpt.spec.hash())},
                           {"convnet_hash", to_hex(fnv1a64(ckpt.spec.convnet.descriptor()))},
                           {"stage", ckpt.stage},
                           {"seed", ckpt.seed},
                           {"config_hash", ckpt.config_hash},
                           {"meta", ckpt.meta},
                           {"tensors", table(ckpt.tensors)},
                           {"optimizer", table(ckpt.optimizer)}};
  const std::string text = header.dump();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write-then-rename so an interrupted save never leaves a torn checkpoint.
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(errc::kIo, "cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof(kMagic));
    const std::uint64_t len = text.size();
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((len >> (8 * i)) & 0xff));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* group : {&ckpt.tensors, &ckpt.optimizer})
      for (const auto& a : *group)
        out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(float)));
    if (!out) throw Error(errc::kIo, "short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::kIo, "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw Error(errc::kFormat, path.string() + " is not a checkpoint");
  unsigned char lenbuf[8];
  in.read(reinterpret_cast<char*>(lenbuf), 8);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(lenbuf[i]) << (8 * i);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw Error(errc::kFormat, path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw Error(errc::kFormat, path.string() + ": bad header: " + e.what());
  }
  Checkpoint c;
  c.spec = model_spec_from_json(header.at("spec"));
  if (to_hex(c.spec.hash()) != header.at("spec_hash").get<std::string>())
    throw Error(errc::kFormat, path.string() + ": architecture hash does not match its descriptor");
  c.stage = header.at("stage").get<std::string>();
  c.seed = header.at("seed").get<std::uint64_t>();
  c.config_hash = header.at("config_hash").get<std::string>();
  c.meta = header.at("meta");
  const auto read_group = [&](const nlohmann::json& t, std::vector<NamedArray>& out) {
    for (const auto& e : t) {
      NamedArray a;
      a.name = e.at("name").get<std::string>();
      a.shape = e.at("shape").get<std::vector<int>>();
      a.data.resize(e.at("count").get<std::size_t>());
      in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(float)));
      if (!in) throw Error(errc::kFormat, path.string() + ": truncated payload at " + a.name);
      out.push_back(std::move(a));
    }
  };
  read_group(header.at("tensors"), c.tensors);
  read_group(header.at("optimizer"), c.optimizer);
  return c;
}

void restore(Model& model, const Checkpoint& ckpt) {
  if (model.spec().hash() != ckpt.spec.hash())
    throw Error(errc::kShape, "checkpoint architecture '" + ckpt.spec.descriptor() + "' does not match model '" +
                                  model.spec().descriptor() + "'");
  for (auto& p : model.parameters()) {
    const auto* a = ckpt.find(p.name);
    if (!a) throw Error(errc::kFormat, "checkpoint is missing " + p.name);
    if (a->shape != p.value->shape()) throw Error(errc::kShape, "checkpoint tensor " + p.name + " has the wrong shape");
    std::copy(a->data.begin(), a->data.end(), p.value->values().begin());
  }
}

Model instantiate(const Checkpoint& ckpt) {
  Model m(ckpt.spec, ckpt.seed);
  restore(m, ckpt);
  return m;
}

bool TransferReport::is_carried(const std::string& group) const {
  return std::find(carried.begin(), carried.end(), group) != carried.end();
}

std::string TransferReport::render() const {
  std::ostringstream ss;
  const auto list = [&](const char* key, const std::vector<std::string>& v) {
    ss << key << '=';
    for (std::size_t i = 0; i < v.size(); ++i) ss << (i ? "," : "") << v[i];
  };
  list("carried", carried);
  ss << ' ';
  list("new", initialized);
  ss << ' ';
  list("dropped", dropped);
  return ss.str();
}

TransferReport transfer_weights(const Checkpoint& source, Model& target) {
  if (source.spec.convnet.descriptor() != target.spec().convnet.descriptor())
    throw Error(errc::kShape, "cannot transfer between different convnets: '" + source.spec.convnet.descriptor() +
                                  "' vs '" + target.spec().convnet.descriptor() + "'");
  auto params = target.parameters();
  std::map<std::string, std::vector<ParamRef*>> target_groups;
  for (auto& p : params) target_groups[std::string(group_of(p.name))].push_back(&p);
  std::set<std::string> source_groups;
  for (const auto& t : source.tensors) source_groups.insert(std::string(group_of(t.name)));

  TransferReport report;
  for (auto& [group, members] : target_groups) {
    bool compatible = source_groups.count(group) > 0;
    for (const auto* p : members) {
      const auto* a = source.find(p->name);
      if (!a || a->shape != p->value->shape()) compatible = false;
    }
    if (group == "convnet" && !compatible)
      throw Error(errc::kShape, "source checkpoint lacks a compatible convnet");
    if (!compatible) {
      report.initialized.push_back(group);
      continue;
    }
    for (auto* p : members) {
      const auto* a = source.find(p->name);
      std::copy(a->data.begin(), a->data.end(), p->value->values().begin());
    }
    report.carried.push_back(group);
  }
  for (const auto& g : source_groups)
    if (!target_groups.count(g)) report.dropped.push_back(g);
  return report;
}

}  // namespace sqa::nn
