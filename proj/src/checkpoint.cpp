#include "intercross/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "nlohmann/json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace intercross {

namespace {

json config_to_json_obj(const ModelConfig& cfg) {
  json j;
  j["num_classes"] = cfg.num_classes;
  j["frame_dim"] = cfg.frame_dim;
  j["vocab_size"] = cfg.vocab_size;
  j["d_ref"] = cfg.d_ref;
  j["tokens_per_bank"] = cfg.tokens_per_bank;
  j["n_heads"] = cfg.n_heads;
  j["d_style"] = cfg.d_style;
  j["d_text"] = cfg.d_text;
  j["frames_per_step"] = cfg.frames_per_step;
  j["d_emb"] = cfg.d_emb;
  j["conv_channels"] = cfg.conv_channels;
  j["d_dec"] = cfg.d_dec;
  j["d_prenet"] = cfg.d_prenet;
  j["d_attn"] = cfg.d_attn;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["instance_ids"] = cfg.instance_ids;
  return j;
}

ModelConfig config_from_json_obj(const json& j) {
  ModelConfig cfg;
  cfg.num_classes = j.at("num_classes").get<int>();
  cfg.frame_dim = j.at("frame_dim").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.d_ref = j.value("d_ref", cfg.d_ref);
  cfg.tokens_per_bank = j.value("tokens_per_bank", cfg.tokens_per_bank);
  cfg.n_heads = j.value("n_heads", cfg.n_heads);
  cfg.d_style = j.value("d_style", cfg.d_style);
  cfg.d_text = j.value("d_text", cfg.d_text);
  cfg.frames_per_step = j.value("frames_per_step", cfg.frames_per_step);
  cfg.d_emb = j.value("d_emb", cfg.d_emb);
  cfg.conv_channels = j.value("conv_channels", cfg.conv_channels);
  cfg.d_dec = j.value("d_dec", cfg.d_dec);
  cfg.d_prenet = j.value("d_prenet", cfg.d_prenet);
  cfg.d_attn = j.value("d_attn", cfg.d_attn);
  cfg.beta = j.value("beta", cfg.beta);
  cfg.gamma = j.value("gamma", cfg.gamma);
  cfg.instance_ids = j.at("instance_ids").get<std::vector<std::vector<std::string>>>();
  cfg.validate();
  return cfg;
}

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  return config_to_json_obj(cfg).dump(2);
}

ModelConfig model_config_from_json(const std::string& json_text) {
  return config_from_json_obj(json::parse(json_text));
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir + ": " + ec.message());

  const std::string blob_name = "params.f64";
  std::ofstream blob(fs::path(dir) / blob_name, std::ios::binary);
  if (!blob) throw IoFailure("cannot open checkpoint blob for writing");

  json tensors = json::array();
  std::int64_t offset = 0;
  for (const auto& t : ckpt.params.tensors()) {
    tensors.push_back({{"name", t.name},
                       {"rows", t.value.rows()},
                       {"cols", t.value.cols()},
                       {"dtype", "f64"},
                       {"file", blob_name},
                       {"byte_offset", offset}});
    write_f64_rowmajor(blob, t.value);
    offset += static_cast<std::int64_t>(t.value.size()) * 8;
  }
  blob.close();

  json index;
  index["schema_version"] = 1;
  index["step"] = ckpt.step;
  index["model_config"] = config_to_json_obj(ckpt.config);
  index["tensors"] = tensors;
  write_text_file((fs::path(dir) / "index.json").string(), index.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& dir) {
  const fs::path base(dir);
  if (!fs::exists(base / "index.json"))
    throw MissingFile("missing index.json in " + dir);
  json index = json::parse(read_text_file((base / "index.json").string()));
  Checkpoint ckpt;
  ckpt.step = index.at("step").get<long long>();
  ckpt.config = config_from_json_obj(index.at("model_config"));
  for (const auto& t : index.at("tensors")) {
    const std::string dtype = t.at("dtype").get<std::string>();
    if (dtype != "f64") throw IoFailure("unsupported checkpoint dtype " + dtype);
    const std::string file = (base / t.at("file").get<std::string>()).string();
    std::ifstream blob(file, std::ios::binary);
    if (!blob) throw MissingFile("missing checkpoint blob " + file);
    blob.seekg(t.at("byte_offset").get<std::int64_t>());
    Matrix value = read_f64_rowmajor(blob, t.at("rows").get<std::int64_t>(),
                                     t.at("cols").get<std::int64_t>());
    ckpt.params.add(t.at("name").get<std::string>(), std::move(value));
  }
  return ckpt;
}

}  // namespace intercross
