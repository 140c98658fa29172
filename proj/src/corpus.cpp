#include "intercross/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "intercross/rng.hpp"
#include "nlohmann/json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace intercross {

std::string to_string(FactorKind kind) {
  switch (kind) {
    case FactorKind::SpectralProfile: return "SPECTRAL_PROFILE";
    case FactorKind::DurationRhythm: return "DURATION_RHYTHM";
    case FactorKind::AmplitudeEnvelope: return "AMPLITUDE_ENVELOPE";
  }
  throw InvalidConfig("bad factor kind");
}

FactorKind factor_kind_from_string(const std::string& s) {
  if (s == "SPECTRAL_PROFILE") return FactorKind::SpectralProfile;
  if (s == "DURATION_RHYTHM") return FactorKind::DurationRhythm;
  if (s == "AMPLITUDE_ENVELOPE") return FactorKind::AmplitudeEnvelope;
  throw InvalidConfig("unknown factor kind: " + s);
}

void check_class_specs(const std::vector<StyleClassSpec>& classes) {
  std::set<FactorKind> kinds;
  for (const auto& cls : classes) {
    if (cls.instance_ids.empty())
      throw InvalidConfig("class " + cls.name + " has no instances");
    std::set<std::string> ids(cls.instance_ids.begin(), cls.instance_ids.end());
    if (ids.size() != cls.instance_ids.size())
      throw InvalidConfig("class " + cls.name + " has duplicate instance ids");
    if (!kinds.insert(cls.factor_kind).second)
      throw InvalidConfig("factor kind " + to_string(cls.factor_kind) +
                          " used by more than one class");
  }
}

const Vector& FactorBank::lookup(const std::vector<StyleClassSpec>& classes,
                                 int class_idx, const std::string& instance_id) const {
  const auto& ids = classes.at(static_cast<size_t>(class_idx)).instance_ids;
  const auto it = std::find(ids.begin(), ids.end(), instance_id);
  if (it == ids.end())
    throw UnknownInstance("instance " + instance_id + " not in class " +
                          classes[static_cast<size_t>(class_idx)].name);
  return params.at(static_cast<size_t>(class_idx))
      .at(static_cast<size_t>(it - ids.begin()));
}

double separation_floor_for(const FactorBankOptions& opts, FactorKind kind) {
  switch (kind) {
    case FactorKind::SpectralProfile: return opts.spectral_floor;
    case FactorKind::DurationRhythm: return opts.duration_floor;
    case FactorKind::AmplitudeEnvelope: return opts.amplitude_floor;
  }
  throw InvalidConfig("bad factor kind");
}

namespace {

Vector draw_factor(Rng& rng, FactorKind kind, int frame_dim,
                   const FactorBankOptions& opts) {
  switch (kind) {
    case FactorKind::SpectralProfile: {
      Vector v(frame_dim);
      for (int i = 0; i < frame_dim; ++i) v(i) = rng.normal(0.0, opts.spectral_sigma);
      return v;
    }
    case FactorKind::DurationRhythm: {
      Vector v(2);
      v(0) = rng.uniform(0.5, 2.0);   // frames-per-token multiplier
      v(1) = rng.uniform(0.0, 0.5);   // rhythm depth
      return v;
    }
    case FactorKind::AmplitudeEnvelope: {
      Vector v(3);
      v(0) = rng.uniform(0.7, 1.4);   // gain
      v(1) = rng.uniform(0.0, 0.3);   // attack fraction
      v(2) = rng.uniform(0.0, 0.3);   // decay fraction
      return v;
    }
  }
  throw InvalidConfig("bad factor kind");
}

}  // namespace

FactorBank make_factor_bank(const std::vector<StyleClassSpec>& classes,
                            std::uint64_t seed, int frame_dim,
                            const FactorBankOptions& opts) {
  check_class_specs(classes);
  Rng rng(seed);
  FactorBank bank;
  bank.params.resize(classes.size());
  for (size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    const double floor = separation_floor_for(opts, cls.factor_kind);
    for (size_t i = 0; i < cls.instance_ids.size(); ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < opts.max_retries_per_instance; ++attempt) {
        Vector candidate = draw_factor(rng, cls.factor_kind, frame_dim, opts);
        bool ok = true;
        for (const Vector& prev : bank.params[c]) {
          if ((candidate - prev).norm() < floor) {
            ok = false;
            break;
          }
        }
        if (ok) {
          bank.params[c].push_back(std::move(candidate));
          placed = true;
          break;
        }
      }
      if (!placed)
        throw SeparationUnachievable("class " + cls.name + " instance " +
                                     cls.instance_ids[i] +
                                     ": separation floor unreachable");
    }
  }
  return bank;
}

Matrix make_template_table(std::uint64_t template_seed, int vocab_size, int frame_dim) {
  Matrix templates(vocab_size, frame_dim);
  for (int t = 0; t < vocab_size; ++t) {
    Rng rng(Rng::mix(template_seed, static_cast<std::uint64_t>(t)));
    for (int d = 0; d < frame_dim; ++d) templates(t, d) = rng.normal();
  }
  return templates;
}

int frames_per_token(double duration_multiplier) {
  const int n = static_cast<int>(std::lround(kBaseFramesPerToken * duration_multiplier));
  return std::max(1, n);
}

Matrix render_utterance(const FactorBank& bank,
                        const std::vector<StyleClassSpec>& classes,
                        const std::vector<std::string>& labels,
                        const std::vector<int>& text, const Matrix& templates) {
  if (text.empty()) throw EmptyText("render_utterance: empty text");
  if (labels.size() != classes.size())
    throw UnknownInstance("label count does not match class count");

  const int frame_dim = static_cast<int>(templates.cols());
  Vector offset = Vector::Zero(frame_dim);
  double multiplier = 1.0, depth = 0.0;
  double gain = 1.0, attack = 0.0, decay = 0.0;
  for (size_t c = 0; c < classes.size(); ++c) {
    const Vector& p = bank.lookup(classes, static_cast<int>(c), labels[c]);
    switch (classes[c].factor_kind) {
      case FactorKind::SpectralProfile: offset = p; break;
      case FactorKind::DurationRhythm:
        multiplier = p(0);
        depth = p(1);
        break;
      case FactorKind::AmplitudeEnvelope:
        gain = p(0);
        attack = p(1);
        decay = p(2);
        break;
    }
  }

  const int fpt = frames_per_token(multiplier);
  const int total = fpt * static_cast<int>(text.size());
  Matrix frames(total, frame_dim);
  int t = 0;
  for (int token : text) {
    if (token < 0 || token >= templates.rows())
      throw UnknownInstance("token id out of template table range");
    for (int j = 0; j < fpt; ++j, ++t) {
      const double ramp_in = std::min(1.0, (t + 1.0) / (attack * total + 1.0));
      const double ramp_out = std::min(1.0, (total - t) / (decay * total + 1.0));
      const double envelope = gain * ramp_in * ramp_out;
      const double rhythm = 1.0 + depth * std::sin(2.0 * M_PI * t / kRhythmPeriod);
      frames.row(t) =
          (templates.row(token) + offset.transpose()) * (envelope * rhythm);
    }
  }
  return frames;
}

int CorpusManifest::instance_index(int class_idx, const std::string& instance_id) const {
  const auto& ids = classes.at(static_cast<size_t>(class_idx)).instance_ids;
  const auto it = std::find(ids.begin(), ids.end(), instance_id);
  if (it == ids.end())
    throw UnknownInstance("instance " + instance_id + " unknown in class " +
                          classes[static_cast<size_t>(class_idx)].name);
  return static_cast<int>(it - ids.begin());
}

namespace {

json classes_to_json(const std::vector<StyleClassSpec>& classes) {
  json arr = json::array();
  for (const auto& cls : classes) {
    arr.push_back({{"name", cls.name},
                   {"factor_kind", to_string(cls.factor_kind)},
                   {"instances", cls.instance_ids}});
  }
  return arr;
}

std::vector<StyleClassSpec> classes_from_json(const json& arr) {
  std::vector<StyleClassSpec> classes;
  for (const auto& item : arr) {
    StyleClassSpec cls;
    cls.name = item.at("name").get<std::string>();
    cls.factor_kind = factor_kind_from_string(item.at("factor_kind").get<std::string>());
    cls.instance_ids = item.at("instances").get<std::vector<std::string>>();
    classes.push_back(std::move(cls));
  }
  return classes;
}

}  // namespace

CorpusConfig corpus_config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidConfig(std::string("corpus config parse error: ") + e.what());
  }
  CorpusConfig cfg;
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.template_seed = j.value("template_seed", std::uint64_t{1234});
  cfg.frame_dim = j.value("frame_dim", 32);
  cfg.vocab_size = j.value("vocab_size", 40);
  cfg.text_len_min = j.value("text_len_min", 4);
  cfg.text_len_max = j.value("text_len_max", 16);
  cfg.utterances_per_cell = j.value("utterances_per_cell", 50);
  if (!j.contains("classes")) throw InvalidConfig("corpus config missing 'classes'");
  cfg.classes = classes_from_json(j.at("classes"));
  if (j.contains("empty_cells"))
    cfg.empty_cells = j.at("empty_cells").get<std::vector<std::vector<std::string>>>();
  if (j.contains("cell_counts")) {
    for (const auto& item : j.at("cell_counts")) {
      cfg.cell_counts[item.at("cell").get<std::vector<std::string>>()] =
          item.at("count").get<int>();
    }
  }
  if (j.contains("separation_floor")) {
    const auto& f = j.at("separation_floor");
    cfg.bank_options.spectral_floor =
        f.value("SPECTRAL_PROFILE", cfg.bank_options.spectral_floor);
    cfg.bank_options.duration_floor =
        f.value("DURATION_RHYTHM", cfg.bank_options.duration_floor);
    cfg.bank_options.amplitude_floor =
        f.value("AMPLITUDE_ENVELOPE", cfg.bank_options.amplitude_floor);
  }
  if (j.contains("spectral_sigma"))
    cfg.bank_options.spectral_sigma = j.at("spectral_sigma").get<double>();

  if (cfg.frame_dim < 1 || cfg.vocab_size < 1)
    throw InvalidConfig("frame_dim and vocab_size must be positive");
  if (cfg.text_len_min < 1 || cfg.text_len_max < cfg.text_len_min)
    throw InvalidConfig("bad text length range");
  if (cfg.utterances_per_cell < 0) throw InvalidConfig("negative utterances_per_cell");
  check_class_specs(cfg.classes);
  for (const auto& cell : cfg.empty_cells)
    if (cell.size() != cfg.classes.size())
      throw InvalidConfig("empty_cells entry arity != class count");
  return cfg;
}

std::string corpus_config_to_json(const CorpusConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["template_seed"] = cfg.template_seed;
  j["frame_dim"] = cfg.frame_dim;
  j["vocab_size"] = cfg.vocab_size;
  j["text_len_min"] = cfg.text_len_min;
  j["text_len_max"] = cfg.text_len_max;
  j["utterances_per_cell"] = cfg.utterances_per_cell;
  j["classes"] = classes_to_json(cfg.classes);
  if (!cfg.empty_cells.empty()) j["empty_cells"] = cfg.empty_cells;
  if (!cfg.cell_counts.empty()) {
    json arr = json::array();
    for (const auto& [cell, count] : cfg.cell_counts)
      arr.push_back({{"cell", cell}, {"count", count}});
    j["cell_counts"] = arr;
  }
  j["separation_floor"] = {
      {"SPECTRAL_PROFILE", cfg.bank_options.spectral_floor},
      {"DURATION_RHYTHM", cfg.bank_options.duration_floor},
      {"AMPLITUDE_ENVELOPE", cfg.bank_options.amplitude_floor}};
  j["spectral_sigma"] = cfg.bank_options.spectral_sigma;
  return j.dump(2);
}

namespace {

void enumerate_cells(const std::vector<StyleClassSpec>& classes, size_t class_idx,
                     std::vector<std::string>& current,
                     std::vector<std::vector<std::string>>& out) {
  if (class_idx == classes.size()) {
    out.push_back(current);
    return;
  }
  for (const auto& id : classes[class_idx].instance_ids) {
    current.push_back(id);
    enumerate_cells(classes, class_idx + 1, current, out);
    current.pop_back();
  }
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string s;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) s += "_";
    s += labels[i];
  }
  return s;
}

}  // namespace

CorpusManifest generate_corpus(const CorpusConfig& config, const std::string& out_dir) {
  CorpusManifest manifest;
  manifest.classes = config.classes;
  manifest.frame_dim = config.frame_dim;
  manifest.vocab_size = config.vocab_size;
  manifest.seed = config.seed;
  manifest.template_seed = config.template_seed;
  manifest.bank = make_factor_bank(config.classes, config.seed, config.frame_dim,
                                   config.bank_options);
  manifest.templates =
      make_template_table(config.template_seed, config.vocab_size, config.frame_dim);
  manifest.base_dir = out_dir;

  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> scratch;
  enumerate_cells(config.classes, 0, scratch, cells);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir + ": " + ec.message());

  const std::string frame_file = "frames.f32";
  std::ofstream frames_out(fs::path(out_dir) / frame_file, std::ios::binary);
  if (!frames_out) throw IoFailure("cannot open frame shard for writing");

  Rng rng(Rng::mix(config.seed, 0x7465787453747231ULL));  // text stream
  std::int64_t offset = 0;
  for (const auto& cell : cells) {
    if (std::find(config.empty_cells.begin(), config.empty_cells.end(), cell) !=
        config.empty_cells.end())
      continue;
    int count = config.utterances_per_cell;
    if (auto it = config.cell_counts.find(cell); it != config.cell_counts.end())
      count = it->second;
    for (int k = 0; k < count; ++k) {
      UtteranceRecord rec;
      rec.labels = cell;
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "%05d", k);
      rec.utt_id = join_labels(cell) + "_" + suffix;
      const int len = config.text_len_min +
                      static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(
                          config.text_len_max - config.text_len_min + 1)));
      rec.text.resize(static_cast<size_t>(len));
      for (int& tok : rec.text)
        tok = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(config.vocab_size)));
      rec.frames = render_utterance(manifest.bank, config.classes, rec.labels,
                                    rec.text, manifest.templates);
      rec.frame_file = frame_file;
      rec.byte_offset = offset;
      write_f32_rowmajor(frames_out, rec.frames);
      offset += static_cast<std::int64_t>(rec.frames.size()) * 4;
      manifest.records.push_back(std::move(rec));
    }
  }
  frames_out.close();

  json header;
  header["schema_version"] = 1;
  header["seed"] = manifest.seed;
  header["template_seed"] = manifest.template_seed;
  header["frame_dim"] = manifest.frame_dim;
  header["vocab_size"] = manifest.vocab_size;
  header["classes"] = classes_to_json(manifest.classes);
  json bank_json = json::array();
  for (const auto& per_class : manifest.bank.params) {
    json inst = json::array();
    for (const auto& v : per_class)
      inst.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    bank_json.push_back(inst);
  }
  header["factor_bank"] = bank_json;
  write_text_file((fs::path(out_dir) / "header.json").string(), header.dump(2) + "\n");

  std::ostringstream records_out;
  for (const auto& rec : manifest.records) {
    json line;
    line["utt_id"] = rec.utt_id;
    line["text"] = rec.text;
    line["labels"] = rec.labels;
    line["T"] = rec.T();
    line["frame_file"] = rec.frame_file;
    line["byte_offset"] = rec.byte_offset;
    records_out << line.dump() << "\n";
  }
  write_text_file((fs::path(out_dir) / "records.jsonl").string(), records_out.str());
  return manifest;
}

CorpusManifest load_corpus(const std::string& dir) {
  const fs::path base(dir);
  if (!fs::exists(base / "header.json"))
    throw MissingFile("missing header.json in " + dir);
  if (!fs::exists(base / "records.jsonl"))
    throw MissingFile("missing records.jsonl in " + dir);

  CorpusManifest manifest;
  manifest.base_dir = dir;
  json header = json::parse(read_text_file((base / "header.json").string()));
  manifest.seed = header.at("seed").get<std::uint64_t>();
  manifest.template_seed = header.at("template_seed").get<std::uint64_t>();
  manifest.frame_dim = header.at("frame_dim").get<int>();
  manifest.vocab_size = header.at("vocab_size").get<int>();
  manifest.classes = classes_from_json(header.at("classes"));
  const auto& bank_json = header.at("factor_bank");
  manifest.bank.params.resize(bank_json.size());
  for (size_t c = 0; c < bank_json.size(); ++c) {
    for (const auto& v : bank_json[c]) {
      auto vals = v.get<std::vector<double>>();
      manifest.bank.params[c].push_back(
          Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
  }
  manifest.templates = make_template_table(manifest.template_seed,
                                           manifest.vocab_size, manifest.frame_dim);

  std::istringstream lines(read_text_file((base / "records.jsonl").string()));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    UtteranceRecord rec;
    rec.utt_id = j.at("utt_id").get<std::string>();
    rec.text = j.at("text").get<std::vector<int>>();
    rec.labels = j.at("labels").get<std::vector<std::string>>();
    rec.frame_file = j.at("frame_file").get<std::string>();
    rec.byte_offset = j.at("byte_offset").get<std::int64_t>();
    const int T = j.at("T").get<int>();
    const std::string shard = (base / rec.frame_file).string();
    const std::int64_t size = file_size_bytes(shard);
    if (size < 0) throw MissingFile("missing frame shard " + shard);
    const std::int64_t need =
        rec.byte_offset + static_cast<std::int64_t>(T) * manifest.frame_dim * 4;
    if (need > size)
      throw CorruptFrames("frame shard too short for " + rec.utt_id + " (needs " +
                          std::to_string(need) + " bytes, has " +
                          std::to_string(size) + ")");
    rec.frames = read_f32_at(shard, rec.byte_offset, T, manifest.frame_dim);
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

std::vector<std::string> validate_manifest(const CorpusManifest& manifest) {
  std::vector<std::string> violations;
  try {
    check_class_specs(manifest.classes);
  } catch (const std::exception& e) {
    violations.push_back(std::string("classes: ") + e.what());
  }
  for (size_t c = 0; c < manifest.classes.size(); ++c) {
    if (manifest.bank.params.size() <= c ||
        manifest.bank.params[c].size() != manifest.classes[c].instance_ids.size())
      violations.push_back("factor bank arity mismatch for class " +
                           manifest.classes[c].name);
  }
  for (const auto& rec : manifest.records) {
    if (rec.T() < 1) violations.push_back(rec.utt_id + ": T < 1");
    if (rec.frames.cols() != manifest.frame_dim)
      violations.push_back(rec.utt_id + ": frame dim mismatch");
    if (!rec.frames.allFinite()) violations.push_back(rec.utt_id + ": non-finite frames");
    if (rec.text.empty()) violations.push_back(rec.utt_id + ": empty text");
    for (int tok : rec.text)
      if (tok < 0 || tok >= manifest.vocab_size) {
        violations.push_back(rec.utt_id + ": token out of vocab");
        break;
      }
    if (rec.labels.size() != manifest.classes.size()) {
      violations.push_back(rec.utt_id + ": label arity mismatch");
      continue;
    }
    for (size_t c = 0; c < rec.labels.size(); ++c) {
      const auto& ids = manifest.classes[c].instance_ids;
      if (std::find(ids.begin(), ids.end(), rec.labels[c]) == ids.end())
        violations.push_back(rec.utt_id + ": unknown instance " + rec.labels[c]);
    }
    if (!manifest.base_dir.empty() && !rec.frame_file.empty()) {
      const std::string shard = (fs::path(manifest.base_dir) / rec.frame_file).string();
      const std::int64_t size = file_size_bytes(shard);
      if (size < 0) {
        violations.push_back(rec.utt_id + ": missing shard " + rec.frame_file);
      } else if (rec.byte_offset +
                     static_cast<std::int64_t>(rec.T()) * manifest.frame_dim * 4 >
                 size) {
        violations.push_back(rec.utt_id + ": shard too short");
      }
    }
  }
  return violations;
}

Vector spectral_statistic(const Matrix& frames, const std::vector<int>& text,
                          const Matrix& templates) {
  if (text.empty()) throw EmptyText("spectral_statistic: empty text");
  Vector mean_frame = frames.colwise().mean().transpose();
  Vector mean_template = Vector::Zero(templates.cols());
  for (int tok : text) mean_template += templates.row(tok).transpose();
  mean_template /= static_cast<double>(text.size());
  return mean_frame - mean_template;
}

double duration_statistic(int total_frames, int num_tokens) {
  if (num_tokens < 1) throw EmptyText("duration_statistic: empty text");
  return static_cast<double>(total_frames) / static_cast<double>(num_tokens);
}

double amplitude_statistic(const Matrix& frames, const std::vector<int>& text,
                           const Matrix& templates) {
  if (text.empty()) throw EmptyText("amplitude_statistic: empty text");
  double frame_norm = 0.0;
  for (Eigen::Index t = 0; t < frames.rows(); ++t) frame_norm += frames.row(t).norm();
  frame_norm /= static_cast<double>(frames.rows());
  double template_norm = 0.0;
  for (int tok : text) template_norm += templates.row(tok).norm();
  template_norm /= static_cast<double>(text.size());
  return frame_norm / template_norm;
}

}  // namespace intercross
