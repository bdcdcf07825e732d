#include "tapret/data.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "tapret/config.hpp"
#include "tapret/rng.hpp"

namespace tapret {

int SynthConfig::relevant_frames() const {
  return static_cast<int>(std::ceil(relevant_fraction * frames_per_clip));
}

void SynthConfig::validate() const {
  if (num_events < 1) throw std::invalid_argument("synth config: num_events must be >= 1");
  if (feature_dim < 1) throw std::invalid_argument("synth config: feature_dim must be >= 1");
  if (frames_per_clip < 1) throw std::invalid_argument("synth config: frames_per_clip must be >= 1");
  if (!(relevant_fraction > 0.0 && relevant_fraction <= 1.0)) {
    throw std::invalid_argument("synth config: relevant_fraction must be in (0, 1]");
  }
  if (events_per_sample < 1 || events_per_sample > num_events) {
    throw std::invalid_argument("synth config: events_per_sample must be in [1, num_events]");
  }
  if (noise_sigma < 0.0) throw std::invalid_argument("synth config: noise_sigma must be >= 0");
  if (num_train < 0 || num_val < 0 || num_test < 0) {
    throw std::invalid_argument("synth config: split sizes must be >= 0");
  }
  if (captions_per_audio_train < 1 || captions_per_audio_eval < 1) {
    throw std::invalid_argument("synth config: captions_per_audio must be >= 1");
  }
  if (relevant_frames() < 1) throw std::invalid_argument("synth config: no relevant frames");
}

std::size_t RetrievalDataset::num_captions() const {
  std::size_t n = 0;
  for (const AudioItem& a : items) n += a.captions.size();
  return n;
}

int RetrievalDataset::feature_dim() const {
  if (items.empty()) return -1;
  return static_cast<int>(items[0].frames.cols());
}

namespace {

Tensor noisy_copy(const Tensor& protos, int event, double sigma, int d, Rng& rng) {
  Tensor v({1, static_cast<std::size_t>(d)});
  for (int j = 0; j < d; ++j) v[j] = protos.at(event, j) + sigma * rng.normal();
  return v;
}

AudioItem make_sample(const SynthConfig& cfg, const Tensor& protos, const std::string& audio_id,
                      int captions_per_audio, Rng& rng) {
  const int d = cfg.feature_dim;
  const int t = cfg.frames_per_clip;
  const int r = cfg.relevant_frames();

  std::vector<int> events = rng.sample_without_replacement(cfg.num_events, cfg.events_per_sample);

  // Distractors come from the complement so they are never described by a
  // caption of this sample.
  std::vector<int> complement;
  complement.reserve(cfg.num_events - cfg.events_per_sample);
  for (int e = 0; e < cfg.num_events; ++e) {
    bool in_sample = false;
    for (int se : events) in_sample = in_sample || (se == e);
    if (!in_sample) complement.push_back(e);
  }

  std::vector<Tensor> frames;
  frames.reserve(t);
  for (int i = 0; i < r; ++i) {
    frames.push_back(noisy_copy(protos, events[i % events.size()], cfg.noise_sigma, d, rng));
  }
  for (int i = r; i < t; ++i) {
    if (complement.empty()) {
      // every event is in the sample (k == E); fall back to sample events
      frames.push_back(noisy_copy(protos, events[rng.uniform_int(static_cast<int>(events.size()))],
                                  cfg.noise_sigma, d, rng));
    } else {
      frames.push_back(noisy_copy(protos, complement[rng.uniform_int(static_cast<int>(complement.size()))],
                                  cfg.noise_sigma, d, rng));
    }
  }
  rng.shuffle(frames);

  AudioItem item;
  item.id = audio_id;
  item.frames = Tensor({static_cast<std::size_t>(t), static_cast<std::size_t>(d)});
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) item.frames.at(i, j) = frames[i][j];

  for (int c = 0; c < captions_per_audio; ++c) {
    const int subset = 1 + rng.uniform_int(static_cast<int>(events.size()));
    std::vector<int> picks = rng.sample_without_replacement(static_cast<int>(events.size()), subset);
    std::vector<Tensor> tokens;
    tokens.reserve(subset);
    for (int p : picks) tokens.push_back(noisy_copy(protos, events[p], cfg.noise_sigma, d, rng));
    rng.shuffle(tokens);

    Caption cap;
    cap.id = audio_id + "-c" + std::to_string(c);
    cap.tokens = Tensor({static_cast<std::size_t>(subset), static_cast<std::size_t>(d)});
    for (int i = 0; i < subset; ++i)
      for (int j = 0; j < d; ++j) cap.tokens.at(i, j) = tokens[i][j];
    item.captions.push_back(std::move(cap));
  }
  return item;
}

std::string pad4(int i) {
  std::ostringstream os;
  os << i;
  std::string s = os.str();
  while (s.size() < 4) s = "0" + s;
  return s;
}

}  // namespace

SynthData synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);

  SynthData out;
  out.prototypes = Tensor({static_cast<std::size_t>(cfg.num_events), static_cast<std::size_t>(cfg.feature_dim)});
  for (double& x : out.prototypes.data()) x = rng.normal();

  for (int i = 0; i < cfg.num_train; ++i) {
    out.train.items.push_back(make_sample(cfg, out.prototypes, "train-" + pad4(i),
                                          cfg.captions_per_audio_train, rng));
  }
  for (int i = 0; i < cfg.num_val; ++i) {
    out.val.items.push_back(make_sample(cfg, out.prototypes, "val-" + pad4(i),
                                        cfg.captions_per_audio_eval, rng));
  }
  for (int i = 0; i < cfg.num_test; ++i) {
    out.test.items.push_back(make_sample(cfg, out.prototypes, "test-" + pad4(i),
                                         cfg.captions_per_audio_eval, rng));
  }
  return out;
}

namespace {

using nlohmann::ordered_json;

ordered_json matrix_to_json(const Tensor& t) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Tensor matrix_from_json(const ordered_json& j, int expect_width, std::size_t line, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw std::runtime_error("jsonl: line " + std::to_string(line) + ": " + what + " must be a nonempty array of rows");
  }
  const std::size_t m = j.size();
  const std::size_t n = j[0].is_array() ? j[0].size() : 0;
  if (n == 0) {
    throw std::runtime_error("jsonl: line " + std::to_string(line) + ": " + what + " rows must be nonempty arrays");
  }
  if (expect_width >= 0 && n != static_cast<std::size_t>(expect_width)) {
    throw std::runtime_error("jsonl: line " + std::to_string(line) + ": schema error: " + what + " width " +
                             std::to_string(n) + " does not match dataset width " + std::to_string(expect_width));
  }
  Tensor t({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != n) {
      throw std::runtime_error("jsonl: line " + std::to_string(line) + ": schema error: ragged " +
                               std::string(what) + " at row " + std::to_string(i));
    }
    for (std::size_t jj = 0; jj < n; ++jj) {
      if (!row[jj].is_number()) {
        throw std::runtime_error("jsonl: line " + std::to_string(line) + ": " + what + " entries must be numbers");
      }
      t.at(i, jj) = row[jj].get<double>();
    }
  }
  return t;
}

}  // namespace

RetrievalDataset load_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("jsonl: cannot open " + path);

  RetrievalDataset ds;
  std::set<std::string> audio_ids, caption_ids;
  int width = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ordered_json rec;
    try {
      rec = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("jsonl: parse error at line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("audio_id") || !rec.contains("frames") || !rec.contains("captions")) {
      throw std::runtime_error("jsonl: line " + std::to_string(lineno) +
                               ": record must have audio_id, frames, captions");
    }
    AudioItem item;
    if (!rec["audio_id"].is_string()) {
      throw std::runtime_error("jsonl: line " + std::to_string(lineno) + ": audio_id must be a string");
    }
    item.id = rec["audio_id"].get<std::string>();
    if (!audio_ids.insert(item.id).second) {
      throw std::runtime_error("jsonl: line " + std::to_string(lineno) + ": duplicate audio_id '" + item.id + "'");
    }
    item.frames = matrix_from_json(rec["frames"], width, lineno, "frames");
    if (width < 0) width = static_cast<int>(item.frames.cols());
    if (!rec["captions"].is_array() || rec["captions"].empty()) {
      throw std::runtime_error("jsonl: line " + std::to_string(lineno) + ": captions must be a nonempty array");
    }
    for (const auto& cj : rec["captions"]) {
      if (!cj.is_object() || !cj.contains("caption_id") || !cj.contains("tokens") || !cj["caption_id"].is_string()) {
        throw std::runtime_error("jsonl: line " + std::to_string(lineno) +
                                 ": caption must have caption_id and tokens");
      }
      Caption cap;
      cap.id = cj["caption_id"].get<std::string>();
      if (!caption_ids.insert(cap.id).second) {
        throw std::runtime_error("jsonl: line " + std::to_string(lineno) + ": duplicate caption_id '" + cap.id + "'");
      }
      cap.tokens = matrix_from_json(cj["tokens"], width, lineno, "tokens");
      item.captions.push_back(std::move(cap));
    }
    ds.items.push_back(std::move(item));
  }
  if (ds.items.empty()) throw std::runtime_error("jsonl: empty dataset in " + path);
  return ds;
}

void save_jsonl(const RetrievalDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("jsonl: cannot write " + path);
  for (const AudioItem& item : ds.items) {
    ordered_json rec;
    rec["audio_id"] = item.id;
    rec["frames"] = matrix_to_json(item.frames);
    ordered_json caps = ordered_json::array();
    for (const Caption& c : item.captions) {
      ordered_json cj;
      cj["caption_id"] = c.id;
      cj["tokens"] = matrix_to_json(c.tokens);
      caps.push_back(std::move(cj));
    }
    rec["captions"] = std::move(caps);
    out << rec.dump() << '\n';
  }
  if (!out) throw std::runtime_error("jsonl: write failed for " + path);
}

SynthConfig SynthConfig::from_file(const std::string& path) {
  KvFile kv = KvFile::from_file(path);
  SynthConfig cfg;
  kv.get_int("num_events", cfg.num_events);
  kv.get_int("feature_dim", cfg.feature_dim);
  kv.get_int("frames_per_clip", cfg.frames_per_clip);
  kv.get_double("relevant_fraction", cfg.relevant_fraction);
  kv.get_int("events_per_sample", cfg.events_per_sample);
  kv.get_double("noise_sigma", cfg.noise_sigma);
  kv.get_int("num_train", cfg.num_train);
  kv.get_int("num_val", cfg.num_val);
  kv.get_int("num_test", cfg.num_test);
  kv.get_int("captions_per_audio_train", cfg.captions_per_audio_train);
  kv.get_int("captions_per_audio_eval", cfg.captions_per_audio_eval);
  kv.get_u64("seed", cfg.seed);
  kv.finish();
  cfg.validate();
  return cfg;
}

}  // namespace tapret
