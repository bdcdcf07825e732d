#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tapret/tensor.hpp"

namespace tapret {

// Generator settings for the synthetic sub-segment corpus: each clip mixes a
// few "relevant" event frames with distractor frames drawn from events the
// captions never mention.
struct SynthConfig {
  int num_events = 32;
  int feature_dim = 32;
  int frames_per_clip = 20;
  double relevant_fraction = 0.3;  // (0, 1]
  int events_per_sample = 2;
  double noise_sigma = 0.05;
  int num_train = 2000;
  int num_val = 200;
  int num_test = 200;
  int captions_per_audio_train = 1;
  int captions_per_audio_eval = 5;
  std::uint64_t seed = 7;

  int relevant_frames() const;  // ceil(relevant_fraction * frames_per_clip)
  void validate() const;
  static SynthConfig from_file(const std::string& path);
};

struct Caption {
  std::string id;
  Tensor tokens;  // L x D_in
};

struct AudioItem {
  std::string id;
  Tensor frames;  // T x D_in
  std::vector<Caption> captions;
};

struct RetrievalDataset {
  std::vector<AudioItem> items;

  std::size_t num_audios() const { return items.size(); }
  std::size_t num_captions() const;
  int feature_dim() const;  // -1 when empty
};

struct SynthData {
  RetrievalDataset train, val, test;
  Tensor prototypes;  // E x D_in event vectors, for test oracles
};

SynthData synth_generate(const SynthConfig& cfg);

// One record per line:
// {"audio_id": ..., "frames": [[...]], "captions": [{"caption_id": ..., "tokens": [[...]]}]}
RetrievalDataset load_jsonl(const std::string& path);
void save_jsonl(const RetrievalDataset& ds, const std::string& path);

}  // namespace tapret
