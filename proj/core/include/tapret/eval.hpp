#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tapret/data.hpp"
#include "tapret/graph.hpp"
#include "tapret/model.hpp"
#include "tapret/tensor.hpp"

namespace tapret {

// Caption/audio pairing in score-matrix index space. Captions are flattened
// in dataset order (audio order, then caption order within each audio).
struct GroundTruth {
  std::vector<int> caption_to_audio;
  std::vector<std::vector<int>> audio_to_captions;
  std::vector<std::string> caption_ids;
  std::vector<std::string> audio_ids;

  void validate() const;  // the two maps must be mutually consistent
};

GroundTruth ground_truth(const RetrievalDataset& ds);

enum class Direction { T2A, A2T };
std::string to_string(Direction d);

struct DirectionReport {
  Direction direction;
  std::vector<std::pair<int, double>> r_at;  // (k, recall), in query order of ks
  int num_queries = 0;

  double at(int k) const;
};

struct RetrievalReport {
  DirectionReport t2a, a2t;
};

// t2a: one query per caption, hit when its paired audio ranks in the top k.
// a2t: one query per audio, hit when any of its captions ranks in the top k.
// Ranking is by descending score; ties go to the lower candidate index.
DirectionReport recall_at_k(const Tensor& scores, const GroundTruth& gt,
                            const std::vector<int>& ks, Direction dir);
RetrievalReport evaluate_retrieval(const Tensor& scores, const GroundTruth& gt,
                                   const std::vector<int>& ks);

// Full N_t x N_a cosine score matrix for the dataset under the given model
// and pooling. Text-conditioned pooling is evaluated per pair; work happens
// in tiles of at most tile_pairs (text, audio) cells so memory stays bounded.
Tensor score_matrix_eval(const RetrievalDataset& ds, const ModelParams& params, Pooling pooling,
                         int tile_pairs, Precision precision = Precision::Double);

// "direction,k,recall,num_queries" rows.
std::string report_csv(const RetrievalReport& report);
// key-value lines, e.g. "t2a_r@1 = 0.420000"
void print_report(std::ostream& os, const RetrievalReport& report);

}  // namespace tapret
